#pragma once

// Shared plumbing for the detached-header raw formats (volumes, masks,
// local feature map stacks).

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "radfuse/volume.hpp"

namespace radfuse::raw {

struct Header {
  std::vector<std::int64_t> dims;  // slowest axis first
  Spacing spacing;
  std::string dtype;

  std::size_t count() const;
};

std::size_t dtype_size(const std::string& dtype);

Header read_header(const std::filesystem::path& header_path);
void write_header(const std::filesystem::path& header_path, const Header& header);

std::vector<unsigned char> read_payload(const std::filesystem::path& payload_path,
                                        std::size_t expected_bytes);
void write_payload(const std::filesystem::path& payload_path,
                   const std::vector<unsigned char>& bytes);

template <typename T>
void store_le(unsigned char* dst, T value) {
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(dst, &value, sizeof(T));
  } else {
    unsigned char tmp[sizeof(T)];
    std::memcpy(tmp, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T); ++i) dst[i] = tmp[sizeof(T) - 1 - i];
  }
}

template <typename T>
T load_le(const unsigned char* src) {
  T value;
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(&value, src, sizeof(T));
  } else {
    unsigned char tmp[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) tmp[i] = src[sizeof(T) - 1 - i];
    std::memcpy(&value, tmp, sizeof(T));
  }
  return value;
}

}  // namespace radfuse::raw
