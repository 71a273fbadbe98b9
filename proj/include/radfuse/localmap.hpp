#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "radfuse/features.hpp"
#include "radfuse/quantize.hpp"
#include "radfuse/volume.hpp"

namespace radfuse {

struct ChannelSpec {
  std::string key;  // canonical texture key
  int radius = 1;

  friend bool operator==(const ChannelSpec&, const ChannelSpec&) = default;
};

/// Stack of per-voxel texture maps, channel-major: values[c][z][y][x].
///
/// A voxel is valid in channel c when its clamped patch intersects the ROI.
/// Invalid voxels hold 0. A valid voxel whose feature is undefined on the
/// patch (a GLCM without any in-ROI pair) also holds 0.
struct LocalFeatureMap {
  Dims dims;
  std::vector<ChannelSpec> channels;
  std::vector<double> values;
  std::vector<std::uint8_t> validity;

  std::size_t channel_count() const { return channels.size(); }
  std::span<const double> channel(std::size_t c) const {
    return std::span<const double>(values).subspan(c * dims.count(), dims.count());
  }
  std::span<const std::uint8_t> channel_validity(std::size_t c) const {
    return std::span<const std::uint8_t>(validity).subspan(c * dims.count(), dims.count());
  }

  friend bool operator==(const LocalFeatureMap&, const LocalFeatureMap&) = default;
};

struct LocalMapOptions {
  int workers = 1;
  int alpha_dep = 0;
};

/// Texture feature on the cubic patch of `radius` around every voxel,
/// clamped to the volume and restricted to patch ∩ ROI. Uses the levels and
/// gray-level count of the volume-wide quantization `q`.
LocalFeatureMap local_feature_map(const QuantizedVolume& q, const RoiMask& mask, TextureKey key,
                                  int radius, const LocalMapOptions& options = {});

/// Reference implementation: extracts every patch and rebuilds the full
/// texture matrix with the global builders. Slow; for verification only.
LocalFeatureMap naive_local_oracle(const QuantizedVolume& q, const RoiMask& mask, TextureKey key,
                                   int radius, int alpha_dep = 0);

/// Channel concatenation in argument order.
LocalFeatureMap stack_local_maps(std::span<const LocalFeatureMap> maps);

/// Map payload as float32 with `dims = [L, z, y, x]`, the channel list in
/// `<name>.channels` (one `key radius` per line) and validity in
/// `<name>.valid.vol` (uint8, same dims).
void save_local_map(const std::filesystem::path& path, const LocalFeatureMap& map,
                    Spacing spacing = {});
LocalFeatureMap load_local_map(const std::filesystem::path& path);

}  // namespace radfuse
