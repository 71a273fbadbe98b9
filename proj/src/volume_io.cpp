#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "radfuse/error.hpp"
#include "radfuse/kv.hpp"
#include "radfuse/raw_io.hpp"
#include "radfuse/volume.hpp"

namespace radfuse {

namespace raw {

std::size_t Header::count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= static_cast<std::size_t>(d);
  return n;
}

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "int16le") return 2;
  if (dtype == "uint8") return 1;
  if (dtype == "float32le") return 4;
  fail(ErrorKind::Format, "unsupported dtype '" + dtype + "'");
}

Header read_header(const std::filesystem::path& header_path) {
  if (!std::filesystem::exists(header_path))
    fail(ErrorKind::Io, "missing header " + header_path.string());
  const auto kv = KeyValues::read(header_path);
  Header h;
  h.dims = kv.get<std::vector<std::int64_t>>("dims");
  const auto spacing = kv.get<std::vector<double>>("spacing_mm");
  h.dtype = kv.get<std::string>("dtype");
  dtype_size(h.dtype);
  if (h.dims.empty())
    fail(ErrorKind::Format, header_path.string() + ": dims must not be empty");
  for (auto d : h.dims)
    if (d <= 0) fail(ErrorKind::Format, header_path.string() + ": non-positive dims");
  if (spacing.size() != 3)
    fail(ErrorKind::Format, header_path.string() + ": spacing_mm needs 3 entries");
  for (double s : spacing)
    if (!(s > 0) || !std::isfinite(s))
      fail(ErrorKind::Format, header_path.string() + ": non-positive spacing");
  h.spacing = {spacing[0], spacing[1], spacing[2]};
  return h;
}

void write_header(const std::filesystem::path& header_path, const Header& header) {
  KeyValues kv;
  kv.set("dims", header.dims);
  kv.set("spacing_mm", std::vector<double>{header.spacing.z, header.spacing.y, header.spacing.x});
  kv.set("dtype", header.dtype);
  kv.write(header_path);
}

std::vector<unsigned char> read_payload(const std::filesystem::path& payload_path,
                                        std::size_t expected_bytes) {
  std::ifstream in(payload_path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + payload_path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  if (size != expected_bytes)
    fail(ErrorKind::Format, payload_path.string() + ": payload is " + std::to_string(size) +
                                " bytes, header implies " + std::to_string(expected_bytes));
  in.seekg(0);
  std::vector<unsigned char> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) fail(ErrorKind::Io, "short read on " + payload_path.string());
  return bytes;
}

void write_payload(const std::filesystem::path& payload_path,
                   const std::vector<unsigned char>& bytes) {
  std::ofstream out(payload_path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + payload_path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write failed: " + payload_path.string());
}

}  // namespace raw

std::pair<std::filesystem::path, std::filesystem::path> volume_paths(
    const std::filesystem::path& path) {
  auto base = path;
  if (base.extension() == ".vol" || base.extension() == ".volhdr") base.replace_extension();
  auto payload = base;
  payload += ".vol";
  auto header = base;
  header += ".volhdr";
  return {payload, header};
}

namespace {

Dims dims_from(const raw::Header& h, const std::filesystem::path& path) {
  if (h.dims.size() != 3)
    fail(ErrorKind::Format, path.string() + ": expected dims = [z, y, x]");
  return {h.dims[0], h.dims[1], h.dims[2]};
}

}  // namespace

CtVolume load_volume(const std::filesystem::path& path) {
  const auto [payload, header] = volume_paths(path);
  const auto h = raw::read_header(header);
  if (h.dtype != "int16le")
    fail(ErrorKind::Format, header.string() + ": volume dtype must be int16le");
  const Dims dims = dims_from(h, header);
  const auto bytes = raw::read_payload(payload, dims.count() * 2);
  std::vector<double> voxels(dims.count());
  for (std::size_t i = 0; i < voxels.size(); ++i)
    voxels[i] = raw::load_le<std::int16_t>(bytes.data() + 2 * i);
  return CtVolume(dims, h.spacing, std::move(voxels));
}

void save_volume(const std::filesystem::path& path, const CtVolume& volume) {
  const auto [payload, header] = volume_paths(path);
  const auto in = volume.voxels();
  std::vector<unsigned char> bytes(in.size() * 2);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double r = std::nearbyint(in[i]);
    if (r < std::numeric_limits<std::int16_t>::min() ||
        r > std::numeric_limits<std::int16_t>::max())
      fail(ErrorKind::Data, "voxel value out of int16 range");
    raw::store_le<std::int16_t>(bytes.data() + 2 * i, static_cast<std::int16_t>(r));
  }
  const Dims& d = volume.dims();
  raw::write_header(header, {{d.depth, d.height, d.width}, volume.spacing(), "int16le"});
  raw::write_payload(payload, bytes);
}

RoiMask load_mask(const std::filesystem::path& path, Spacing* spacing) {
  const auto [payload, header] = volume_paths(path);
  const auto h = raw::read_header(header);
  if (h.dtype != "uint8")
    fail(ErrorKind::Format, header.string() + ": mask dtype must be uint8");
  const Dims dims = dims_from(h, header);
  auto bytes = raw::read_payload(payload, dims.count());
  for (auto b : bytes)
    if (b > 1) fail(ErrorKind::Format, payload.string() + ": mask values must be 0 or 1");
  if (spacing) *spacing = h.spacing;
  return RoiMask(dims, std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
}

void save_mask(const std::filesystem::path& path, const RoiMask& mask, Spacing spacing) {
  const auto [payload, header] = volume_paths(path);
  const Dims& d = mask.dims();
  raw::write_header(header, {{d.depth, d.height, d.width}, spacing, "uint8"});
  raw::write_payload(payload, {mask.voxels().begin(), mask.voxels().end()});
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open manifest " + path.string());
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  std::vector<ManifestRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(ErrorKind::Format, where + ": not a JSON object");
    try {
      ManifestRecord r;
      r.id = j.at("id").get<std::string>();
      r.volume = resolve(j.at("volume").get<std::string>());
      if (j.contains("mask") && !j.at("mask").is_null())
        r.mask = resolve(j.at("mask").get<std::string>());
      r.label = j.at("label").get<int>();
      if (r.label != 0 && r.label != 1) fail(ErrorKind::Format, where + ": label must be 0 or 1");
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Format, where + ": " + e.what());
    }
  }
  return records;
}

void write_manifest(const std::filesystem::path& path,
                    std::span<const ManifestRecord> records) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write manifest " + path.string());
  const auto base = path.parent_path();
  auto rel = [&](const std::filesystem::path& p) {
    return p.is_absolute() ? p.lexically_relative(base).generic_string() : p.generic_string();
  };
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["volume"] = rel(r.volume);
    if (r.mask) j["mask"] = rel(*r.mask);
    j["label"] = r.label;
    out << j.dump() << '\n';
  }
}

Sample load_sample(const ManifestRecord& record) {
  Sample s;
  s.id = record.id;
  s.label = record.label;
  s.volume = load_volume(record.volume);
  s.mask = record.mask ? load_mask(*record.mask) : threshold_roi(s.volume);
  require(s.mask.dims() == s.volume.dims(), ErrorKind::Data,
          record.id + ": mask and volume dims differ");
  return s;
}

}  // namespace radfuse
