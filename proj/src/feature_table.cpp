#include "radfuse/feature_table.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "radfuse/error.hpp"
#include "radfuse/random.hpp"

namespace radfuse {

FeatureTable::FeatureTable(std::vector<std::string> keys) : keys_(std::move(keys)) {
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    require(!keys_[i].empty(), ErrorKind::InvalidArgument, "empty feature key");
    for (std::size_t j = 0; j < i; ++j)
      require(keys_[i] != keys_[j], ErrorKind::InvalidArgument, "duplicate feature key " + keys_[i]);
  }
}

void FeatureTable::add(std::string id, std::vector<double> values, int label) {
  require(values.size() == keys_.size(), ErrorKind::InvalidArgument,
          "row " + id + " has " + std::to_string(values.size()) + " values, expected " +
              std::to_string(keys_.size()));
  require(label == 0 || label == 1, ErrorKind::InvalidArgument, "labels must be 0 or 1");
  for (double v : values)
    require(std::isfinite(v), ErrorKind::Numeric, "non-finite feature value in row " + id);
  rows_.push_back({std::move(id), std::move(values), label});
}

void FeatureTable::add(std::string id, const FeatureVector& features, int label) {
  std::vector<double> values;
  values.reserve(keys_.size());
  for (const auto& k : keys_) values.push_back(features.get(k));
  add(std::move(id), std::move(values), label);
}

std::vector<double> FeatureTable::column(std::size_t column) const {
  std::vector<double> out;
  out.reserve(rows_.size());
  for (const auto& r : rows_) out.push_back(r.values[column]);
  return out;
}

std::vector<int> FeatureTable::labels() const {
  std::vector<int> out;
  out.reserve(rows_.size());
  for (const auto& r : rows_) out.push_back(r.label);
  return out;
}

FeatureVector FeatureTable::features(std::size_t row) const {
  FeatureVector out;
  for (std::size_t c = 0; c < keys_.size(); ++c) out.add(keys_[c], rows_[row].values[c]);
  return out;
}

std::ptrdiff_t FeatureTable::find_key(std::string_view key) const {
  for (std::size_t c = 0; c < keys_.size(); ++c)
    if (keys_[c] == key) return static_cast<std::ptrdiff_t>(c);
  return -1;
}

FeatureTable FeatureTable::subset(std::span<const std::size_t> rows) const {
  FeatureTable out(keys_);
  out.rows_.reserve(rows.size());
  for (auto r : rows) {
    require(r < rows_.size(), ErrorKind::InvalidArgument, "row index out of range");
    out.rows_.push_back(rows_[r]);
  }
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) fail(ErrorKind::Format, where + ": bad number '" + text + "'");
  return v;
}

}  // namespace

void FeatureTable::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << "id";
  for (const auto& k : keys_) out << ',' << k;
  out << ",label\n";
  char buf[64];
  for (const auto& r : rows_) {
    require(r.id.find(',') == std::string::npos, ErrorKind::InvalidArgument,
            "sample id contains a comma: " + r.id);
    out << r.id;
    for (double v : r.values) {
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << ',' << r.label << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::Io, "failed writing " + path.string());
}

FeatureTable FeatureTable::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Format, path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv(line);
  require(header.size() >= 2 && header.front() == "id" && header.back() == "label",
          ErrorKind::Format, path.string() + ": header must be id,<keys...>,label");
  FeatureTable table(std::vector<std::string>(header.begin() + 1, header.end() - 1));
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    require(cells.size() == header.size(), ErrorKind::Format, where + ": wrong column count");
    std::vector<double> values;
    for (std::size_t c = 1; c + 1 < cells.size(); ++c) values.push_back(parse_double(cells[c], where));
    const double label = parse_double(cells.back(), where);
    require(label == 0.0 || label == 1.0, ErrorKind::Format, where + ": label must be 0 or 1");
    table.add(cells.front(), std::move(values), static_cast<int>(label));
  }
  return table;
}

FeatureTable planted_feature_table(std::uint64_t seed, const PlantedTableParams& params) {
  require(params.samples >= 4, ErrorKind::InvalidArgument, "planted table needs >= 4 samples");
  require(params.informative + params.noise > 0, ErrorKind::InvalidArgument,
          "planted table needs columns");
  Rng rng(seed);
  std::vector<std::string> keys;
  for (std::size_t k = 0; k < params.informative; ++k)
    keys.push_back("planted_informative_" + std::to_string(k));
  for (std::size_t k = 0; k < params.noise; ++k) keys.push_back("planted_noise_" + std::to_string(k));
  rng.shuffle(std::span(keys));

  const std::size_t width = keys.size();
  std::vector<double> scale(width), offset(width);
  for (std::size_t c = 0; c < width; ++c) {
    scale[c] = std::exp(rng.uniform(-2.0, 2.0));
    offset[c] = rng.normal(0.0, 10.0);
  }

  std::vector<int> labels(params.samples);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2);
  rng.shuffle(std::span(labels));

  FeatureTable table(keys);
  for (std::size_t i = 0; i < params.samples; ++i) {
    std::vector<double> values(width);
    const double sign = labels[i] ? 0.5 : -0.5;
    for (std::size_t c = 0; c < width; ++c) {
      const double shift = is_planted_informative(keys[c]) ? sign * params.separation : 0.0;
      values[c] = offset[c] + scale[c] * (shift + rng.normal());
    }
    table.add("planted_" + std::to_string(i), std::move(values), labels[i]);
  }
  return table;
}

bool is_planted_informative(std::string_view key) {
  return key.starts_with("planted_informative_");
}

}  // namespace radfuse
