#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "radfuse/features.hpp"

namespace radfuse {

/// Per-sample global feature values with labels. Column order is fixed at
/// construction and is the order used everywhere downstream.
class FeatureTable {
 public:
  struct Row {
    std::string id;
    std::vector<double> values;
    int label = 0;
  };

  FeatureTable() = default;
  explicit FeatureTable(std::vector<std::string> keys);

  const std::vector<std::string>& keys() const { return keys_; }
  const std::vector<Row>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  std::size_t width() const { return keys_.size(); }

  void add(std::string id, std::vector<double> values, int label);
  void add(std::string id, const FeatureVector& features, int label);

  double value(std::size_t row, std::size_t column) const { return rows_[row].values[column]; }
  std::vector<double> column(std::size_t column) const;
  std::vector<int> labels() const;
  FeatureVector features(std::size_t row) const;
  std::ptrdiff_t find_key(std::string_view key) const;

  /// Rows in the given order.
  FeatureTable subset(std::span<const std::size_t> rows) const;

  /// CSV: `id,<keys...>,label`, values printed with 17 significant digits.
  void write_csv(const std::filesystem::path& path) const;
  static FeatureTable read_csv(const std::filesystem::path& path);

 private:
  std::vector<std::string> keys_;
  std::vector<Row> rows_;
};

struct PlantedTableParams {
  std::size_t samples = 200;
  std::size_t informative = 4;
  std::size_t noise = 16;
  /// Class-mean separation of each informative column, in noise SDs.
  double separation = 2.5;
};

/// Balanced synthetic table: informative columns are N(±separation/2, 1) by
/// class, noise columns N(0, 1) with random scale and offset. Informative
/// keys are `planted_informative_<k>`, the rest `planted_noise_<k>`; rows and
/// columns are shuffled deterministically.
FeatureTable planted_feature_table(std::uint64_t seed, const PlantedTableParams& params = {});

bool is_planted_informative(std::string_view key);

}  // namespace radfuse
