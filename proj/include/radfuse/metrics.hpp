#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace radfuse {

/// Probability that a random positive outranks a random negative, ties
/// counted as one half. Both classes must be present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Precision averaged over recall increments, scanning distinct score
/// thresholds from high to low. Tied scores enter together.
double average_precision(std::span<const double> scores, std::span<const int> labels);

struct BinaryMetrics {
  double auc = 0.0;
  double ap = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

/// F1 and accuracy predict positive when score >= threshold. F1 is 1 when
/// there are no positives and none are predicted.
BinaryMetrics binary_metrics(std::span<const double> scores, std::span<const int> labels,
                             double threshold = 0.5);

struct MetricSummary {
  std::vector<double> folds;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single fold
};

MetricSummary summarize(std::vector<double> values);

struct MetricReport {
  MetricSummary auc, ap, f1, accuracy;

  static MetricReport from_folds(std::span<const BinaryMetrics> folds);
  nlohmann::ordered_json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
};

void write_report(const std::filesystem::path& path, const MetricReport& report,
                  const nlohmann::ordered_json& extra = {});
MetricReport read_report(const std::filesystem::path& path);

}  // namespace radfuse
