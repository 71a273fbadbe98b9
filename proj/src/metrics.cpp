#include "radfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "radfuse/error.hpp"

namespace radfuse {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), ErrorKind::InvalidArgument,
          "scores and labels differ in length");
  require(!scores.empty(), ErrorKind::InvalidArgument, "no scores");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    require(labels[i] == 0 || labels[i] == 1, ErrorKind::InvalidArgument, "labels must be 0 or 1");
    require(!std::isnan(scores[i]), ErrorKind::Numeric, "NaN score");
  }
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  return {pos, labels.size() - pos};
}

// Indices sorted by descending score, stable.
std::vector<std::size_t> descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto [pos, neg] = class_counts(labels);
  require(pos > 0 && neg > 0, ErrorKind::Data, "AUC needs both classes");
  // Walk tie groups from the top; each negative in a group beats every
  // positive seen in earlier groups and ties with the group's positives.
  const auto order = descending(scores);
  double wins = 0.0;
  std::size_t pos_above = 0;
  for (std::size_t g = 0; g < order.size();) {
    std::size_t e = g, p = 0, n = 0;
    while (e < order.size() && scores[order[e]] == scores[order[g]]) {
      (labels[order[e]] ? p : n) += 1;
      ++e;
    }
    wins += static_cast<double>(n) * (static_cast<double>(pos_above) + 0.5 * static_cast<double>(p));
    pos_above += p;
    g = e;
  }
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto [pos, neg] = class_counts(labels);
  require(pos > 0, ErrorKind::Data, "average precision needs a positive sample");
  (void)neg;
  const auto order = descending(scores);
  double ap = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t g = 0; g < order.size();) {
    std::size_t e = g, p = 0;
    while (e < order.size() && scores[order[e]] == scores[order[g]]) {
      p += labels[order[e]] ? 1 : 0;
      ++e;
    }
    tp += p;
    seen = e;
    if (p > 0)
      ap += (static_cast<double>(p) / static_cast<double>(pos)) *
            (static_cast<double>(tp) / static_cast<double>(seen));
    g = e;
  }
  return ap;
}

BinaryMetrics binary_metrics(std::span<const double> scores, std::span<const int> labels,
                             double threshold) {
  BinaryMetrics m;
  m.auc = roc_auc(scores, labels);
  m.ap = average_precision(scores, labels);
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] == 1;
    tp += predicted && actual;
    fp += predicted && !actual;
    fn += !predicted && actual;
    correct += predicted == actual;
  }
  const std::size_t denom = 2 * tp + fp + fn;
  m.f1 = denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  m.accuracy = static_cast<double>(correct) / static_cast<double>(scores.size());
  return m;
}

MetricSummary summarize(std::vector<double> values) {
  require(!values.empty(), ErrorKind::InvalidArgument, "no fold values to summarize");
  MetricSummary s;
  s.folds = std::move(values);
  const auto n = static_cast<double>(s.folds.size());
  s.mean = std::accumulate(s.folds.begin(), s.folds.end(), 0.0) / n;
  // Rounding can push the mean of equal values a hair outside [min, max].
  const auto [lo, hi] = std::minmax_element(s.folds.begin(), s.folds.end());
  s.mean = std::clamp(s.mean, *lo, *hi);
  if (s.folds.size() > 1) {
    double ss = 0.0;
    for (double v : s.folds) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

MetricReport MetricReport::from_folds(std::span<const BinaryMetrics> folds) {
  std::vector<double> auc, ap, f1, acc;
  for (const auto& f : folds) {
    auc.push_back(f.auc);
    ap.push_back(f.ap);
    f1.push_back(f.f1);
    acc.push_back(f.accuracy);
  }
  return {summarize(auc), summarize(ap), summarize(f1), summarize(acc)};
}

namespace {

nlohmann::ordered_json summary_json(const MetricSummary& s) {
  return {{"folds", s.folds}, {"mean", s.mean}, {"std", s.std}};
}

MetricSummary summary_from(const nlohmann::json& j, const char* name) {
  require(j.contains(name), ErrorKind::Format, std::string("report lacks '") + name + "'");
  const auto& s = j.at(name);
  MetricSummary out;
  try {
    out.folds = s.at("folds").get<std::vector<double>>();
    out.mean = s.at("mean").get<double>();
    out.std = s.at("std").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("bad report entry '") + name + "': " + e.what());
  }
  require(!out.folds.empty(), ErrorKind::Format, std::string("report entry '") + name + "' is empty");
  for (double v : out.folds)
    require(v >= 0.0 && v <= 1.0, ErrorKind::Format, std::string("metric out of range in ") + name);
  return out;
}

}  // namespace

nlohmann::ordered_json MetricReport::to_json() const {
  return {{"auc", summary_json(auc)},
          {"map", summary_json(ap)},
          {"f1", summary_json(f1)},
          {"accuracy", summary_json(accuracy)}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
  return {summary_from(j, "auc"), summary_from(j, "map"), summary_from(j, "f1"),
          summary_from(j, "accuracy")};
}

void write_report(const std::filesystem::path& path, const MetricReport& report,
                  const nlohmann::ordered_json& extra) {
  auto j = report.to_json();
  if (extra.is_object())
    for (const auto& [k, v] : extra.items()) j[k] = v;
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

MetricReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
  return MetricReport::from_json(j);
}

}  // namespace radfuse
