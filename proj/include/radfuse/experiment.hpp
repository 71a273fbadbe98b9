#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "radfuse/feature_table.hpp"
#include "radfuse/features.hpp"
#include "radfuse/folds.hpp"
#include "radfuse/kv.hpp"
#include "radfuse/localmap.hpp"
#include "radfuse/metrics.hpp"
#include "radfuse/toynet.hpp"
#include "radfuse/volume.hpp"

namespace radfuse {

enum class Pipeline { RadiomicsLasso, ToyRidl, ToyBaselineConcat };

Pipeline parse_pipeline(std::string_view name);
std::string_view pipeline_name(Pipeline pipeline);

/// Everything a run needs. Read from a key-value config; unknown keys are
/// rejected so typos fail loudly.
struct ExperimentConfig {
  Pipeline pipeline = Pipeline::RadiomicsLasso;

  // Input: a manifest, or generated phantoms when no manifest is given.
  std::optional<std::filesystem::path> manifest;
  std::size_t phantoms = 200;
  Dims phantom_dims{24, 24, 24};
  std::uint64_t phantom_seed = 0;

  std::filesystem::path out = "radfuse_out";
  std::optional<std::filesystem::path> cache_dir;  // default <out>/cache
  int threads = 1;

  int n_folds = 5;
  bool stratified = false;
  std::uint64_t fold_seed = 0;

  double bin_width = kDefaultBinWidth;
  std::vector<std::string> feature_keys = all_feature_keys();      // LASSO candidates
  std::vector<std::string> radiomic_keys = default_feature_keys();  // toy r^g
  std::vector<TextureKey> local_keys{TextureKey::GlcmIdn};
  std::vector<int> radii{1, 2, 5, 10};

  int lambda_count = 50;
  double lambda_ratio = 1e-3;

  ToyConfig toy;
  std::vector<double> w_corr_grid{1.5, 2.0, 2.5, 3.0};

  static ExperimentConfig from_kv(const KeyValues& kv,
                                  const std::filesystem::path& base_dir = {});
  static ExperimentConfig read(const std::filesystem::path& path);
  KeyValues to_kv() const;

  std::filesystem::path cache() const { return cache_dir.value_or(out / "cache"); }
};

/// Loaded cases padded to a common grid.
struct Dataset {
  std::vector<Sample> samples;
  Dims dims;
  std::vector<int> labels() const;
};

/// Phantom i has label i % 2 and a seed derived from (seed, i).
std::vector<Sample> phantom_samples(std::size_t count, Dims dims, std::uint64_t seed,
                                    int threads = 1);
Dataset load_dataset(const ExperimentConfig& config);

/// Writes volumes, masks and `manifest.jsonl` under `dir`; returns the
/// manifest path.
std::filesystem::path write_phantom_dataset(const std::filesystem::path& dir, std::size_t count,
                                            Dims dims, std::uint64_t seed, int threads = 1);

/// 64-bit FNV-1a, chained through `seed`.
std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t content_hash(const Sample& sample);

/// Counts cache traffic; hits and misses are also logged to stderr.
struct CacheStats {
  std::size_t hits = 0;
  std::size_t misses = 0;
};

FeatureTable extract_feature_table(const Dataset& data, std::span<const std::string> keys,
                                   double bin_width, int threads,
                                   const std::optional<std::filesystem::path>& cache_dir = {},
                                   CacheStats* stats = nullptr);

/// Stacked local maps per sample, channel order (key, radius) with radius
/// fastest. Values are rounded to float32 so cached and fresh maps agree.
std::vector<LocalFeatureMap> extract_local_maps(
    const Dataset& data, std::span<const TextureKey> keys, std::span<const int> radii,
    double bin_width, int threads, const std::optional<std::filesystem::path>& cache_dir = {},
    CacheStats* stats = nullptr);

ToySample make_toy_sample(const Sample& sample, const LocalFeatureMap& local,
                          std::span<const double> radiomics);

std::vector<ToySample> make_toy_samples(const Dataset& data, std::span<const LocalFeatureMap> local,
                                        const FeatureTable& radiomics);

struct Prediction {
  int fold = 0;
  std::string id;
  int label = 0;
  double score = 0.0;
};

void write_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

/// Per-fold binary metrics of stored predictions.
MetricReport report_from_predictions(std::span<const Prediction> predictions);

struct ExperimentResult {
  MetricReport report;
  std::vector<Prediction> predictions;
  CacheStats cache;
  std::filesystem::path report_path;
};

/// Extraction (cached), fold plan, per-fold fit and test evaluation. Writes
/// report.json, predictions.csv, selected_features.json (LASSO) or
/// train_log_fold<k>.csv and model_fold<k>.json (toy) under config.out.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// One toy-ridl experiment per w_corr value. Reports go to
/// <out>/report_<ii>_wcorr_<value>.json, artifacts to <out>/wcorr_<ii>/.
std::vector<std::filesystem::path> run_sweep(const ExperimentConfig& config);

}  // namespace radfuse
