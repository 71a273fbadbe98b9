#include "radfuse/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>

#include "radfuse/error.hpp"
#include "radfuse/parallel.hpp"
#include "radfuse/quantize.hpp"
#include "radfuse/selection.hpp"

namespace radfuse {

namespace fs = std::filesystem;

Pipeline parse_pipeline(std::string_view name) {
  if (name == "radiomics-lasso") return Pipeline::RadiomicsLasso;
  if (name == "toy-ridl") return Pipeline::ToyRidl;
  if (name == "toy-baseline-concat") return Pipeline::ToyBaselineConcat;
  fail(ErrorKind::InvalidArgument, "unknown pipeline '" + std::string(name) +
                                       "' (expected radiomics-lasso, toy-ridl or toy-baseline-concat)");
}

std::string_view pipeline_name(Pipeline pipeline) {
  switch (pipeline) {
    case Pipeline::RadiomicsLasso: return "radiomics-lasso";
    case Pipeline::ToyRidl: return "toy-ridl";
    case Pipeline::ToyBaselineConcat: return "toy-baseline-concat";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Config

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> k{
      "pipeline", "manifest", "phantoms", "phantom_dims", "phantom_seed", "out", "cache_dir",
      "threads", "n_folds", "stratified", "fold_seed", "seed", "bin_width", "feature_keys",
      "radiomic_keys", "local_keys", "radii", "lambda_count", "lambda_ratio", "w_corr_grid",
      // toy
      "epochs", "lr", "w_corr", "N_k", "w", "warm_up", "reduction", "C", "hidden", "attention",
      "use_local", "toy_seed"};
  return k;
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

std::vector<std::string> canonical_keys(std::vector<std::string> keys) {
  for (auto& k : keys) k = canonical_key(k);
  return keys;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_kv(const KeyValues& kv, const fs::path& base_dir) {
  for (const auto& [key, value] : kv.values().items())
    require(known_keys().contains(key), ErrorKind::Format,
            kv.source() + ": unknown config key '" + key + "'");
  ExperimentConfig c;
  if (kv.has("pipeline")) c.pipeline = parse_pipeline(kv.get<std::string>("pipeline"));
  if (kv.has("manifest")) c.manifest = resolve(kv.get<std::string>("manifest"), base_dir);
  c.phantoms = kv.get_or<std::size_t>("phantoms", c.phantoms);
  if (kv.has("phantom_dims")) {
    const auto d = kv.get<std::vector<std::int64_t>>("phantom_dims");
    require(d.size() == 3, ErrorKind::Format, kv.source() + ": phantom_dims needs 3 values");
    c.phantom_dims = {d[0], d[1], d[2]};
  }
  c.phantom_seed = kv.get_or<std::uint64_t>("phantom_seed", c.phantom_seed);
  if (kv.has("out")) c.out = resolve(kv.get<std::string>("out"), base_dir);
  if (kv.has("cache_dir")) c.cache_dir = resolve(kv.get<std::string>("cache_dir"), base_dir);
  c.threads = kv.get_or("threads", c.threads);
  c.n_folds = kv.get_or("n_folds", c.n_folds);
  c.stratified = kv.get_or("stratified", c.stratified);
  c.fold_seed = kv.get_or<std::uint64_t>("fold_seed", c.fold_seed);
  c.bin_width = kv.get_or("bin_width", c.bin_width);
  if (kv.has("feature_keys")) c.feature_keys = canonical_keys(kv.get<std::vector<std::string>>("feature_keys"));
  if (kv.has("radiomic_keys"))
    c.radiomic_keys = canonical_keys(kv.get<std::vector<std::string>>("radiomic_keys"));
  if (kv.has("local_keys")) {
    c.local_keys.clear();
    for (const auto& name : kv.get<std::vector<std::string>>("local_keys")) {
      const auto key = parse_texture_key(name);
      require(key.has_value(), ErrorKind::Format, kv.source() + ": '" + name + "' is not a texture key");
      c.local_keys.push_back(*key);
    }
  }
  if (kv.has("radii")) c.radii = kv.get<std::vector<int>>("radii");
  c.lambda_count = kv.get_or("lambda_count", c.lambda_count);
  c.lambda_ratio = kv.get_or("lambda_ratio", c.lambda_ratio);
  if (kv.has("w_corr_grid")) c.w_corr_grid = kv.get<std::vector<double>>("w_corr_grid");
  c.toy = ToyConfig::from_kv(kv);
  if (kv.has("toy_seed")) c.toy.seed = kv.get<std::uint64_t>("toy_seed");
  // `seed` drives every stochastic part not given its own seed.
  if (kv.has("seed")) {
    const auto seed = kv.get<std::uint64_t>("seed");
    if (!kv.has("phantom_seed")) c.phantom_seed = seed;
    if (!kv.has("fold_seed")) c.fold_seed = seed;
    if (!kv.has("toy_seed")) c.toy.seed = seed;
  }

  require(c.threads >= 1, ErrorKind::InvalidArgument, "threads must be >= 1");
  require(c.n_folds >= 3, ErrorKind::InvalidArgument, "n_folds must be >= 3");
  require(c.bin_width > 0, ErrorKind::InvalidArgument, "bin_width must be positive");
  require(!c.feature_keys.empty() && !c.radiomic_keys.empty(), ErrorKind::InvalidArgument,
          "feature key lists must not be empty");
  for (int r : c.radii) require(r >= 1, ErrorKind::InvalidArgument, "radii must be >= 1");
  require(c.lambda_count >= 1 && c.lambda_ratio > 0 && c.lambda_ratio < 1,
          ErrorKind::InvalidArgument, "invalid lambda grid");
  require(!c.w_corr_grid.empty(), ErrorKind::InvalidArgument, "w_corr_grid must not be empty");
  for (double w : c.w_corr_grid) require(w >= 0, ErrorKind::InvalidArgument, "w_corr must be >= 0");
  return c;
}

ExperimentConfig ExperimentConfig::read(const fs::path& path) {
  return from_kv(KeyValues::read(path), path.parent_path());
}

KeyValues ExperimentConfig::to_kv() const {
  KeyValues kv;
  kv.set("pipeline", std::string(pipeline_name(pipeline)));
  if (manifest) kv.set("manifest", manifest->string());
  kv.set("phantoms", phantoms);
  kv.set("phantom_dims", std::vector<std::int64_t>{phantom_dims.depth, phantom_dims.height,
                                                   phantom_dims.width});
  kv.set("phantom_seed", phantom_seed);
  kv.set("out", out.string());
  if (cache_dir) kv.set("cache_dir", cache_dir->string());
  kv.set("threads", threads);
  kv.set("n_folds", n_folds);
  kv.set("stratified", stratified);
  kv.set("fold_seed", fold_seed);
  kv.set("bin_width", bin_width);
  kv.set("feature_keys", feature_keys);
  kv.set("radiomic_keys", radiomic_keys);
  std::vector<std::string> lk;
  for (auto k : local_keys) lk.emplace_back(texture_key_name(k));
  kv.set("local_keys", lk);
  kv.set("radii", radii);
  kv.set("lambda_count", lambda_count);
  kv.set("lambda_ratio", lambda_ratio);
  kv.set("w_corr_grid", w_corr_grid);
  toy.to_kv(kv);
  kv.set("toy_seed", toy.seed);
  return kv;
}

// ---------------------------------------------------------------------------
// Data

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

namespace {

std::uint64_t phantom_seed_for(std::uint64_t seed, std::size_t i) {
  return seed * 1000003ULL + i;
}

std::string phantom_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "phantom_%04zu", i);
  return buf;
}

Dims common_dims(std::span<const Sample> samples) {
  Dims d{0, 0, 0};
  for (const auto& s : samples) {
    d.depth = std::max(d.depth, s.volume.dims().depth);
    d.height = std::max(d.height, s.volume.dims().height);
    d.width = std::max(d.width, s.volume.dims().width);
  }
  return d;
}

}  // namespace

std::vector<Sample> phantom_samples(std::size_t count, Dims dims, std::uint64_t seed, int threads) {
  require(count >= 4, ErrorKind::InvalidArgument, "need at least 4 phantoms");
  std::vector<Sample> out(count);
  parallel_for(count, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = synth_phantom(static_cast<int>(i % 2), phantom_seed_for(seed, i), dims);
      out[i].id = phantom_id(i);
    }
  });
  return out;
}

fs::path write_phantom_dataset(const fs::path& dir, std::size_t count, Dims dims, std::uint64_t seed,
                               int threads) {
  fs::create_directories(dir);
  const auto samples = phantom_samples(count, dims, seed, threads);
  std::vector<ManifestRecord> records;
  for (const auto& s : samples) {
    save_volume(dir / s.id, s.volume);
    save_mask(dir / (s.id + "_mask"), s.mask, s.volume.spacing());
    records.push_back({s.id, s.id + ".vol", s.id + "_mask.vol", s.label});
  }
  const auto manifest = dir / "manifest.jsonl";
  write_manifest(manifest, records);
  return manifest;
}

Dataset load_dataset(const ExperimentConfig& config) {
  Dataset d;
  if (config.manifest) {
    const auto records = read_manifest(*config.manifest);
    require(!records.empty(), ErrorKind::Data, config.manifest->string() + " lists no samples");
    d.samples.resize(records.size());
    parallel_for(records.size(), config.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) d.samples[i] = load_sample(records[i]);
    });
  } else {
    d.samples = phantom_samples(config.phantoms, config.phantom_dims, config.phantom_seed, config.threads);
  }
  for (const auto& s : d.samples)
    require(!s.mask.empty(), ErrorKind::Data, "sample " + s.id + " has an empty ROI");
  d.dims = common_dims(d.samples);
  for (auto& s : d.samples)
    if (!(s.volume.dims() == d.dims)) s = pad_to_shape(s, d.dims);
  return d;
}

// ---------------------------------------------------------------------------
// Caching

std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (auto b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

template <typename T>
std::uint64_t hash_values(std::span<const T> values, std::uint64_t h) {
  return fnv1a(std::as_bytes(values), h);
}

std::uint64_t hash_text(std::string_view text, std::uint64_t h) {
  return fnv1a(std::as_bytes(std::span(text.data(), text.size())), h);
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void log_cache(CacheStats* stats, bool hit, const fs::path& path) {
  std::clog << "[cache] " << (hit ? "hit " : "miss ") << path.string() << '\n';
  if (stats) ++(hit ? stats->hits : stats->misses);
}

std::string params_text(double bin_width, std::string_view what) {
  std::ostringstream s;
  s.precision(17);
  s << what << ";bin_width=" << bin_width;
  return s.str();
}

}  // namespace

std::uint64_t content_hash(const Sample& s) {
  std::uint64_t h = hash_text(s.id, 0xcbf29ce484222325ULL);
  const std::int64_t dims[3] = {s.volume.dims().depth, s.volume.dims().height, s.volume.dims().width};
  const double spacing[3] = {s.volume.spacing().z, s.volume.spacing().y, s.volume.spacing().x};
  h = hash_values(std::span<const std::int64_t>(dims), h);
  h = hash_values(std::span<const double>(spacing), h);
  h = hash_values(s.volume.voxels(), h);
  h = hash_values(s.mask.voxels(), h);
  const int label = s.label;
  return hash_values(std::span<const int>(&label, 1), h);
}

FeatureTable extract_feature_table(const Dataset& data, std::span<const std::string> keys,
                                   double bin_width, int threads,
                                   const std::optional<fs::path>& cache_dir, CacheStats* stats) {
  std::vector<std::string> canon;
  for (const auto& k : keys) canon.push_back(canonical_key(k));

  fs::path cached;
  if (cache_dir) {
    std::uint64_t h = hash_text(params_text(bin_width, "global"), 0xcbf29ce484222325ULL);
    for (const auto& k : canon) h = hash_text(k + ",", h);
    for (const auto& s : data.samples) {
      const auto c = content_hash(s);
      h = hash_values(std::span<const std::uint64_t>(&c, 1), h);
    }
    cached = *cache_dir / ("features_" + hex(h) + ".csv");
    if (fs::exists(cached)) {
      auto table = FeatureTable::read_csv(cached);
      if (table.keys() == canon && table.size() == data.samples.size()) {
        log_cache(stats, true, cached);
        return table;
      }
    }
  }

  std::vector<FeatureVector> values(data.samples.size());
  ExtractOptions opts;
  opts.bin_width = bin_width;
  parallel_for(values.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) values[i] = extract_global(data.samples[i], canon, opts);
  });
  FeatureTable table(canon);
  for (std::size_t i = 0; i < values.size(); ++i)
    table.add(data.samples[i].id, values[i], data.samples[i].label);

  if (cache_dir) {
    fs::create_directories(*cache_dir);
    table.write_csv(cached);
    // The CSV holds 17 significant digits, so the reloaded table is exact.
    log_cache(stats, false, cached);
  }
  return table;
}

std::vector<LocalFeatureMap> extract_local_maps(const Dataset& data, std::span<const TextureKey> keys,
                                                std::span<const int> radii, double bin_width,
                                                int threads, const std::optional<fs::path>& cache_dir,
                                                CacheStats* stats) {
  require(!keys.empty() && !radii.empty(), ErrorKind::InvalidArgument,
          "local maps need at least one key and radius");
  std::string params = params_text(bin_width, "local");
  for (auto k : keys) params += ";" + std::string(texture_key_name(k));
  for (int r : radii) params += ";r" + std::to_string(r);
  const std::uint64_t ph = hash_text(params, 0xcbf29ce484222325ULL);

  std::vector<LocalFeatureMap> out(data.samples.size());
  std::vector<int> hit(data.samples.size(), 0);
  std::vector<fs::path> paths(data.samples.size());
  if (cache_dir) fs::create_directories(*cache_dir);

  parallel_for(out.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& s = data.samples[i];
      if (cache_dir) {
        const auto c = content_hash(s);
        paths[i] = *cache_dir / ("local_" + hex(hash_values(std::span<const std::uint64_t>(&c, 1), ph)));
        if (fs::exists(fs::path(paths[i]).concat(".vol"))) {
          auto map = load_local_map(paths[i]);
          if (map.dims == s.volume.dims() && map.channel_count() == keys.size() * radii.size()) {
            out[i] = std::move(map);
            hit[i] = 1;
            continue;
          }
        }
      }
      const auto q = discretize(s.volume, s.mask, bin_width);
      std::vector<LocalFeatureMap> maps;
      for (auto k : keys)
        for (int r : radii) maps.push_back(local_feature_map(q, s.mask, k, r));
      auto stack = stack_local_maps(maps);
      for (double& v : stack.values) v = static_cast<double>(static_cast<float>(v));
      if (cache_dir) save_local_map(paths[i], stack, s.volume.spacing());
      out[i] = std::move(stack);
    }
  });
  if (cache_dir) {
    std::size_t hits = 0;
    for (int h : hit) hits += static_cast<std::size_t>(h);
    std::clog << "[cache] local maps: " << hits << " hit, " << out.size() - hits << " miss in "
              << cache_dir->string() << '\n';
    if (stats) {
      stats->hits += hits;
      stats->misses += out.size() - hits;
    }
  }
  return out;
}

ToySample make_toy_sample(const Sample& sample, const LocalFeatureMap& local,
                          std::span<const double> radiomics) {
  require(local.dims == sample.volume.dims(), ErrorKind::InvalidArgument,
          "local map dims differ from the sample " + sample.id);
  ToySample t;
  t.id = sample.id;
  t.label = sample.label;
  t.voxels = sample.volume.dims().count();
  t.local = local.values;
  const auto norm = normalize_intensities(sample.volume);
  t.input.assign(norm.voxels().begin(), norm.voxels().end());
  for (auto m : sample.mask.voxels()) t.input.push_back(m ? 1.0 : 0.0);
  t.radiomics.assign(radiomics.begin(), radiomics.end());
  return t;
}

std::vector<ToySample> make_toy_samples(const Dataset& data, std::span<const LocalFeatureMap> local,
                                        const FeatureTable& radiomics) {
  require(local.size() == data.samples.size() && radiomics.size() == data.samples.size(),
          ErrorKind::InvalidArgument, "toy inputs have inconsistent sample counts");
  std::vector<ToySample> out;
  out.reserve(data.samples.size());
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    require(radiomics.rows()[i].id == data.samples[i].id, ErrorKind::Data,
            "radiomic table order differs from the dataset");
    out.push_back(make_toy_sample(data.samples[i], local[i], radiomics.rows()[i].values));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Predictions

void write_predictions(const fs::path& path, std::span<const Prediction> predictions) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << "fold,id,label,score\n";
  char buf[64];
  for (const auto& p : predictions) {
    const auto r = std::to_chars(buf, buf + sizeof buf, p.score);
    out << p.fold << ',' << p.id << ',' << p.label << ',' << std::string_view(buf, r.ptr - buf) << '\n';
  }
}

std::vector<Prediction> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  require(line == "fold,id,label,score", ErrorKind::Format, path.string() + ": unexpected header");
  std::vector<Prediction> out;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(n);
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    require(cells.size() == 4, ErrorKind::Format, where + ": expected 4 fields");
    Prediction p;
    p.id = cells[1];
    auto parse = [&](const std::string& s, auto& v) {
      const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      require(r.ec == std::errc() && r.ptr == s.data() + s.size(), ErrorKind::Format,
              where + ": bad number '" + s + "'");
    };
    parse(cells[0], p.fold);
    parse(cells[2], p.label);
    parse(cells[3], p.score);
    require(p.label == 0 || p.label == 1, ErrorKind::Format, where + ": label must be 0 or 1");
    require(p.fold >= 0, ErrorKind::Format, where + ": negative fold");
    out.push_back(std::move(p));
  }
  require(!out.empty(), ErrorKind::Data, path.string() + " holds no predictions");
  return out;
}

MetricReport report_from_predictions(std::span<const Prediction> predictions) {
  int folds = 0;
  for (const auto& p : predictions) folds = std::max(folds, p.fold + 1);
  std::vector<BinaryMetrics> per_fold;
  for (int f = 0; f < folds; ++f) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& p : predictions)
      if (p.fold == f) {
        scores.push_back(p.score);
        labels.push_back(p.label);
      }
    require(!scores.empty(), ErrorKind::Data, "fold " + std::to_string(f) + " has no predictions");
    per_fold.push_back(binary_metrics(scores, labels));
  }
  return MetricReport::from_folds(per_fold);
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

struct FoldOutcome {
  std::vector<Prediction> predictions;
  nlohmann::ordered_json info;
  std::vector<std::string> selected;
};

FoldOutcome lasso_fold(const ExperimentConfig& config, const FeatureTable& table, const Fold& fold,
                       int k) {
  // Fit on train + validation; the validation rows pick lambda.
  std::vector<std::size_t> rows = fold.train;
  rows.insert(rows.end(), fold.validation.begin(), fold.validation.end());
  const auto sub = table.subset(rows);
  std::vector<std::size_t> tr(fold.train.size()), va(fold.validation.size());
  for (std::size_t i = 0; i < tr.size(); ++i) tr[i] = i;
  for (std::size_t i = 0; i < va.size(); ++i) va[i] = tr.size() + i;
  const auto plan = holdout_plan(rows.size(), tr, va);
  const auto grid = lambda_grid(sub, config.lambda_count, config.lambda_ratio);
  const auto sel = select_lambda_cv(sub, plan, grid);

  FoldOutcome out;
  const auto test = table.subset(fold.test);
  const auto scores = predict_proba(sel.model, test);
  for (std::size_t i = 0; i < fold.test.size(); ++i)
    out.predictions.push_back({k, test.rows()[i].id, test.rows()[i].label, scores[i]});
  out.selected = sel.selected;
  out.info["lambda"] = sel.lambda;
  out.info["validation_auc"] =
      *std::max_element(sel.mean_validation_auc.begin(), sel.mean_validation_auc.end());
  save_model(config.out / ("model_fold" + std::to_string(k) + ".json"), sel.model);
  return out;
}

FoldOutcome toy_fold(const ExperimentConfig& config, std::span<const ToySample> samples,
                     const Fold& fold, int k) {
  ToyConfig tc = config.toy;
  if (config.pipeline == Pipeline::ToyBaselineConcat) {
    tc.use_local = false;
    tc.attention = false;
    tc.w_corr = 0.0;
  }
  tc.seed = config.toy.seed * 7919ULL + static_cast<std::uint64_t>(k);
  std::vector<ToySample> train;
  for (auto i : fold.train) train.push_back(samples[i]);
  const auto result = toy_train(tc, train);

  FoldOutcome out;
  for (auto i : fold.test)
    out.predictions.push_back({k, samples[i].id, samples[i].label, toy_predict(result.model, samples[i])});

  std::vector<double> vs;
  std::vector<int> vl;
  for (auto i : fold.validation) {
    vs.push_back(toy_predict(result.model, samples[i]));
    vl.push_back(samples[i].label);
  }
  const bool both = std::count(vl.begin(), vl.end(), 1) > 0 && std::count(vl.begin(), vl.end(), 0) > 0;
  if (both) out.info["validation_auc"] = roc_auc(vs, vl);
  out.info["final_max_abs_s"] = result.log.empty() ? 0.0 : result.log.back().max_s;
  out.info["train_deep_radiomic_max_abs_corr"] = max_abs(deep_radiomic_correlation(result.model, train));
  write_train_log(config.out / ("train_log_fold" + std::to_string(k) + ".csv"), result.log);
  save_toy_model(config.out / ("model_fold" + std::to_string(k) + ".json"), result.model);
  return out;
}

std::vector<std::string> sorted_set(const std::set<std::string>& s) { return {s.begin(), s.end()}; }

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  fs::create_directories(config.out);
  config.to_kv().write(config.out / "config.resolved.kv");

  ExperimentResult result;
  const auto data = load_dataset(config);
  const auto labels = data.labels();
  const auto plan = rolling_folds(data.samples.size(), config.n_folds, config.fold_seed,
                                  config.stratified ? std::optional<std::span<const int>>(labels)
                                                    : std::nullopt);
  const auto cache = std::optional<fs::path>(config.cache());

  std::vector<FoldOutcome> outcomes(plan.folds.size());
  // Fold-level parallelism; each fold runs sequentially inside.
  const bool lasso = config.pipeline == Pipeline::RadiomicsLasso;
  if (lasso) {
    const auto table =
        extract_feature_table(data, config.feature_keys, config.bin_width, config.threads, cache, &result.cache);
    parallel_for(outcomes.size(), config.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t k = begin; k < end; ++k)
        outcomes[k] = lasso_fold(config, table, plan.folds[k], static_cast<int>(k));
    });
  } else {
    const auto table = extract_feature_table(data, config.radiomic_keys, config.bin_width,
                                             config.threads, cache, &result.cache);
    const auto local = extract_local_maps(data, config.local_keys, config.radii, config.bin_width,
                                          config.threads, cache, &result.cache);
    const auto samples = make_toy_samples(data, local, table);
    parallel_for(outcomes.size(), config.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t k = begin; k < end; ++k)
        outcomes[k] = toy_fold(config, samples, plan.folds[k], static_cast<int>(k));
    });
  }

  nlohmann::ordered_json extra;
  extra["pipeline"] = pipeline_name(config.pipeline);
  extra["samples"] = data.samples.size();
  extra["n_folds"] = config.n_folds;
  if (!lasso) extra["w_corr"] = config.pipeline == Pipeline::ToyRidl ? config.toy.w_corr : 0.0;
  auto& per_fold = extra["fold_details"] = nlohmann::ordered_json::array();
  for (auto& o : outcomes) {
    per_fold.push_back(o.info);
    result.predictions.insert(result.predictions.end(), o.predictions.begin(), o.predictions.end());
  }

  if (lasso) {
    nlohmann::ordered_json sel;
    auto& folds = sel["folds"] = nlohmann::ordered_json::array();
    std::set<std::string> all, common;
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
      folds.push_back({{"fold", k}, {"lambda", outcomes[k].info["lambda"]}, {"selected", outcomes[k].selected}});
      std::set<std::string> s(outcomes[k].selected.begin(), outcomes[k].selected.end());
      all.insert(s.begin(), s.end());
      if (k == 0) {
        common = s;
      } else {
        std::set<std::string> keep;
        std::set_intersection(common.begin(), common.end(), s.begin(), s.end(),
                              std::inserter(keep, keep.begin()));
        common = std::move(keep);
      }
    }
    sel["intersection"] = sorted_set(common);
    sel["union"] = sorted_set(all);
    std::ofstream(config.out / "selected_features.json") << sel.dump(2) << '\n';
  }

  write_predictions(config.out / "predictions.csv", result.predictions);
  result.report = report_from_predictions(result.predictions);
  result.report_path = config.out / "report.json";
  write_report(result.report_path, result.report, extra);
  std::clog << "[run] " << pipeline_name(config.pipeline) << ": AUC " << result.report.auc.mean
            << " +/- " << result.report.auc.std << " -> " << result.report_path.string() << '\n';
  return result;
}

std::vector<fs::path> run_sweep(const ExperimentConfig& config) {
  fs::create_directories(config.out);
  std::vector<fs::path> reports;
  for (std::size_t i = 0; i < config.w_corr_grid.size(); ++i) {
    ExperimentConfig c = config;
    c.pipeline = Pipeline::ToyRidl;
    c.toy.w_corr = config.w_corr_grid[i];
    char tag[64];
    std::snprintf(tag, sizeof tag, "%02zu", i);
    c.out = config.out / ("wcorr_" + std::string(tag));
    c.cache_dir = config.cache();
    const auto r = run_experiment(c);

    std::ostringstream value;
    value << config.w_corr_grid[i];
    const auto target = config.out / ("report_" + std::string(tag) + "_wcorr_" + value.str() + ".json");
    fs::copy_file(r.report_path, target, fs::copy_options::overwrite_existing);
    reports.push_back(target);
  }
  return reports;
}

}  // namespace radfuse
