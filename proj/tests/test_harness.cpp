#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "radfuse/error.hpp"
#include "radfuse/experiment.hpp"
#include "radfuse/folds.hpp"
#include "radfuse/metrics.hpp"
#include "radfuse/random.hpp"

using namespace radfuse;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "radfuse_test_harness" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

// ---------------------------------------------------------------------------
// Metrics

TEST_CASE("metric identities") {
  const std::vector<double> sep{0.9, 0.8, 0.2, 0.1};
  const std::vector<int> sep_labels{1, 1, 0, 0};
  CHECK(roc_auc(sep, sep_labels) == 1.0);
  CHECK(average_precision(sep, sep_labels) == 1.0);

  const std::vector<double> s{0.9, 0.8, 0.3, 0.2};
  const std::vector<int> y{1, 0, 1, 0};
  CHECK(roc_auc(s, y) == 0.75);
  CHECK(std::abs(average_precision(s, y) - 5.0 / 6.0) < 1e-9);

  const std::vector<double> flat{0.4, 0.4, 0.4, 0.4};
  CHECK(roc_auc(flat, y) == 0.5);
  CHECK(average_precision(flat, y) == 0.5);

  const auto m = binary_metrics(s, y);
  CHECK(m.accuracy == 0.5);
  CHECK(m.f1 == doctest::Approx(0.5));
}

TEST_CASE("AUC is invariant under increasing transforms and flips under negation") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const std::size_t n = 5 + rng.below(40);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = rng.normal();
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 0;
    y[1] = 1;
    const double auc = roc_auc(s, y);
    std::vector<double> t(n), neg(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = std::exp(3.0 * s[i]) + 7.0;
      neg[i] = -s[i];
    }
    CHECK(roc_auc(t, y) == auc);
    CHECK(auc + roc_auc(neg, y) == doctest::Approx(1.0).epsilon(1e-12));
    const auto m = binary_metrics(s, y, 0.0);
    CHECK(m.f1 >= 0.0);
    CHECK(m.f1 <= 1.0);
    CHECK(m.ap > 0.0);
  }
}

TEST_CASE("F1 and accuracy at the threshold") {
  const std::vector<double> s{0.7, 0.2, 0.6, 0.1};
  const std::vector<int> y{1, 0, 1, 0};
  const auto m = binary_metrics(s, y);
  CHECK(m.f1 == 1.0);
  CHECK(m.accuracy == 1.0);
  const std::vector<double> wrong{0.7, 0.6, 0.2, 0.1};
  const auto w = binary_metrics(wrong, y);
  CHECK(w.f1 < 1.0);
  CHECK(w.accuracy + 0.5 == 1.0);
}

TEST_CASE("metric input errors") {
  const std::vector<double> s{0.1, 0.2};
  const std::vector<int> ones{1, 1};
  CHECK_THROWS_AS(roc_auc(s, ones), Error);
  const std::vector<int> zeros{0, 0};
  CHECK_THROWS_AS(average_precision(s, zeros), Error);
  const std::vector<int> bad{0, 2};
  CHECK_THROWS_AS(roc_auc(s, bad), Error);
  const std::vector<int> shorter{1};
  CHECK_THROWS_AS(roc_auc(s, shorter), Error);
}

TEST_CASE("report summaries and JSON round trip") {
  std::vector<BinaryMetrics> folds{{0.8, 0.7, 0.6, 0.5}, {1.0, 0.9, 0.8, 0.7}, {0.9, 0.8, 0.7, 0.6}};
  const auto r = MetricReport::from_folds(folds);
  CHECK(r.auc.mean == doctest::Approx(0.9));
  CHECK(r.auc.std == doctest::Approx(0.1));
  CHECK(r.auc.mean >= 0.8);
  CHECK(r.auc.mean <= 1.0);
  const auto dir = scratch("report");
  write_report(dir / "r.json", r, {{"note", "x"}});
  const auto back = read_report(dir / "r.json");
  CHECK(back.auc.folds == r.auc.folds);
  CHECK(back.accuracy.mean == r.accuracy.mean);
  std::ofstream(dir / "bad.json") << R"({"auc": {"folds": [1.5], "mean": 1.5, "std": 0}})";
  CHECK_THROWS_AS(read_report(dir / "bad.json"), Error);
  CHECK(summarize({0.5}).std == 0.0);
}

// ---------------------------------------------------------------------------
// Folds

TEST_CASE("rolling folds partition and rotate") {
  const auto plan = rolling_folds(10, 5, 3);
  CHECK(plan.folds.size() == 5);
  std::vector<int> tested(10, 0);
  for (int k = 0; k < 5; ++k) {
    const auto& f = plan.folds[static_cast<std::size_t>(k)];
    CHECK(f.test.size() == 2);
    CHECK(f.test_subset == k);
    CHECK(f.validation_subset == (k + 1) % 5);
    CHECK(f.train_subsets.size() == 3);
    CHECK(f.train.size() == 6);
    for (auto i : f.test) ++tested[i];
    std::set<std::size_t> all(f.train.begin(), f.train.end());
    all.insert(f.validation.begin(), f.validation.end());
    all.insert(f.test.begin(), f.test.end());
    CHECK(all.size() == 10);
  }
  CHECK(plan.folds[4].validation_subset == 0);
  for (int t : tested) CHECK(t == 1);
  validate_plan(plan, 10);

  CHECK(rolling_folds(10, 5, 3).assignments == plan.assignments);
  CHECK(rolling_folds(10, 5, 4).assignments != plan.assignments);
  CHECK_THROWS_AS(rolling_folds(4, 5, 0), Error);
  CHECK_THROWS_AS(rolling_folds(10, 2, 0), Error);
}

TEST_CASE("stratified folds balance classes") {
  std::vector<int> labels(50);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i < 20 ? 1 : 0;
  const auto plan = rolling_folds(50, 5, 1, std::span<const int>(labels));
  for (const auto& f : plan.folds) {
    const auto pos = std::count_if(f.test.begin(), f.test.end(), [&](auto i) { return labels[i] == 1; });
    CHECK(pos == 4);
    CHECK(f.test.size() == 10);
  }
  for (std::size_t n = 5; n < 40; n += 7) validate_plan(rolling_folds(n, 5, n), n);
}

TEST_CASE("holdout plan") {
  const auto plan = holdout_plan(5, {0, 1, 2}, {3, 4});
  CHECK(plan.folds.size() == 1);
  CHECK(plan.folds[0].test.empty());
  CHECK_THROWS_AS(holdout_plan(5, {0, 1}, {1, 2}), Error);
}

// ---------------------------------------------------------------------------
// Experiment plumbing

TEST_CASE("config parsing") {
  const auto dir = scratch("config");
  std::ofstream(dir / "run.kv") << "pipeline = \"toy-ridl\"\nphantoms = 12\nphantom_dims = [16, 16, 16]\n"
                                   "seed = 9\nout = \"o\"\nradii = [1, 2]\nlocal_keys = [\"glcm_Idn\"]\n"
                                   "w_corr = 1.5\nepochs = 2\n";
  const auto c = ExperimentConfig::read(dir / "run.kv");
  CHECK(c.pipeline == Pipeline::ToyRidl);
  CHECK(c.phantoms == 12);
  CHECK(c.fold_seed == 9);
  CHECK(c.toy.seed == 9);
  CHECK(c.out == dir / "o");
  CHECK(c.radii == std::vector<int>{1, 2});
  CHECK(c.toy.w_corr == 1.5);
  CHECK(c.cache() == dir / "o" / "cache");

  const auto again = ExperimentConfig::from_kv(c.to_kv());
  CHECK(again.toy.w_corr == c.toy.w_corr);
  CHECK(again.radii == c.radii);

  CHECK_THROWS_AS(ExperimentConfig::from_kv(KeyValues::parse("pipelin = \"x\"\n")), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_kv(KeyValues::parse("pipeline = \"deep\"\n")), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_kv(KeyValues::parse("n_folds = 2\n")), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_kv(KeyValues::parse("radii = [0]\n")), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_kv(KeyValues::parse("local_keys = [\"shape_x\"]\n")), Error);
}

TEST_CASE("content hash and predictions round trip") {
  const auto a = synth_phantom(0, 1, {16, 16, 16});
  auto b = a;
  CHECK(content_hash(a) == content_hash(b));
  b.volume.voxels()[5] += 1.0;
  CHECK(content_hash(a) != content_hash(b));
  const std::string text = "a";
  CHECK(fnv1a(std::as_bytes(std::span(text.data(), 1))) == 0xaf63dc4c8601ec8cULL);

  const auto dir = scratch("pred");
  std::vector<Prediction> p{{0, "x", 1, 0.25}, {0, "y", 0, 0.1}, {1, "z", 1, 0.3}, {1, "w", 0, 0.7}};
  write_predictions(dir / "p.csv", p);
  const auto back = read_predictions(dir / "p.csv");
  REQUIRE(back.size() == 4);
  CHECK(back[2].score == 0.3);
  const auto r = report_from_predictions(back);
  CHECK(r.auc.folds == std::vector<double>{1.0, 0.0});
  std::ofstream(dir / "bad.csv") << "fold,id,label,score\n0,x,3,0.5\n";
  CHECK_THROWS_AS(read_predictions(dir / "bad.csv"), Error);
}

TEST_CASE("padding to a common grid") {
  const auto dir = scratch("pad");
  std::vector<ManifestRecord> recs;
  for (int i = 0; i < 4; ++i) {
    const Dims d{16, 16 + i, 18};
    const auto s = synth_phantom(i % 2, 30 + i, d);
    save_volume(dir / ("v" + std::to_string(i)), s.volume);
    recs.push_back({"v" + std::to_string(i), dir / ("v" + std::to_string(i) + ".vol"), std::nullopt, i % 2});
  }
  write_manifest(dir / "m.jsonl", recs);
  ExperimentConfig c;
  c.manifest = dir / "m.jsonl";
  const auto data = load_dataset(c);
  CHECK(data.dims == Dims{16, 19, 18});
  for (const auto& s : data.samples) CHECK(s.volume.dims() == data.dims);
}

TEST_CASE("radiomics-lasso experiment with warm cache") {
  const auto dir = scratch("lasso");
  ExperimentConfig c;
  c.pipeline = Pipeline::RadiomicsLasso;
  c.phantoms = 40;
  c.phantom_dims = {16, 16, 16};
  c.stratified = true;
  c.out = dir / "run";
  c.threads = 2;
  const auto first = run_experiment(c);
  CHECK(first.cache.hits == 0);
  CHECK(first.report.auc.folds.size() == 5);
  CHECK(first.predictions.size() == 40);
  CHECK(fs::exists(c.out / "selected_features.json"));
  CHECK(fs::exists(c.out / "predictions.csv"));
  const auto report_text = slurp(first.report_path);

  const auto second = run_experiment(c);
  CHECK(second.cache.hits >= 1);
  CHECK(second.cache.misses == 0);
  CHECK(slurp(second.report_path) == report_text);

  ExperimentConfig serial = c;
  serial.threads = 1;
  serial.out = dir / "serial";
  serial.cache_dir = c.cache();
  CHECK(slurp(run_experiment(serial).report_path) == report_text);
}

TEST_CASE("toy experiments and sweep naming") {
  const auto dir = scratch("toy");
  ExperimentConfig c;
  c.pipeline = Pipeline::ToyRidl;
  c.phantoms = 20;
  c.phantom_dims = {16, 16, 16};
  c.radii = {1, 2};
  c.stratified = true;
  c.n_folds = 4;
  c.toy.epochs = 2;
  c.toy.lr = 0.05;
  c.out = dir / "ridl";
  const auto ridl = run_experiment(c);
  CHECK(ridl.report.auc.folds.size() == 4);
  for (int k = 0; k < 4; ++k) CHECK(fs::exists(c.out / ("train_log_fold" + std::to_string(k) + ".csv")));
  CHECK(ridl.cache.misses > 0);

  ExperimentConfig base = c;
  base.pipeline = Pipeline::ToyBaselineConcat;
  base.out = dir / "baseline";
  base.cache_dir = c.cache();
  const auto b = run_experiment(base);
  CHECK(b.cache.misses == 0);
  CHECK(b.report.auc.folds.size() == 4);

  ExperimentConfig sweep = c;
  sweep.out = dir / "sweep";
  sweep.cache_dir = c.cache();
  sweep.w_corr_grid = {0.0, 1.0, 2.0, 3.0};
  const auto reports = run_sweep(sweep);
  REQUIRE(reports.size() == 4);
  CHECK(reports[0].filename() == "report_00_wcorr_0.json");
  CHECK(reports[3].filename() == "report_03_wcorr_3.json");
  CHECK(std::is_sorted(reports.begin(), reports.end()));
  for (const auto& r : reports) CHECK(read_report(r).auc.folds.size() == 4);
}
