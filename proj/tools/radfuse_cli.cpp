// Command line front end: phantom synthesis, extraction, selection,
// training, evaluation and w_corr sweeps.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include "radfuse/error.hpp"
#include "radfuse/experiment.hpp"
#include "radfuse/selection.hpp"

using namespace radfuse;
namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> threads;
};

ExperimentConfig load_config(const CommonFlags& f) {
  ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : ExperimentConfig::read(f.config);
  if (f.seed) {
    c.phantom_seed = *f.seed;
    c.fold_seed = *f.seed;
    c.toy.seed = *f.seed;
  }
  if (!f.out.empty()) c.out = f.out;
  if (f.threads) {
    require(*f.threads >= 1, ErrorKind::InvalidArgument, "--threads must be >= 1");
    c.threads = *f.threads;
  }
  return c;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return 2;
    case ErrorKind::Io: return 3;
    case ErrorKind::Format: return 4;
    case ErrorKind::Data: return 5;
    case ErrorKind::Numeric: return 6;
  }
  return 1;
}

void print_report(const MetricReport& r) {
  std::printf("auc %.4f +/- %.4f  map %.4f +/- %.4f  f1 %.4f +/- %.4f  acc %.4f +/- %.4f\n", r.auc.mean,
              r.auc.std, r.ap.mean, r.ap.std, r.f1.mean, r.f1.std, r.accuracy.mean, r.accuracy.std);
}

void cmd_synth(const ExperimentConfig& c) {
  const auto manifest = write_phantom_dataset(c.out, c.phantoms, c.phantom_dims, c.phantom_seed, c.threads);
  std::printf("%s\n", manifest.string().c_str());
}

void cmd_extract(const ExperimentConfig& c) {
  const auto data = load_dataset(c);
  const auto table = extract_feature_table(data, c.feature_keys, c.bin_width, c.threads, c.cache());
  fs::create_directories(c.out);
  const auto path = c.out / "features.csv";
  table.write_csv(path);
  std::printf("%s (%zu samples x %zu features)\n", path.string().c_str(), table.size(), table.width());
}

void cmd_extract_local(const ExperimentConfig& c) {
  const auto data = load_dataset(c);
  const auto maps = extract_local_maps(data, c.local_keys, c.radii, c.bin_width, c.threads, c.cache());
  const auto dir = c.out / "local";
  fs::create_directories(dir);
  for (std::size_t i = 0; i < maps.size(); ++i)
    save_local_map(dir / data.samples[i].id, maps[i], data.samples[i].volume.spacing());
  std::printf("%s (%zu stacks, %zu channels)\n", dir.string().c_str(), maps.size(),
              maps.empty() ? 0 : maps[0].channel_count());
}

void cmd_select(const ExperimentConfig& c, const std::string& table_path) {
  FeatureTable table;
  if (!table_path.empty()) {
    table = FeatureTable::read_csv(table_path);
  } else {
    table = extract_feature_table(load_dataset(c), c.feature_keys, c.bin_width, c.threads, c.cache());
  }
  const auto labels = table.labels();
  const auto plan = rolling_folds(table.size(), c.n_folds, c.fold_seed,
                                  c.stratified ? std::optional<std::span<const int>>(labels) : std::nullopt);
  const auto grid = lambda_grid(table, c.lambda_count, c.lambda_ratio);
  const auto sel = select_lambda_cv(table, plan, grid);
  const auto path = lasso_path(LassoProblem::from_table(table), grid);

  fs::create_directories(c.out);
  {
    std::ofstream out(c.out / "lasso_path.csv");
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write lasso_path.csv");
    out.precision(17);
    out << "lambda,mean_validation_auc,selected_count\n";
    for (std::size_t k = 0; k < grid.size(); ++k)
      out << grid[k] << ',' << sel.mean_validation_auc[k] << ',' << path[k].model.selected().size() << '\n';
  }
  nlohmann::ordered_json j;
  j["lambda"] = sel.lambda;
  j["selected"] = sel.selected;
  std::ofstream(c.out / "selected_features.json") << j.dump(2) << '\n';
  save_model(c.out / "model.json", sel.model);
  std::printf("lambda %.6g, %zu selected:", sel.lambda, sel.selected.size());
  for (const auto& k : sel.selected) std::printf(" %s", k.c_str());
  std::printf("\n");
}

void cmd_train(ExperimentConfig c, const std::string& pipeline) {
  if (!pipeline.empty()) c.pipeline = parse_pipeline(pipeline);
  const auto r = run_experiment(c);
  print_report(r.report);
  std::printf("%s\n", r.report_path.string().c_str());
}

void cmd_eval(const ExperimentConfig& c, const std::string& predictions) {
  const fs::path in = predictions.empty() ? c.out / "predictions.csv" : fs::path(predictions);
  const auto preds = read_predictions(in);
  const auto report = report_from_predictions(preds);
  fs::create_directories(c.out);
  const auto path = c.out / "eval_report.json";
  write_report(path, report, {{"predictions", in.string()}});
  print_report(report);
  std::printf("%s\n", path.string().c_str());
}

void cmd_sweep(ExperimentConfig c, const std::vector<double>& grid) {
  if (!grid.empty()) c.w_corr_grid = grid;
  for (const auto& p : run_sweep(c)) {
    const auto r = read_report(p);
    std::printf("%s  auc %.4f +/- %.4f\n", p.filename().string().c_str(), r.auc.mean, r.auc.std);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radfuse: radiomics texture engine and training kit"};
  app.require_subcommand(1);
  CommonFlags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "seed for phantoms, folds and training");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--threads", flags.threads, "worker threads");
  };

  auto* synth = app.add_subcommand("synth", "generate a phantom dataset and manifest");
  auto* extract = app.add_subcommand("extract", "global feature table");
  auto* extract_local = app.add_subcommand("extract-local", "local texture map stacks");
  auto* select = app.add_subcommand("select", "LASSO path and selected features");
  auto* train = app.add_subcommand("train", "cross-validated training run");
  auto* eval = app.add_subcommand("eval", "metrics from stored predictions");
  auto* sweep = app.add_subcommand("sweep", "toy-ridl runs over a w_corr grid");
  for (auto* s : {synth, extract, extract_local, select, train, eval, sweep}) add_common(s);

  std::string table, pipeline, predictions;
  std::vector<double> grid;
  select->add_option("--table", table, "feature table CSV (default: extract from the dataset)");
  train->add_option("--pipeline", pipeline, "radiomics-lasso | toy-ridl | toy-baseline-concat");
  eval->add_option("--predictions", predictions, "predictions CSV (default: <out>/predictions.csv)");
  sweep->add_option("--grid", grid, "w_corr values (default: config w_corr_grid)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "error [usage]: %s\nRun with --help for usage.\n", e.what());
    return 2;
  }

  try {
    const auto c = load_config(flags);
    if (synth->parsed()) cmd_synth(c);
    else if (extract->parsed()) cmd_extract(c);
    else if (extract_local->parsed()) cmd_extract_local(c);
    else if (select->parsed()) cmd_select(c, table);
    else if (train->parsed()) cmd_train(c, pipeline);
    else if (eval->parsed()) cmd_eval(c, predictions);
    else if (sweep->parsed()) cmd_sweep(c, grid);
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(to_string(e.kind())).c_str(), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error [internal]: %s\n", e.what());
    return 1;
  }
  return 0;
}
