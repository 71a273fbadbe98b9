#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "radfuse/error.hpp"
#include "radfuse/experiment.hpp"
#include "radfuse/features.hpp"
#include "radfuse/folds.hpp"
#include "radfuse/localmap.hpp"
#include "radfuse/losses.hpp"
#include "radfuse/metrics.hpp"
#include "radfuse/selection.hpp"

namespace py = pybind11;
using namespace radfuse;

namespace {

using Array3 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Mask3 = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Dims dims_of(const py::array& a) {
  if (a.ndim() != 3) throw py::value_error("expected a 3-D array (z, y, x)");
  return {a.shape(0), a.shape(1), a.shape(2)};
}

Sample make_sample(const Array3& volume, const Mask3& mask, std::array<double, 3> spacing) {
  const Dims d = dims_of(volume);
  if (!(dims_of(mask) == d)) throw py::value_error("volume and mask shapes differ");
  Sample s;
  s.id = "array";
  const Spacing sp{spacing[0], spacing[1], spacing[2]};
  s.volume = CtVolume(d, sp, std::vector<double>(volume.data(), volume.data() + d.count()));
  std::vector<std::uint8_t> m(mask.data(), mask.data() + d.count());
  for (auto& v : m) v = v ? 1 : 0;
  s.mask = RoiMask(d, std::move(m));
  return s;
}

template <typename T>
py::array_t<T> to_array(const std::vector<T>& values, std::vector<py::ssize_t> shape) {
  py::array_t<T> out(shape);
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

py::dict metrics_dict(const BinaryMetrics& m) {
  py::dict d;
  d["auc"] = m.auc;
  d["map"] = m.ap;
  d["f1"] = m.f1;
  d["accuracy"] = m.accuracy;
  return d;
}

py::dict summary_dict(const MetricSummary& s) {
  py::dict d;
  d["folds"] = s.folds;
  d["mean"] = s.mean;
  d["std"] = s.std;
  return d;
}

}  // namespace

PYBIND11_MODULE(_radfuse, m) {
  m.doc() = "radfuse native module";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::Io: PyErr_SetString(PyExc_OSError, e.what()); return;
        case ErrorKind::Numeric: PyErr_SetString(PyExc_ArithmeticError, e.what()); return;
        default: PyErr_SetString(PyExc_ValueError, e.what()); return;
      }
    }
  });

  std::vector<std::string> texture_keys;
  for (auto k : kTextureKeys) texture_keys.emplace_back(texture_key_name(k));
  m.attr("TEXTURE_KEYS") = texture_keys;

  m.def("default_feature_keys", &default_feature_keys);

  m.def(
      "synth_phantom",
      [](int label, std::uint64_t seed, std::array<std::int64_t, 3> dims) {
        const auto s = synth_phantom(label, seed, {dims[0], dims[1], dims[2]});
        const std::vector<py::ssize_t> shape{dims[0], dims[1], dims[2]};
        py::dict d;
        d["volume"] = to_array(std::vector<double>(s.volume.voxels().begin(), s.volume.voxels().end()), shape);
        d["mask"] = to_array(std::vector<std::uint8_t>(s.mask.voxels().begin(), s.mask.voxels().end()), shape);
        d["label"] = s.label;
        return d;
      },
      py::arg("label"), py::arg("seed"), py::arg("dims") = std::array<std::int64_t, 3>{24, 24, 24},
      "Synthetic fat-shell phantom; returns volume (HU), mask and label.");

  m.def(
      "extract_global",
      [](const Array3& volume, const Mask3& mask, std::optional<std::vector<std::string>> keys,
         double bin_width, std::array<double, 3> spacing) {
        const auto s = make_sample(volume, mask, spacing);
        ExtractOptions opts;
        opts.bin_width = bin_width;
        const auto fv = extract_global(s, keys.value_or(default_feature_keys()), opts);
        py::dict d;
        for (const auto& [k, v] : fv.entries()) d[py::str(k)] = v;
        return d;
      },
      py::arg("volume"), py::arg("mask"), py::arg("keys") = py::none(),
      py::arg("bin_width") = kDefaultBinWidth, py::arg("spacing") = std::array<double, 3>{1, 1, 1});

  m.def(
      "local_feature_map",
      [](const Array3& volume, const Mask3& mask, const std::string& key, int radius, double bin_width,
         int workers) {
        const auto s = make_sample(volume, mask, {1, 1, 1});
        const auto tk = parse_texture_key(key);
        if (!tk) throw py::value_error("'" + key + "' is not a texture key");
        LocalMapOptions opts;
        opts.workers = workers;
        const auto q = discretize(s.volume, s.mask, bin_width);
        LocalFeatureMap map;
        {
          py::gil_scoped_release release;
          map = local_feature_map(q, s.mask, *tk, radius, opts);
        }
        const std::vector<py::ssize_t> shape{s.volume.dims().depth, s.volume.dims().height,
                                             s.volume.dims().width};
        return py::make_tuple(to_array(map.values, shape), to_array(map.validity, shape));
      },
      py::arg("volume"), py::arg("mask"), py::arg("key"), py::arg("radius"),
      py::arg("bin_width") = kDefaultBinWidth, py::arg("workers") = 1,
      "Per-voxel texture feature; returns (values, validity).");

  m.def("roc_auc", [](std::vector<double> s, std::vector<int> y) { return roc_auc(s, y); });
  m.def("average_precision", [](std::vector<double> s, std::vector<int> y) { return average_precision(s, y); });
  m.def(
      "binary_metrics",
      [](std::vector<double> s, std::vector<int> y, double threshold) {
        return metrics_dict(binary_metrics(s, y, threshold));
      },
      py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);

  m.def(
      "rolling_folds",
      [](std::size_t n, int n_folds, std::uint64_t seed, std::optional<std::vector<int>> labels) {
        const auto plan = labels ? rolling_folds(n, n_folds, seed, std::span<const int>(*labels))
                                 : rolling_folds(n, n_folds, seed);
        py::list out;
        for (const auto& f : plan.folds) {
          py::dict d;
          d["train"] = f.train;
          d["validation"] = f.validation;
          d["test"] = f.test;
          out.append(d);
        }
        return out;
      },
      py::arg("n"), py::arg("n_folds") = 5, py::arg("seed") = 0, py::arg("labels") = py::none());

  m.def(
      "fit_lasso",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x, std::vector<int> y,
         double lambda, std::optional<std::vector<std::string>> keys) {
        if (x.ndim() != 2) throw py::value_error("x must be 2-D (samples, features)");
        const auto n = static_cast<std::size_t>(x.shape(0)), p = static_cast<std::size_t>(x.shape(1));
        if (y.size() != n) throw py::value_error("y length differs from x rows");
        std::vector<std::string> names = keys.value_or(std::vector<std::string>{});
        if (names.empty())
          for (std::size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
        if (names.size() != p) throw py::value_error("key count differs from x columns");
        FeatureTable t(names);
        for (std::size_t i = 0; i < n; ++i)
          t.add(std::to_string(i), std::vector<double>(x.data() + i * p, x.data() + (i + 1) * p), y[i]);
        const auto fit = fit_lasso_logistic(t, lambda);
        py::dict coef;
        for (std::size_t j = 0; j < fit.model.keys.size(); ++j) coef[py::str(fit.model.keys[j])] = fit.model.coef[j];
        py::dict d;
        d["intercept"] = fit.model.intercept;
        d["coef"] = coef;
        d["selected"] = fit.model.selected();
        d["objective"] = fit.objective;
        d["converged"] = fit.converged;
        return d;
      },
      py::arg("x"), py::arg("y"), py::arg("lam"), py::arg("keys") = py::none(),
      "L1 logistic regression on z-scored columns; coefficients are on that scale.");

  m.def(
      "decorr_loss",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& z,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& r, double decay,
         bool standardize) {
        if (z.ndim() != 2 || r.ndim() != 2 || z.shape(0) != r.shape(0))
          throw py::value_error("z and r must be 2-D with equal row counts (newest row first)");
        BankConfig cfg;
        cfg.capacity = static_cast<std::size_t>(std::max<py::ssize_t>(z.shape(0), 1));
        cfg.decay = decay;
        cfg.standardize = standardize;
        FeatureBank bank(static_cast<std::size_t>(z.shape(1)), static_cast<std::size_t>(r.shape(1)), cfg);
        const auto dz = static_cast<std::size_t>(z.shape(1)), dr = static_cast<std::size_t>(r.shape(1));
        for (py::ssize_t i = z.shape(0); i-- > 0;)
          bank.push(std::vector<double>(z.data() + i * dz, z.data() + (i + 1) * dz),
                    std::vector<double>(r.data() + i * dr, r.data() + (i + 1) * dr));
        return decorr_loss(bank);
      },
      py::arg("z"), py::arg("r"), py::arg("decay") = 0.9, py::arg("standardize") = true);

  m.def("alpha_schedule", &alpha_schedule, py::arg("epoch"));
  m.def(
      "total_loss",
      [](double l_cls, double l_corr, double l_rec, double w_corr) {
        return total_loss(l_cls, l_corr, l_rec, {w_corr, 0.33});
      },
      py::arg("l_cls"), py::arg("l_corr"), py::arg("l_rec"), py::arg("w_corr") = 2.0);

  m.def(
      "run_experiment",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> out) {
        auto c = ExperimentConfig::read(config);
        if (out) c.out = *out;
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(c);
        }
        py::dict d;
        d["auc"] = summary_dict(r.report.auc);
        d["map"] = summary_dict(r.report.ap);
        d["f1"] = summary_dict(r.report.f1);
        d["accuracy"] = summary_dict(r.report.accuracy);
        d["report_path"] = r.report_path;
        d["cache_hits"] = r.cache.hits;
        return d;
      },
      py::arg("config"), py::arg("out") = py::none());
}
