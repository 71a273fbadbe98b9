#include "radfuse/losses.hpp"

#include <algorithm>
#include <cmath>

#include "radfuse/error.hpp"

namespace radfuse {

FeatureBank::FeatureBank(std::size_t dz, std::size_t dr, const BankConfig& config)
    : dz_(dz), dr_(dr), config_(config) {
  require(dz > 0 && dr > 0, ErrorKind::InvalidArgument, "feature bank dims must be positive");
  require(config.capacity >= 1, ErrorKind::InvalidArgument, "feature bank capacity must be >= 1");
  require(config.decay > 0.0 && config.decay < 1.0, ErrorKind::InvalidArgument,
          "feature bank decay must be in (0, 1)");
  require(config.batch >= 1 && config.batch <= config.capacity, ErrorKind::InvalidArgument,
          "feature bank batch must be in [1, capacity]");
  require(config.min_scale >= 0.0, ErrorKind::InvalidArgument, "feature bank min_scale must be >= 0");
}

void FeatureBank::push(std::vector<double> z, std::vector<double> r) {
  require(z.size() == dz_, ErrorKind::InvalidArgument,
          "deep feature has dim " + std::to_string(z.size()) + ", bank expects " + std::to_string(dz_));
  require(r.size() == dr_, ErrorKind::InvalidArgument,
          "radiomic feature has dim " + std::to_string(r.size()) + ", bank expects " +
              std::to_string(dr_));
  entries_.push_front({std::move(z), std::move(r)});
  if (entries_.size() > config_.capacity) entries_.pop_back();
  ++pushes_;
}

void FeatureBank::set_z(std::size_t i, std::vector<double> z) {
  require(i < entries_.size() && z.size() == dz_, ErrorKind::InvalidArgument, "bad bank entry update");
  entries_[i].z = std::move(z);
}

namespace {

void weighted_moments(const FeatureBank& bank, const std::vector<double>& weight, double total,
                      bool deep, std::vector<double>& mean, std::vector<double>& scale) {
  const double floor = bank.config().min_scale;
  const std::size_t dim = deep ? bank.dz() : bank.dr();
  mean.assign(dim, 0.0);
  scale.assign(dim, 0.0);
  auto value = [&](std::size_t i, std::size_t a) {
    return deep ? bank.entry(i).z[a] : bank.entry(i).r[a];
  };
  for (std::size_t a = 0; a < dim; ++a) {
    double m = 0.0;
    for (std::size_t i = 0; i < bank.size(); ++i) m += weight[i] * value(i, a);
    m /= total;
    double v = 0.0;
    for (std::size_t i = 0; i < bank.size(); ++i) {
      const double c = value(i, a) - m;
      v += weight[i] * c * c;
    }
    mean[a] = m;
    const double sd = std::sqrt(v / total);
    scale[a] = sd > floor ? sd : 0.0;
  }
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

BankStats bank_stats(const FeatureBank& bank) {
  require(bank.size() >= 2, ErrorKind::Data, "feature bank needs at least two entries");
  BankStats s;
  const double w = bank.config().decay;
  double wi = 1.0;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    wi *= w;
    s.weight.push_back(wi);
    s.weight_sum += wi;
  }
  if (bank.config().standardize) {
    weighted_moments(bank, s.weight, s.weight_sum, true, s.mean_z, s.scale_z);
    weighted_moments(bank, s.weight, s.weight_sum, false, s.mean_r, s.scale_r);
  } else {
    s.mean_z.assign(bank.dz(), 0.0);
    s.scale_z.assign(bank.dz(), 1.0);
    s.mean_r.assign(bank.dr(), 0.0);
    s.scale_r.assign(bank.dr(), 1.0);
  }
  return s;
}

Matrix weighted_correlation(const FeatureBank& bank, const BankStats& stats) {
  require(stats.weight.size() == bank.size(), ErrorKind::InvalidArgument,
          "bank statistics do not match the bank");
  Matrix s(bank.dz(), bank.dr());
  std::vector<double> zt(bank.dz()), rt(bank.dr());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto& e = bank.entry(i);
    for (std::size_t a = 0; a < bank.dz(); ++a)
      zt[a] = stats.scale_z[a] > 0.0 ? (e.z[a] - stats.mean_z[a]) / stats.scale_z[a] : 0.0;
    for (std::size_t b = 0; b < bank.dr(); ++b)
      rt[b] = stats.scale_r[b] > 0.0 ? (e.r[b] - stats.mean_r[b]) / stats.scale_r[b] : 0.0;
    for (std::size_t a = 0; a < bank.dz(); ++a)
      for (std::size_t b = 0; b < bank.dr(); ++b) s(a, b) += stats.weight[i] * zt[a] * rt[b];
  }
  for (double& v : s.data) v /= stats.weight_sum;
  return s;
}

Matrix weighted_correlation(const FeatureBank& bank) {
  return weighted_correlation(bank, bank_stats(bank));
}

double max_abs(const Matrix& m) {
  double best = 0.0;
  for (double v : m.data) best = std::max(best, std::abs(v));
  return best;
}

double decorr_loss(const FeatureBank& bank, const BankStats& stats) {
  if (!bank.active()) return 0.0;
  double sum = 0.0;
  for (double v : weighted_correlation(bank, stats).data) sum += std::abs(v);
  return sum;
}

double decorr_loss(const FeatureBank& bank) {
  if (!bank.active()) return 0.0;
  return decorr_loss(bank, bank_stats(bank));
}

Matrix decorr_grad(const FeatureBank& bank, const BankStats& stats) {
  const std::size_t rows = std::min(bank.config().batch, bank.size());
  Matrix g(rows, bank.dz());
  if (!bank.active()) return g;
  const Matrix s = weighted_correlation(bank, stats);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& e = bank.entry(i);
    for (std::size_t a = 0; a < bank.dz(); ++a) {
      if (!(stats.scale_z[a] > 0.0)) continue;
      double acc = 0.0;
      for (std::size_t b = 0; b < bank.dr(); ++b) {
        if (!(stats.scale_r[b] > 0.0)) continue;
        acc += sign(s(a, b)) * (e.r[b] - stats.mean_r[b]) / stats.scale_r[b];
      }
      g(i, a) = acc * stats.weight[i] / (stats.weight_sum * stats.scale_z[a]);
    }
  }
  return g;
}

Matrix decorr_grad(const FeatureBank& bank) {
  if (!bank.active()) return Matrix(std::min(bank.config().batch, bank.size()), bank.dz());
  return decorr_grad(bank, bank_stats(bank));
}

namespace {

double clamp_probability(double p) {
  require(!std::isnan(p), ErrorKind::Numeric, "NaN probability");
  return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

double bce_term(double p, double y) {
  p = clamp_probability(p);
  return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

}  // namespace

double bce_loss(std::span<const double> predictions, std::span<const int> labels) {
  require(!predictions.empty(), ErrorKind::InvalidArgument, "empty batch");
  require(predictions.size() == labels.size(), ErrorKind::InvalidArgument,
          "predictions and labels differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    require(labels[i] == 0 || labels[i] == 1, ErrorKind::InvalidArgument, "labels must be 0 or 1");
    sum += bce_term(predictions[i], labels[i]);
  }
  return sum / static_cast<double>(predictions.size());
}

double recon_loss(std::span<const double> ct, std::span<const double> mask,
                  std::span<const DecoderOutput> decoders, double alpha) {
  require(decoders.size() == 4, ErrorKind::InvalidArgument, "reconstruction needs 4 decoder outputs");
  require(!ct.empty() && ct.size() == mask.size(), ErrorKind::InvalidArgument,
          "reconstruction target shapes differ");
  require(alpha >= 0.0, ErrorKind::InvalidArgument, "alpha must be >= 0");
  const auto n = static_cast<double>(ct.size());
  double total = 0.0;
  for (std::size_t d = 0; d < decoders.size(); ++d) {
    const auto& o = decoders[d];
    require(o.ct.size() == ct.size() && o.mask.size() == mask.size(), ErrorKind::InvalidArgument,
            "decoder output shape mismatch");
    double mae = 0.0, bce = 0.0;
    for (std::size_t i = 0; i < ct.size(); ++i) {
      mae += std::abs(o.ct[i] - ct[i]);
      bce += bce_term(o.mask[i], mask[i]);
    }
    const double l = mae / n + bce / n;
    total += d == 0 ? l : alpha * l;
  }
  return total;
}

double alpha_schedule(int epoch) {
  require(epoch >= 0, ErrorKind::InvalidArgument, "epoch must be >= 0");
  const int k = epoch / 10;
  // 0.33 * 0.8^k = 33 * 8^k / (100 * 10^k); for small k both integers are
  // exact in a double, so the quotient is correctly rounded.
  if (k <= 13) {
    double num = 33.0, den = 100.0;
    for (int i = 0; i < k; ++i) {
      num *= 8.0;
      den *= 10.0;
    }
    return num / den;
  }
  return 0.33 * std::pow(0.8, k);
}

double total_loss(double l_cls, double l_corr, double l_rec, const LossWeights& weights) {
  require(std::isfinite(l_cls) && std::isfinite(l_corr) && std::isfinite(l_rec), ErrorKind::Numeric,
          "loss components must be finite");
  require(weights.w_corr >= 0.0, ErrorKind::InvalidArgument, "w_corr must be >= 0");
  return l_cls + weights.w_corr * l_corr + l_rec;
}

}  // namespace radfuse
