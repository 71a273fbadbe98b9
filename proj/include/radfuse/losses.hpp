#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

namespace radfuse {

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct BankConfig {
  std::size_t capacity = 25;  // N_k
  double decay = 0.9;         // w
  std::size_t batch = 1;      // B, entries that receive gradient
  std::size_t warm_up = 0;    // pushes before the loss activates
  bool standardize = true;
  /// Dimensions whose weighted SD is at most this are treated as constant.
  double min_scale = 1e-8;
};

/// FIFO of (deep, radiomic) feature pairs. Entry 0 is the newest and
/// carries weight w^1.
class FeatureBank {
 public:
  struct Entry {
    std::vector<double> z, r;
  };

  FeatureBank(std::size_t dz, std::size_t dr, const BankConfig& config = {});

  void push(std::vector<double> z, std::vector<double> r);
  std::size_t size() const { return entries_.size(); }
  std::size_t dz() const { return dz_; }
  std::size_t dr() const { return dr_; }
  std::size_t pushes() const { return pushes_; }
  const BankConfig& config() const { return config_; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }
  /// Replaces the z vector of entry i (same dim).
  void set_z(std::size_t i, std::vector<double> z);

  /// Past warm-up with at least two entries.
  bool active() const { return pushes_ > config_.warm_up && entries_.size() >= 2; }

 private:
  std::size_t dz_, dr_;
  BankConfig config_;
  std::deque<Entry> entries_;
  std::size_t pushes_ = 0;
};

/// Weighted per-dimension statistics of a bank snapshot. Gradients treat
/// these as constants.
struct BankStats {
  std::vector<double> weight;  // w^(i+1) per entry
  double weight_sum = 0.0;
  std::vector<double> mean_z, scale_z, mean_r, scale_r;  // scale 0 marks a degenerate dim
};

BankStats bank_stats(const FeatureBank& bank);

/// S = sum_i w^i z~_i r~_i^T / sum_i w^i with the given statistics.
Matrix weighted_correlation(const FeatureBank& bank, const BankStats& stats);
Matrix weighted_correlation(const FeatureBank& bank);

double max_abs(const Matrix& m);

/// |S|_1, or 0 while the bank is inactive.
double decorr_loss(const FeatureBank& bank);
double decorr_loss(const FeatureBank& bank, const BankStats& stats);

/// d|S|_1 / d z for the newest `batch` entries (rows of the result, newest
/// first) with the statistics held fixed and sign(0) = 0. Zero while the bank
/// is inactive.
Matrix decorr_grad(const FeatureBank& bank);
Matrix decorr_grad(const FeatureBank& bank, const BankStats& stats);

inline constexpr double kProbabilityClamp = 1e-7;

double bce_loss(std::span<const double> predictions, std::span<const int> labels);

struct DecoderOutput {
  std::span<const double> ct;
  std::span<const double> mask;
};

/// L_D1 + alpha (L_D2 + L_D3 + L_D4), L_d = mean |c^ - c| + mean BCE(b^, b).
double recon_loss(std::span<const double> ct, std::span<const double> mask,
                  std::span<const DecoderOutput> decoders, double alpha);

/// 0.33 * 0.8^floor(epoch / 10).
double alpha_schedule(int epoch);

struct LossWeights {
  double w_corr = 2.0;
  double alpha = 0.33;
};

/// l_cls + w_corr * l_corr + l_rec.
double total_loss(double l_cls, double l_corr, double l_rec, const LossWeights& weights);

}  // namespace radfuse
