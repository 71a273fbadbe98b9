#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "radfuse/kv.hpp"
#include "radfuse/losses.hpp"

namespace radfuse {

struct ToyConfig {
  int epochs = 30;
  double lr = 1e-2;
  double w_corr = 2.0;
  std::size_t bank_capacity = 25;
  double decay = 0.9;
  long warm_up = -1;  // pushes before L_corr starts; -1 means one epoch
  int reduction = 2;
  int deep_channels = 4;
  int hidden = 8;
  bool attention = true;
  bool use_local = true;
  std::uint64_t seed = 0;

  static ToyConfig from_kv(const KeyValues& kv);
  void to_kv(KeyValues& kv) const;
};

/// One training example with precomputed inputs, all on a common grid.
struct ToySample {
  std::string id;
  std::size_t voxels = 0;
  std::vector<double> local;      // L x voxels, channel-major
  std::vector<double> input;      // 2 x voxels: normalized CT, ROI mask
  std::vector<double> radiomics;  // global radiomic features, raw scale
  int label = 0;

  std::size_t local_channels() const { return voxels ? local.size() / voxels : 0; }
};

inline constexpr int kToyInputs = 2;

struct ToyShape {
  int local = 0;       // L
  int deep = 4;        // C
  int att_hidden = 4;  // channel MLP width
  int hidden = 8;      // classifier hidden width
  int radiomics = 0;   // d_r

  int channels() const { return local + deep; }
  friend bool operator==(const ToyShape&, const ToyShape&) = default;
};

struct ToyParams {
  std::vector<double> enc_w, enc_b;    // C x 2, C
  std::vector<double> att_w1, att_b1;  // H x K, H
  std::vector<double> att_w2, att_b2;  // K x H, K
  std::vector<double> cls_w1, cls_b1;  // Hc x (K + d_r), Hc
  std::vector<double> cls_w2, cls_b2;  // Hc, 1

  static ToyParams zeros(const ToyShape& s);

  template <typename Self, typename Fn>
  static void visit(Self& self, Fn fn) {
    fn("enc_w", self.enc_w);
    fn("enc_b", self.enc_b);
    fn("att_w1", self.att_w1);
    fn("att_b1", self.att_b1);
    fn("att_w2", self.att_w2);
    fn("att_b2", self.att_b2);
    fn("cls_w1", self.cls_w1);
    fn("cls_b1", self.cls_b1);
    fn("cls_w2", self.cls_w2);
    fn("cls_b2", self.cls_b2);
  }
  std::size_t count() const;
};

struct ToyModel {
  ToyShape shape;
  ToyParams params;
  bool attention = true;
  std::vector<std::uint8_t> channel_mask;  // K entries, 0 removes a channel
  std::vector<double> radiomic_mean, radiomic_scale;
};

/// Random initialization; the channel mask keeps every channel.
ToyModel init_toy_model(const ToyShape& shape, std::uint64_t seed, bool attention = true);

/// sigmoid(MLP(avg) + MLP(max)) over a K x voxels stack; masked channels
/// enter the pools as zeros.
std::vector<double> channel_attention(const ToyModel& model, std::span<const double> stacked,
                                      std::size_t voxels);

/// weights (x) (local ++ deep), per-channel scaling of the concatenation.
std::vector<double> fuse(std::span<const double> local, std::span<const double> deep,
                         std::size_t voxels, std::span<const double> weights);

struct ToyForward {
  std::vector<double> deep;       // C x voxels
  std::vector<double> avg, max;   // per channel, masked
  std::vector<std::size_t> argmax;
  std::vector<double> att_pre_avg, att_pre_max;  // H
  std::vector<double> attention;  // K
  std::vector<double> pooled;     // K
  std::vector<double> cls_input;  // K + d_r
  std::vector<double> hidden;     // Hc, after tanh
  double logit = 0.0;
  double probability = 0.5;

  /// Pooled deep channels, the bank's Z entry.
  std::vector<double> deep_pooled(const ToyShape& s) const {
    return {pooled.begin() + s.local, pooled.end()};
  }
};

std::vector<double> standardized_radiomics(const ToyModel& model, const ToySample& sample);
ToyForward toy_forward(const ToyModel& model, const ToySample& sample);

/// Stable log-loss of the logit.
double classification_loss(double logit, int label);

/// Parameter gradient of L_cls plus the given gradient on the pooled deep
/// channels (empty = none).
ToyParams toy_backward(const ToyModel& model, const ToySample& sample, const ToyForward& fwd,
                       std::span<const double> deep_pooled_grad = {});

struct TrainLogRow {
  int epoch = 0;
  std::size_t iteration = 0;
  double l_cls = 0.0, l_corr = 0.0, l_rec = 0.0, total = 0.0;
  double max_s = 0.0;
};

struct ToyTrainResult {
  ToyModel model;
  std::vector<TrainLogRow> log;
};

ToyTrainResult toy_train(const ToyConfig& config, std::span<const ToySample> samples);

double toy_predict(const ToyModel& model, const ToySample& sample);

/// Pearson correlation between pooled deep channels and standardized global
/// radiomics over a sample set. Dimensions with SD at most the bank's
/// min_scale count as constant and give 0.
Matrix deep_radiomic_correlation(const ToyModel& model, std::span<const ToySample> samples);

/// Max relative error |a - n| / max(|a|, |n|, 1e-6) between analytic and
/// central-difference gradients of L_cls + w_corr L_corr. With a bank, the
/// sample's pooled deep channels are pushed as the newest entry and the
/// bank statistics are frozen at the unperturbed values.
double grad_check(const ToyModel& model, const ToySample& sample, double w_corr,
                  const FeatureBank* bank = nullptr, double step = 1e-4);

/// Distance of the forward pass from the nearest non-differentiable point:
/// the smallest |ReLU pre-activation| in the attention MLP and the smallest
/// gap between the two largest encoder pre-activations of an active deep
/// channel. Central
/// differences with a step well below this margin stay on one smooth piece.
double kink_margin(const ToyModel& model, const ToySample& sample);

void write_train_log(const std::filesystem::path& path, std::span<const TrainLogRow> log);
void save_toy_model(const std::filesystem::path& path, const ToyModel& model);
ToyModel load_toy_model(const std::filesystem::path& path);

}  // namespace radfuse
