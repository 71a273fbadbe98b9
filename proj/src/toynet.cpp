#include "radfuse/toynet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>

#include <json.hpp>

#include "radfuse/error.hpp"
#include "radfuse/random.hpp"

namespace radfuse {

ToyConfig ToyConfig::from_kv(const KeyValues& kv) {
  ToyConfig c;
  c.epochs = kv.get_or("epochs", c.epochs);
  c.lr = kv.get_or("lr", c.lr);
  c.w_corr = kv.get_or("w_corr", c.w_corr);
  c.bank_capacity = kv.get_or("N_k", c.bank_capacity);
  c.decay = kv.get_or("w", c.decay);
  c.warm_up = kv.get_or("warm_up", c.warm_up);
  c.reduction = kv.get_or("reduction", c.reduction);
  c.deep_channels = kv.get_or("C", c.deep_channels);
  c.hidden = kv.get_or("hidden", c.hidden);
  c.attention = kv.get_or("attention", c.attention);
  c.use_local = kv.get_or("use_local", c.use_local);
  c.seed = kv.get_or("seed", c.seed);
  require(c.epochs >= 0, ErrorKind::InvalidArgument, "epochs must be >= 0");
  require(c.lr >= 0.0, ErrorKind::InvalidArgument, "lr must be >= 0");
  require(c.w_corr >= 0.0, ErrorKind::InvalidArgument, "w_corr must be >= 0");
  require(c.reduction >= 1, ErrorKind::InvalidArgument, "reduction must be >= 1");
  require(c.deep_channels >= 1 && c.hidden >= 1, ErrorKind::InvalidArgument,
          "C and hidden must be >= 1");
  require(c.warm_up >= -1, ErrorKind::InvalidArgument, "warm_up must be >= -1");
  return c;
}

void ToyConfig::to_kv(KeyValues& kv) const {
  kv.set("epochs", epochs);
  kv.set("lr", lr);
  kv.set("w_corr", w_corr);
  kv.set("N_k", bank_capacity);
  kv.set("w", decay);
  kv.set("warm_up", warm_up);
  kv.set("reduction", reduction);
  kv.set("C", deep_channels);
  kv.set("hidden", hidden);
  kv.set("attention", attention);
  kv.set("use_local", use_local);
  kv.set("seed", seed);
}

ToyParams ToyParams::zeros(const ToyShape& s) {
  const auto k = static_cast<std::size_t>(s.channels());
  const auto h = static_cast<std::size_t>(s.att_hidden);
  const auto c = static_cast<std::size_t>(s.deep);
  const auto hc = static_cast<std::size_t>(s.hidden);
  const auto in = k + static_cast<std::size_t>(s.radiomics);
  ToyParams p;
  p.enc_w.assign(c * kToyInputs, 0.0);
  p.enc_b.assign(c, 0.0);
  p.att_w1.assign(h * k, 0.0);
  p.att_b1.assign(h, 0.0);
  p.att_w2.assign(k * h, 0.0);
  p.att_b2.assign(k, 0.0);
  p.cls_w1.assign(hc * in, 0.0);
  p.cls_b1.assign(hc, 0.0);
  p.cls_w2.assign(hc, 0.0);
  p.cls_b2.assign(1, 0.0);
  return p;
}

std::size_t ToyParams::count() const {
  std::size_t n = 0;
  visit(*this, [&](const char*, const std::vector<double>& v) { n += v.size(); });
  return n;
}

namespace {

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

void check_shape(const ToyShape& s) {
  require(s.local >= 0 && s.deep >= 1 && s.att_hidden >= 1 && s.hidden >= 1 && s.radiomics >= 0,
          ErrorKind::InvalidArgument, "invalid toy model shape");
}

void check_sample(const ToyModel& m, const ToySample& x) {
  const auto v = x.voxels;
  require(v > 0, ErrorKind::InvalidArgument, "sample " + x.id + " has no voxels");
  require(x.local.size() == static_cast<std::size_t>(m.shape.local) * v, ErrorKind::InvalidArgument,
          "sample " + x.id + ": local channel count does not match the model");
  require(x.input.size() == kToyInputs * v, ErrorKind::InvalidArgument,
          "sample " + x.id + ": expected 2 input channels");
  require(x.radiomics.size() == static_cast<std::size_t>(m.shape.radiomics),
          ErrorKind::InvalidArgument, "sample " + x.id + ": radiomic dim does not match the model");
}

// MLP(a) = W2 relu(W1 a + b1) + b2; returns the hidden pre-activation.
std::vector<double> mlp_hidden(const ToyModel& m, std::span<const double> a) {
  const auto k = static_cast<std::size_t>(m.shape.channels());
  const auto h = static_cast<std::size_t>(m.shape.att_hidden);
  std::vector<double> pre(h);
  for (std::size_t j = 0; j < h; ++j) {
    double s = m.params.att_b1[j];
    for (std::size_t c = 0; c < k; ++c) s += m.params.att_w1[j * k + c] * a[c];
    pre[j] = s;
  }
  return pre;
}

std::vector<double> attention_from_pools(const ToyModel& m, std::span<const double> avg,
                                         std::span<const double> max, std::vector<double>* pre_avg,
                                         std::vector<double>* pre_max) {
  const auto k = static_cast<std::size_t>(m.shape.channels());
  const auto h = static_cast<std::size_t>(m.shape.att_hidden);
  std::vector<double> out(k, 1.0);
  if (m.attention) {
    const auto pa = mlp_hidden(m, avg);
    const auto pm = mlp_hidden(m, max);
    for (std::size_t c = 0; c < k; ++c) {
      double s = 2.0 * m.params.att_b2[c];
      for (std::size_t j = 0; j < h; ++j)
        s += m.params.att_w2[c * h + j] * (std::max(pa[j], 0.0) + std::max(pm[j], 0.0));
      out[c] = sigmoid(s);
    }
    if (pre_avg) *pre_avg = pa;
    if (pre_max) *pre_max = pm;
  }
  for (std::size_t c = 0; c < k; ++c)
    if (!m.channel_mask[c]) out[c] = 0.0;
  return out;
}

void pool(std::span<const double> values, std::size_t voxels, bool keep, double& avg, double& max,
          std::size_t& argmax) {
  avg = 0.0;
  max = 0.0;
  argmax = 0;
  if (!keep) return;
  double s = 0.0;
  max = values[0];
  for (std::size_t v = 0; v < voxels; ++v) {
    s += values[v];
    if (values[v] > max) {
      max = values[v];
      argmax = v;
    }
  }
  avg = s / static_cast<double>(voxels);
}

}  // namespace

ToyModel init_toy_model(const ToyShape& shape, std::uint64_t seed, bool attention) {
  check_shape(shape);
  ToyModel m;
  m.shape = shape;
  m.attention = attention;
  m.params = ToyParams::zeros(shape);
  m.channel_mask.assign(static_cast<std::size_t>(shape.channels()), 1);
  m.radiomic_mean.assign(static_cast<std::size_t>(shape.radiomics), 0.0);
  m.radiomic_scale.assign(static_cast<std::size_t>(shape.radiomics), 1.0);

  Rng rng(seed);
  auto fill = [&](std::vector<double>& v, double sd) {
    for (double& x : v) x = rng.normal(0.0, sd);
  };
  const double k = shape.channels();
  fill(m.params.enc_w, 1.0);
  fill(m.params.enc_b, 0.1);
  fill(m.params.att_w1, 1.0 / std::sqrt(k));
  fill(m.params.att_w2, 1.0 / std::sqrt(static_cast<double>(shape.att_hidden)));
  fill(m.params.cls_w1, 1.0 / std::sqrt(k + shape.radiomics));
  fill(m.params.cls_w2, 1.0 / std::sqrt(static_cast<double>(shape.hidden)));
  return m;
}

std::vector<double> channel_attention(const ToyModel& model, std::span<const double> stacked,
                                      std::size_t voxels) {
  const auto k = static_cast<std::size_t>(model.shape.channels());
  require(voxels > 0 && stacked.size() == k * voxels, ErrorKind::InvalidArgument,
          "attention input has the wrong channel count");
  std::vector<double> avg(k), max(k);
  std::size_t arg;
  for (std::size_t c = 0; c < k; ++c)
    pool(stacked.subspan(c * voxels, voxels), voxels, model.channel_mask[c] != 0, avg[c], max[c], arg);
  return attention_from_pools(model, avg, max, nullptr, nullptr);
}

std::vector<double> fuse(std::span<const double> local, std::span<const double> deep,
                         std::size_t voxels, std::span<const double> weights) {
  require(voxels > 0 && local.size() % voxels == 0 && deep.size() % voxels == 0,
          ErrorKind::InvalidArgument, "fused maps must share spatial dims");
  const std::size_t k = (local.size() + deep.size()) / voxels;
  require(weights.size() == k, ErrorKind::InvalidArgument, "attention weight count mismatch");
  std::vector<double> out(local.size() + deep.size());
  for (std::size_t c = 0; c < k; ++c) {
    const bool is_local = c * voxels < local.size();
    const double* src = is_local ? local.data() + c * voxels : deep.data() + c * voxels - local.size();
    for (std::size_t v = 0; v < voxels; ++v) out[c * voxels + v] = weights[c] * src[v];
  }
  return out;
}

std::vector<double> standardized_radiomics(const ToyModel& model, const ToySample& sample) {
  std::vector<double> r(sample.radiomics.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    r[i] = (sample.radiomics[i] - model.radiomic_mean[i]) / model.radiomic_scale[i];
  return r;
}

ToyForward toy_forward(const ToyModel& m, const ToySample& x) {
  check_sample(m, x);
  const std::size_t voxels = x.voxels;
  const auto l = static_cast<std::size_t>(m.shape.local);
  const auto c = static_cast<std::size_t>(m.shape.deep);
  const auto k = l + c;
  const auto hc = static_cast<std::size_t>(m.shape.hidden);

  ToyForward f;
  f.deep.resize(c * voxels);
  const double* ct = x.input.data();
  const double* mask = x.input.data() + voxels;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double w0 = m.params.enc_w[ch * kToyInputs], w1 = m.params.enc_w[ch * kToyInputs + 1];
    const double b = m.params.enc_b[ch];
    for (std::size_t v = 0; v < voxels; ++v)
      f.deep[ch * voxels + v] = std::tanh(w0 * ct[v] + w1 * mask[v] + b);
  }

  f.avg.resize(k);
  f.max.resize(k);
  f.argmax.resize(k);
  for (std::size_t ch = 0; ch < k; ++ch) {
    const auto values = ch < l ? std::span<const double>(x.local).subspan(ch * voxels, voxels)
                               : std::span<const double>(f.deep).subspan((ch - l) * voxels, voxels);
    pool(values, voxels, m.channel_mask[ch] != 0, f.avg[ch], f.max[ch], f.argmax[ch]);
  }
  f.attention = attention_from_pools(m, f.avg, f.max, &f.att_pre_avg, &f.att_pre_max);

  f.pooled.resize(k);
  for (std::size_t ch = 0; ch < k; ++ch) f.pooled[ch] = f.attention[ch] * f.avg[ch];

  f.cls_input = f.pooled;
  const auto r = standardized_radiomics(m, x);
  f.cls_input.insert(f.cls_input.end(), r.begin(), r.end());
  const std::size_t in = f.cls_input.size();
  f.hidden.resize(hc);
  double logit = m.params.cls_b2[0];
  for (std::size_t j = 0; j < hc; ++j) {
    double s = m.params.cls_b1[j];
    for (std::size_t i = 0; i < in; ++i) s += m.params.cls_w1[j * in + i] * f.cls_input[i];
    f.hidden[j] = std::tanh(s);
    logit += m.params.cls_w2[j] * f.hidden[j];
  }
  f.logit = logit;
  f.probability = sigmoid(logit);
  return f;
}

double classification_loss(double logit, int label) {
  return std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit))) - label * logit;
}

ToyParams toy_backward(const ToyModel& m, const ToySample& x, const ToyForward& f,
                       std::span<const double> deep_pooled_grad) {
  const std::size_t voxels = x.voxels;
  const auto l = static_cast<std::size_t>(m.shape.local);
  const auto c = static_cast<std::size_t>(m.shape.deep);
  const auto k = l + c;
  const auto h = static_cast<std::size_t>(m.shape.att_hidden);
  const auto hc = static_cast<std::size_t>(m.shape.hidden);
  const std::size_t in = f.cls_input.size();
  require(deep_pooled_grad.empty() || deep_pooled_grad.size() == c, ErrorKind::InvalidArgument,
          "deep feature gradient has the wrong dim");
  ToyParams g = ToyParams::zeros(m.shape);

  // Classifier.
  const double dlogit = f.probability - x.label;
  g.cls_b2[0] = dlogit;
  std::vector<double> dpooled(k, 0.0);
  for (std::size_t j = 0; j < hc; ++j) {
    g.cls_w2[j] = dlogit * f.hidden[j];
    const double dpre = dlogit * m.params.cls_w2[j] * (1.0 - f.hidden[j] * f.hidden[j]);
    g.cls_b1[j] = dpre;
    for (std::size_t i = 0; i < in; ++i) g.cls_w1[j * in + i] = dpre * f.cls_input[i];
    for (std::size_t ch = 0; ch < k; ++ch) dpooled[ch] += m.params.cls_w1[j * in + ch] * dpre;
  }
  for (std::size_t ch = 0; ch < deep_pooled_grad.size(); ++ch) dpooled[l + ch] += deep_pooled_grad[ch];

  // pooled = attention * avg.
  std::vector<double> davg(k, 0.0), dmax(k, 0.0);
  for (std::size_t ch = 0; ch < k; ++ch) {
    if (!m.channel_mask[ch]) continue;
    davg[ch] = dpooled[ch] * f.attention[ch];
  }
  if (m.attention) {
    std::vector<double> ds(k, 0.0);
    for (std::size_t ch = 0; ch < k; ++ch) {
      if (!m.channel_mask[ch]) continue;
      const double a = f.attention[ch];
      ds[ch] = dpooled[ch] * f.avg[ch] * a * (1.0 - a);
      g.att_b2[ch] = 2.0 * ds[ch];
    }
    auto branch = [&](const std::vector<double>& pre, const std::vector<double>& pooled,
                      std::vector<double>& dpool) {
      for (std::size_t j = 0; j < h; ++j) {
        const double act = std::max(pre[j], 0.0);
        double dh = 0.0;
        for (std::size_t ch = 0; ch < k; ++ch) {
          g.att_w2[ch * h + j] += ds[ch] * act;
          dh += m.params.att_w2[ch * h + j] * ds[ch];
        }
        const double dpre = pre[j] > 0.0 ? dh : 0.0;
        g.att_b1[j] += dpre;
        for (std::size_t ch = 0; ch < k; ++ch) {
          g.att_w1[j * k + ch] += dpre * pooled[ch];
          if (m.channel_mask[ch]) dpool[ch] += m.params.att_w1[j * k + ch] * dpre;
        }
      }
    };
    branch(f.att_pre_avg, f.avg, davg);
    branch(f.att_pre_max, f.max, dmax);
  }

  // Deep encoder.
  const double* ct = x.input.data();
  const double* mask = x.input.data() + voxels;
  const double inv = 1.0 / static_cast<double>(voxels);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const std::size_t kk = l + ch;
    if (!m.channel_mask[kk]) continue;
    const double* z = f.deep.data() + ch * voxels;
    double dw0 = 0.0, dw1 = 0.0, db = 0.0;
    for (std::size_t v = 0; v < voxels; ++v) {
      double du = davg[kk] * inv;
      if (v == f.argmax[kk]) du += dmax[kk];
      const double dpre = du * (1.0 - z[v] * z[v]);
      dw0 += dpre * ct[v];
      dw1 += dpre * mask[v];
      db += dpre;
    }
    g.enc_w[ch * kToyInputs] = dw0;
    g.enc_w[ch * kToyInputs + 1] = dw1;
    g.enc_b[ch] = db;
  }
  return g;
}

namespace {

ToyShape shape_for(const ToyConfig& config, const ToySample& first) {
  ToyShape s;
  s.local = static_cast<int>(first.local_channels());
  s.deep = config.deep_channels;
  s.att_hidden = std::max(1, (s.local + s.deep) / config.reduction);
  s.hidden = config.hidden;
  s.radiomics = static_cast<int>(first.radiomics.size());
  return s;
}

void fit_radiomic_scaling(ToyModel& m, std::span<const ToySample> samples) {
  const auto dr = static_cast<std::size_t>(m.shape.radiomics);
  const auto n = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < dr; ++i) {
    double mean = 0.0;
    for (const auto& s : samples) mean += s.radiomics[i];
    mean /= n;
    double var = 0.0;
    for (const auto& s : samples) var += (s.radiomics[i] - mean) * (s.radiomics[i] - mean);
    const double sd = std::sqrt(var / n);
    m.radiomic_mean[i] = mean;
    m.radiomic_scale[i] = sd > 0.0 ? sd : 1.0;
  }
}

}  // namespace

ToyTrainResult toy_train(const ToyConfig& config, std::span<const ToySample> samples) {
  require(!samples.empty(), ErrorKind::Data, "no training samples");
  std::size_t per_class[2] = {0, 0};
  for (const auto& s : samples) {
    require(s.label == 0 || s.label == 1, ErrorKind::Data, "labels must be 0 or 1");
    ++per_class[s.label];
  }
  require(per_class[0] >= 2 && per_class[1] >= 2, ErrorKind::Data,
          "toy training needs at least two samples per class");
  require(config.lr >= 0.0 && config.w_corr >= 0.0 && config.epochs >= 0,
          ErrorKind::InvalidArgument, "invalid toy training config");

  ToyTrainResult out;
  ToyModel& m = out.model;
  m = init_toy_model(shape_for(config, samples.front()), config.seed, config.attention);
  if (!config.use_local)
    for (int ch = 0; ch < m.shape.local; ++ch) m.channel_mask[static_cast<std::size_t>(ch)] = 0;
  for (const auto& s : samples) check_sample(m, s);
  fit_radiomic_scaling(m, samples);

  BankConfig bc;
  bc.capacity = config.bank_capacity;
  bc.decay = config.decay;
  bc.batch = 1;
  bc.warm_up = config.warm_up < 0 ? samples.size() : static_cast<std::size_t>(config.warm_up);
  FeatureBank bank(static_cast<std::size_t>(m.shape.deep),
                   std::max<std::size_t>(1, static_cast<std::size_t>(m.shape.radiomics)), bc);
  const LossWeights weights{config.w_corr, 0.0};

  Rng rng(config.seed ^ 0x5eedf00dULL);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t iteration = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (auto idx : order) {
      const auto& x = samples[idx];
      const auto f = toy_forward(m, x);
      auto r = standardized_radiomics(m, x);
      if (r.empty()) r.assign(1, 0.0);
      bank.push(f.deep_pooled(m.shape), std::move(r));

      TrainLogRow row;
      row.epoch = epoch;
      row.iteration = iteration++;
      row.l_cls = classification_loss(f.logit, x.label);
      std::vector<double> dz;
      if (bank.active()) {
        const auto stats = bank_stats(bank);
        const auto s = weighted_correlation(bank, stats);
        for (double v : s.data) row.l_corr += std::abs(v);
        row.max_s = max_abs(s);
        if (config.w_corr > 0.0) {
          const auto g = decorr_grad(bank, stats);
          dz.assign(g.data.begin(), g.data.begin() + static_cast<std::ptrdiff_t>(g.cols));
          for (double& v : dz) v *= config.w_corr;
        }
      }
      row.total = total_loss(row.l_cls, row.l_corr, row.l_rec, weights);
      out.log.push_back(row);

      if (config.lr == 0.0) continue;
      const auto grad = toy_backward(m, x, f, dz);
      auto* gp = &grad;
      ToyParams::visit(m.params, [&](const char* name, std::vector<double>& p) {
        const std::vector<double>* gv = nullptr;
        ToyParams::visit(*gp, [&](const char* gname, const std::vector<double>& v) {
          if (std::string_view(gname) == name) gv = &v;
        });
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= config.lr * (*gv)[i];
      });
    }
  }
  return out;
}

double toy_predict(const ToyModel& model, const ToySample& sample) {
  return toy_forward(model, sample).probability;
}

Matrix deep_radiomic_correlation(const ToyModel& model, std::span<const ToySample> samples) {
  require(samples.size() >= 2, ErrorKind::Data, "correlation needs at least two samples");
  const auto dz = static_cast<std::size_t>(model.shape.deep);
  const auto dr = static_cast<std::size_t>(model.shape.radiomics);
  std::vector<std::vector<double>> z, r;
  for (const auto& s : samples) {
    z.push_back(toy_forward(model, s).deep_pooled(model.shape));
    r.push_back(standardized_radiomics(model, s));
  }
  const auto n = static_cast<double>(samples.size());
  auto standardize = [&](std::vector<std::vector<double>>& rows, std::size_t dim) {
    for (std::size_t a = 0; a < dim; ++a) {
      double mean = 0.0;
      for (const auto& row : rows) mean += row[a];
      mean /= n;
      double var = 0.0;
      for (const auto& row : rows) var += (row[a] - mean) * (row[a] - mean);
      const double sd = std::sqrt(var / n);
      for (auto& row : rows) row[a] = sd > BankConfig{}.min_scale ? (row[a] - mean) / sd : 0.0;
    }
  };
  standardize(z, dz);
  standardize(r, dr);
  Matrix s(dz, dr);
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t a = 0; a < dz; ++a)
      for (std::size_t b = 0; b < dr; ++b) s(a, b) += z[i][a] * r[i][b] / n;
  return s;
}

double grad_check(const ToyModel& model, const ToySample& sample, double w_corr,
                  const FeatureBank* bank, double step) {
  const auto f = toy_forward(model, sample);
  std::optional<FeatureBank> local_bank;
  std::optional<BankStats> stats;
  std::vector<double> dz;
  if (bank && w_corr > 0.0) {
    local_bank.emplace(*bank);
    auto r = standardized_radiomics(model, sample);
    local_bank->push(f.deep_pooled(model.shape), std::move(r));
    if (local_bank->active()) {
      stats = bank_stats(*local_bank);
      const auto g = decorr_grad(*local_bank, *stats);
      dz.assign(g.data.begin(), g.data.begin() + static_cast<std::ptrdiff_t>(g.cols));
      for (double& v : dz) v *= w_corr;
    }
  }
  const auto analytic = toy_backward(model, sample, f, dz);

  auto objective = [&](const ToyModel& m) {
    const auto fw = toy_forward(m, sample);
    double value = classification_loss(fw.logit, sample.label);
    if (stats) {
      local_bank->set_z(0, fw.deep_pooled(m.shape));
      value += w_corr * decorr_loss(*local_bank, *stats);
    }
    return value;
  };

  ToyModel probe = model;
  double worst = 0.0;
  std::vector<std::vector<double>*> slots;
  std::vector<const std::vector<double>*> grads;
  ToyParams::visit(probe.params, [&](const char*, std::vector<double>& v) { slots.push_back(&v); });
  ToyParams::visit(analytic, [&](const char*, const std::vector<double>& v) { grads.push_back(&v); });
  for (std::size_t s = 0; s < slots.size(); ++s)
    for (std::size_t i = 0; i < slots[s]->size(); ++i) {
      double& p = (*slots[s])[i];
      const double saved = p;
      p = saved + step;
      const double up = objective(probe);
      p = saved - step;
      const double down = objective(probe);
      p = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = (*grads[s])[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      require(std::isfinite(a) && std::isfinite(numeric), ErrorKind::Numeric, "non-finite gradient");
      worst = std::max(worst, err);
    }
  return worst;
}

double kink_margin(const ToyModel& model, const ToySample& sample) {
  const auto f = toy_forward(model, sample);
  double margin = std::numeric_limits<double>::infinity();
  if (model.attention) {
    for (double v : f.att_pre_avg) margin = std::min(margin, std::abs(v));
    for (double v : f.att_pre_max) margin = std::min(margin, std::abs(v));
  }
  // Max-pool order is decided by the encoder pre-activation; tanh keeps it.
  const auto l = static_cast<std::size_t>(model.shape.local);
  const std::size_t voxels = sample.voxels;
  const double* ct = sample.input.data();
  const double* mask = sample.input.data() + voxels;
  for (std::size_t ch = 0; ch < static_cast<std::size_t>(model.shape.deep); ++ch) {
    if (!model.channel_mask[l + ch] || voxels < 2) continue;
    const double w0 = model.params.enc_w[ch * kToyInputs], w1 = model.params.enc_w[ch * kToyInputs + 1];
    double top = -std::numeric_limits<double>::infinity(), second = top;
    for (std::size_t v = 0; v < voxels; ++v) {
      const double pre = w0 * ct[v] + w1 * mask[v];
      if (pre > top) {
        second = top;
        top = pre;
      } else {
        second = std::max(second, pre);
      }
    }
    margin = std::min(margin, top - second);
  }
  return margin;
}

void write_train_log(const std::filesystem::path& path, std::span<const TrainLogRow> log) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << "epoch,iteration,l_cls,l_corr,l_rec,total,max_abs_s\n";
  out.precision(17);
  for (const auto& r : log)
    out << r.epoch << ',' << r.iteration << ',' << r.l_cls << ',' << r.l_corr << ',' << r.l_rec << ','
        << r.total << ',' << r.max_s << '\n';
}

void save_toy_model(const std::filesystem::path& path, const ToyModel& m) {
  nlohmann::ordered_json j;
  j["shape"] = {{"local", m.shape.local},
                {"deep", m.shape.deep},
                {"att_hidden", m.shape.att_hidden},
                {"hidden", m.shape.hidden},
                {"radiomics", m.shape.radiomics}};
  j["attention"] = m.attention;
  j["channel_mask"] = m.channel_mask;
  j["radiomic_mean"] = m.radiomic_mean;
  j["radiomic_scale"] = m.radiomic_scale;
  auto& params = j["parameters"] = nlohmann::ordered_json::object();
  ToyParams::visit(m.params, [&](const char* name, const std::vector<double>& v) { params[name] = v; });
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(1) << '\n';
}

ToyModel load_toy_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path.string());
  ToyModel m;
  try {
    nlohmann::json j;
    in >> j;
    const auto& s = j.at("shape");
    m.shape = {s.at("local").get<int>(), s.at("deep").get<int>(), s.at("att_hidden").get<int>(),
               s.at("hidden").get<int>(), s.at("radiomics").get<int>()};
    check_shape(m.shape);
    m.attention = j.at("attention").get<bool>();
    m.channel_mask = j.at("channel_mask").get<std::vector<std::uint8_t>>();
    m.radiomic_mean = j.at("radiomic_mean").get<std::vector<double>>();
    m.radiomic_scale = j.at("radiomic_scale").get<std::vector<double>>();
    const auto expect = ToyParams::zeros(m.shape);
    m.params = expect;
    const auto& params = j.at("parameters");
    std::string bad;
    ToyParams::visit(m.params, [&](const char* name, std::vector<double>& v) {
      auto loaded = params.at(name).get<std::vector<double>>();
      if (loaded.size() != v.size()) bad = name;
      v = std::move(loaded);
    });
    require(bad.empty(), ErrorKind::Format, path.string() + ": parameter " + bad + " has the wrong size");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
  require(m.channel_mask.size() == static_cast<std::size_t>(m.shape.channels()) &&
              m.radiomic_mean.size() == static_cast<std::size_t>(m.shape.radiomics) &&
              m.radiomic_scale.size() == m.radiomic_mean.size(),
          ErrorKind::Format, path.string() + ": inconsistent model sizes");
  return m;
}

}  // namespace radfuse
