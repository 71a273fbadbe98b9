#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "radfuse/error.hpp"
#include "radfuse/experiment.hpp"
#include "radfuse/random.hpp"
#include "radfuse/toynet.hpp"

using namespace radfuse;

namespace {

ToySample random_sample(Rng& rng, std::size_t local, std::size_t voxels, std::size_t dr, int label) {
  ToySample x;
  x.id = "r";
  x.voxels = voxels;
  x.label = label;
  for (std::size_t i = 0; i < local * voxels; ++i) x.local.push_back(rng.uniform(-1, 1));
  for (std::size_t i = 0; i < voxels; ++i) x.input.push_back(rng.uniform(-1, 1));
  for (std::size_t i = 0; i < voxels; ++i) x.input.push_back(rng.uniform() < 0.5 ? 1.0 : 0.0);
  for (std::size_t i = 0; i < dr; ++i) x.radiomics.push_back(rng.normal());
  return x;
}

const ToyShape kShape{4, 4, 4, 8, 4};

std::vector<ToySample> phantom_toy_samples(std::size_t n, std::uint64_t seed) {
  Dataset d;
  d.samples = phantom_samples(n, {16, 16, 16}, seed);
  d.dims = d.samples[0].volume.dims();
  const auto table = extract_feature_table(d, default_feature_keys(), kDefaultBinWidth, 1);
  const std::vector<TextureKey> keys{TextureKey::GlcmIdn};
  const std::vector<int> radii{1, 2, 5, 10};
  const auto local = extract_local_maps(d, keys, radii, kDefaultBinWidth, 1);
  return make_toy_samples(d, local, table);
}

double accuracy(const ToyModel& m, std::span<const ToySample> samples) {
  int ok = 0;
  for (const auto& s : samples) ok += (toy_predict(m, s) >= 0.5) == (s.label == 1);
  return double(ok) / double(samples.size());
}

}  // namespace

TEST_CASE("channel attention shape, range and zero parameters") {
  Rng rng(1);
  auto m = init_toy_model(kShape, 3);
  std::vector<double> stack(8 * 27);
  for (double& v : stack) v = rng.normal();
  const auto a = channel_attention(m, stack, 27);
  CHECK(a.size() == 8);
  for (double w : a) {
    CHECK(w > 0.0);
    CHECK(w < 1.0);
  }
  m.params = ToyParams::zeros(kShape);
  for (double w : channel_attention(m, stack, 27)) CHECK(w == 0.5);
  CHECK_THROWS_AS(channel_attention(m, std::span(stack).first(7 * 27), 27), Error);
}

TEST_CASE("fuse scales concatenated channels") {
  const std::vector<double> local{1, 2, 3, 4};  // 2 channels x 2 voxels
  const std::vector<double> deep{5, 6};
  const std::vector<double> ones{1, 1, 1};
  CHECK(fuse(local, deep, 2, ones) == std::vector<double>{1, 2, 3, 4, 5, 6});
  const std::vector<double> zeros{0, 0, 0};
  for (double v : fuse(local, deep, 2, zeros)) CHECK(v == 0.0);
  const std::vector<double> half{1, 0.5, 1};
  CHECK(fuse(local, deep, 2, half) == std::vector<double>{1, 2, 1.5, 2, 5, 6});
  const std::vector<double> two{1, 1};
  CHECK_THROWS_AS(fuse(local, deep, 2, two), Error);
  CHECK_THROWS_AS(fuse(local, std::vector<double>{1, 2, 3}, 2, ones), Error);
}

TEST_CASE("forward pass conventions") {
  Rng rng(5);
  const auto x = random_sample(rng, 4, 64, 4, 1);
  auto m = init_toy_model(kShape, 9);
  const auto f = toy_forward(m, x);
  CHECK(f.attention.size() == 8);
  CHECK(f.pooled.size() == 8);
  CHECK(f.deep_pooled(m.shape).size() == 4);
  CHECK(toy_forward(m, x).logit == f.logit);

  auto zero = m;
  std::fill(zero.params.cls_w1.begin(), zero.params.cls_w1.end(), 0.0);
  std::fill(zero.params.cls_b1.begin(), zero.params.cls_b1.end(), 0.0);
  std::fill(zero.params.cls_w2.begin(), zero.params.cls_w2.end(), 0.0);
  zero.params.cls_b2[0] = 0.0;
  CHECK(toy_forward(zero, x).probability == 0.5);

  auto bad = x;
  bad.local.pop_back();
  CHECK_THROWS_AS(toy_forward(m, bad), Error);
  bad = x;
  bad.radiomics.push_back(1.0);
  CHECK_THROWS_AS(toy_forward(m, bad), Error);
}

TEST_CASE("masked channels have no influence and no gradient") {
  Rng rng(6);
  auto x = random_sample(rng, 4, 64, 4, 0);
  auto m = init_toy_model(kShape, 2);
  m.channel_mask[1] = 0;  // local
  m.channel_mask[5] = 0;  // deep channel 1
  const double logit = toy_forward(m, x).logit;
  auto doubled = x;
  for (std::size_t v = 0; v < 64; ++v) doubled.local[64 + v] *= 2.0;
  CHECK(toy_forward(m, doubled).logit == logit);
  const auto f = toy_forward(m, x);
  CHECK(f.attention[1] == 0.0);
  CHECK(f.pooled[5] == 0.0);
  const std::vector<double> extra{0.3, 0.7, -0.2, 0.1};
  const auto g = toy_backward(m, x, f, extra);
  CHECK(g.enc_w[2] == 0.0);
  CHECK(g.enc_w[3] == 0.0);
  CHECK(g.enc_b[1] == 0.0);
  CHECK(g.att_b2[1] == 0.0);
  CHECK(g.att_b2[5] == 0.0);
}

TEST_CASE("pooling ignores voxel order") {
  Rng rng(8);
  const auto x = random_sample(rng, 4, 125, 4, 1);
  std::vector<std::size_t> perm(125);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(std::span(perm));
  auto y = x;
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t v = 0; v < 125; ++v) y.local[c * 125 + v] = x.local[c * 125 + perm[v]];
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t v = 0; v < 125; ++v) y.input[c * 125 + v] = x.input[c * 125 + perm[v]];
  const auto m = init_toy_model(kShape, 4);
  const auto a = toy_forward(m, x), b = toy_forward(m, y);
  for (std::size_t k = 0; k < a.pooled.size(); ++k)
    CHECK(b.pooled[k] == doctest::Approx(a.pooled[k]).epsilon(1e-12));
  CHECK(b.logit == doctest::Approx(a.logit).epsilon(1e-12));
}

TEST_CASE("full parameter gradient matches central differences") {
  Rng rng(11);
  double worst_plain = 0.0, worst_corr = 0.0;
  int checked = 0, skipped = 0;
  for (std::uint64_t t = 0; checked < 100; ++t) {
    auto m = init_toy_model(kShape, 100 + t, t % 4 != 0);
    if (t % 5 == 2) m.channel_mask[t % 8] = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      m.radiomic_mean[i] = rng.normal();
      m.radiomic_scale[i] = rng.uniform(0.5, 2.0);
    }
    const auto x = random_sample(rng, 4, 512, 4, static_cast<int>(t % 2));
    BankConfig bc;
    bc.capacity = 3 + rng.below(23);
    FeatureBank bank(4, 4, bc);
    const std::size_t fill = 1 + rng.below(bc.capacity);
    for (std::size_t i = 0; i < fill; ++i) {
      std::vector<double> z(4), r(4);
      for (double& v : z) v = rng.uniform(-0.5, 0.5);
      for (double& v : r) v = rng.normal();
      bank.push(z, r);
    }
    // ReLU and max pooling are not differentiable everywhere.
    if (kink_margin(m, x) < 5e-4) {
      ++skipped;
      continue;
    }
    worst_plain = std::max(worst_plain, grad_check(m, x, 0.0));
    worst_corr = std::max(worst_corr, grad_check(m, x, 2.0, &bank));
    ++checked;
  }
  MESSAGE("toynet grad check: L_cls " << worst_plain << ", with L_corr " << worst_corr << ", " << skipped
                                      << " instances near a kink skipped");
  CHECK(skipped < 3 * checked);
  CHECK(worst_plain < 1e-4);
  CHECK(worst_corr < 1e-4);
}

TEST_CASE("zero input volume keeps gradients finite") {
  ToySample x;
  x.id = "z";
  x.voxels = 512;
  x.local.assign(4 * 512, 0.0);
  x.input.assign(2 * 512, 0.0);
  x.radiomics.assign(4, 0.0);
  const auto m = init_toy_model(kShape, 1);
  CHECK(std::isfinite(grad_check(m, x, 0.0)));
  const auto g = toy_backward(m, x, toy_forward(m, x));
  ToyParams::visit(g, [](const char*, const std::vector<double>& v) {
    for (double d : v) CHECK(std::isfinite(d));
  });
}

TEST_CASE("parameter count follows the shape") {
  const auto m = init_toy_model(kShape, 0);
  // enc 4*2+4, att 4*8+4 + 8*4+8, cls 8*12+8 + 8+1
  CHECK(m.params.count() == 12 + 36 + 40 + 104 + 9);
}

TEST_CASE("training on separable phantoms") {
  const auto samples = phantom_toy_samples(40, 500);
  ToyConfig c;
  c.epochs = 5;  // 200 iterations
  c.w_corr = 0.0;
  c.seed = 1;
  const auto a = toy_train(c, samples);
  CHECK(a.log.size() == 200);
  const double acc = accuracy(a.model, samples);
  MESSAGE("training accuracy " << acc);
  CHECK(acc >= 0.95);

  const auto b = toy_train(c, samples);
  CHECK(b.log.back().l_cls == a.log.back().l_cls);
  CHECK(b.model.params.cls_w1 == a.model.params.cls_w1);

  ToyConfig frozen = c;
  frozen.lr = 0.0;
  const auto f = toy_train(frozen, samples);
  const auto init = init_toy_model(f.model.shape, c.seed, c.attention);
  CHECK(f.model.params.enc_w == init.params.enc_w);
  CHECK(f.model.params.cls_w2 == init.params.cls_w2);

  const auto dir = std::filesystem::temp_directory_path() / "radfuse_test_toynet";
  std::filesystem::create_directories(dir);
  save_toy_model(dir / "m.json", a.model);
  const auto back = load_toy_model(dir / "m.json");
  for (const auto& s : samples) CHECK(toy_predict(back, s) == toy_predict(a.model, s));
  write_train_log(dir / "log.csv", a.log);
  CHECK(std::filesystem::file_size(dir / "log.csv") > 0);
}

TEST_CASE("de-correlation weight lowers the bank correlation") {
  const auto samples = phantom_toy_samples(40, 105);
  ToyConfig c;
  c.epochs = 30;
  c.lr = 0.1;
  c.seed = 5;
  c.w_corr = 0.0;
  const double off = toy_train(c, samples).log.back().max_s;
  c.w_corr = 2.0;
  const double on = toy_train(c, samples).log.back().max_s;
  MESSAGE("final max|S|: w_corr 0 -> " << off << ", w_corr 2 -> " << on);
  CHECK(off > 0.5);
  CHECK(on < 0.2);
}

TEST_CASE("degenerate training inputs") {
  Rng rng(2);
  std::vector<ToySample> one_class;
  for (int i = 0; i < 4; ++i) one_class.push_back(random_sample(rng, 1, 8, 2, 1));
  CHECK_THROWS_AS(toy_train(ToyConfig{}, one_class), Error);
  CHECK_THROWS_AS(toy_train(ToyConfig{}, std::vector<ToySample>{}), Error);

  KeyValues kv = KeyValues::parse("epochs = 3\nlr = 0.5\nw_corr = 1.5\nN_k = 10\nC = 2\n");
  const auto c = ToyConfig::from_kv(kv);
  CHECK(c.epochs == 3);
  CHECK(c.bank_capacity == 10);
  CHECK(c.deep_channels == 2);
  CHECK_THROWS_AS(ToyConfig::from_kv(KeyValues::parse("lr = -1\n")), Error);
}
