#include <doctest.h>

#include <cmath>

#include "oracles/decorr_oracle.hpp"
#include "radfuse/error.hpp"
#include "radfuse/losses.hpp"
#include "radfuse/random.hpp"

using namespace radfuse;

namespace {

std::vector<double> draw(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal(0.0, 1.0);
  return v;
}

struct RandomBank {
  FeatureBank bank;
  oracle::BankSnapshot snap;
};

RandomBank random_bank(std::uint64_t seed, bool standardize = true) {
  Rng rng(seed);
  BankConfig cfg;
  cfg.capacity = 2 + rng.below(24);
  cfg.decay = rng.uniform(0.5, 0.99);
  cfg.batch = 1 + rng.below(cfg.capacity);
  cfg.standardize = standardize;
  const std::size_t dz = 1 + rng.below(8), dr = 1 + rng.below(8);
  FeatureBank bank(dz, dr, cfg);
  const std::size_t pushes = 2 + rng.below(2 * cfg.capacity);
  for (std::size_t i = 0; i < pushes; ++i) {
    auto z = draw(rng, dz), r = draw(rng, dr);
    // Correlate the first dims so S is not purely noise.
    z[0] += 0.8 * r[0];
    bank.push(z, r);
  }
  oracle::BankSnapshot snap;
  snap.decay = cfg.decay;
  snap.standardize = standardize;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    snap.z.push_back(bank.entry(i).z);
    snap.r.push_back(bank.entry(i).r);
  }
  return {std::move(bank), std::move(snap)};
}

}  // namespace

TEST_CASE("alpha schedule and total loss are exact") {
  CHECK(alpha_schedule(0) == 0.33);
  CHECK(alpha_schedule(9) == 0.33);
  CHECK(alpha_schedule(10) == 0.264);
  CHECK(alpha_schedule(25) == 0.2112);
  CHECK(alpha_schedule(1000) > 0.0);
  CHECK_THROWS_AS(alpha_schedule(-1), Error);

  CHECK(total_loss(1.0, 0.1, 0.5, {2.0, 0.33}) == 1.7);
  CHECK(total_loss(1.0, 5.0, 0.0, {0.0, 0.33}) == 1.0);
  CHECK_THROWS_AS(total_loss(NAN, 0, 0, {}), Error);
  CHECK_THROWS_AS(total_loss(1, 0, 0, {-1.0, 0.33}), Error);
}

TEST_CASE("bank is FIFO with the newest entry first") {
  BankConfig cfg;
  cfg.capacity = 3;
  cfg.warm_up = 2;
  FeatureBank bank(1, 1, cfg);
  CHECK(!bank.active());
  for (int i = 0; i < 5; ++i) bank.push({double(i)}, {double(-i)});
  CHECK(bank.size() == 3);
  CHECK(bank.entry(0).z[0] == 4.0);
  CHECK(bank.entry(2).z[0] == 2.0);
  CHECK(bank.pushes() == 5);
  CHECK(bank.active());

  const auto s = bank_stats(bank);
  CHECK(s.weight[0] == 0.9);
  CHECK(s.weight[2] == doctest::Approx(0.729).epsilon(1e-15));

  CHECK_THROWS_AS(bank.push({1.0, 2.0}, {1.0}), Error);
  CHECK_THROWS_AS(FeatureBank(0, 1), Error);
  BankConfig bad;
  bad.decay = 1.0;
  CHECK_THROWS_AS(FeatureBank(1, 1, bad), Error);
}

TEST_CASE("warm-up keeps the loss and gradient at zero") {
  BankConfig cfg;
  cfg.warm_up = 4;
  FeatureBank bank(2, 2, cfg);
  Rng rng(1);
  for (int i = 0; i < 4; ++i) bank.push(draw(rng, 2), draw(rng, 2));
  CHECK(decorr_loss(bank) == 0.0);
  for (double g : decorr_grad(bank).data) CHECK(g == 0.0);
  bank.push(draw(rng, 2), draw(rng, 2));
  CHECK(decorr_loss(bank) > 0.0);
}

TEST_CASE("decorrelation loss matches brute-force sums") {
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    const bool standardize = seed % 3 != 2;
    const auto [bank, snap] = random_bank(seed, standardize);
    const double fast = decorr_loss(bank);
    const double slow = oracle::decorr_brute_force(snap);
    CHECK(std::abs(fast - slow) <= 1e-10 * std::max(1.0, std::abs(slow)));
    const auto s = weighted_correlation(bank);
    for (std::size_t a = 0; a < bank.dz(); ++a)
      for (std::size_t b = 0; b < bank.dr(); ++b)
        CHECK(std::abs(s(a, b) - oracle::correlation_entry(snap, a, b)) < 1e-12);
  }
}

TEST_CASE("correlation entries are bounded and self-correlation is 1") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto [bank, snap] = random_bank(seed);
    for (double v : weighted_correlation(bank).data) CHECK(std::abs(v) <= 1.0 + 1e-12);
  }
  FeatureBank bank(1, 1);
  Rng rng(2);
  for (int i = 0; i < 10; ++i) {
    const double v = rng.normal();
    bank.push({v}, {v});
  }
  CHECK(weighted_correlation(bank)(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("standardized loss is invariant to positive affine maps of z") {
  const auto [bank, snap] = random_bank(7);
  FeatureBank mapped(bank.dz(), bank.dr(), bank.config());
  for (std::size_t i = bank.size(); i-- > 0;) {
    auto z = bank.entry(i).z;
    for (std::size_t a = 0; a < z.size(); ++a) z[a] = (a + 2.0) * z[a] - 3.0;
    mapped.push(z, bank.entry(i).r);
  }
  CHECK(decorr_loss(mapped) == doctest::Approx(decorr_loss(bank)).epsilon(1e-10));
}

TEST_CASE("constant dimensions contribute nothing") {
  FeatureBank bank(2, 1);
  Rng rng(3);
  for (int i = 0; i < 8; ++i) bank.push({5.0, rng.normal()}, {rng.normal()});
  const auto s = weighted_correlation(bank);
  CHECK(s(0, 0) == 0.0);
  const auto g = decorr_grad(bank);
  CHECK(g(0, 0) == 0.0);
  // Variation below min_scale counts as constant too.
  FeatureBank tiny(1, 1);
  for (int i = 0; i < 8; ++i) tiny.push({1e-20 * i}, {double(i)});
  CHECK(decorr_loss(tiny) == 0.0);
}

TEST_CASE("decorrelation gradient matches central differences") {
  double worst = 0.0;
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 120; ++seed) {
    auto rb = random_bank(1000 + seed, seed % 4 != 3);
    auto& bank = rb.bank;
    if (!bank.active()) continue;
    const auto stats = bank_stats(bank);
    const auto g = decorr_grad(bank, stats);
    CHECK(g.rows == std::min(bank.config().batch, bank.size()));
    for (std::size_t i = 0; i < g.rows; ++i)
      for (std::size_t a = 0; a < bank.dz(); ++a) {
        const double h = 1e-5;
        auto z = bank.entry(i).z;
        const double saved = z[a];
        z[a] = saved + h;
        bank.set_z(i, z);
        const double up = decorr_loss(bank, stats);
        z[a] = saved - h;
        bank.set_z(i, z);
        const double down = decorr_loss(bank, stats);
        z[a] = saved;
        bank.set_z(i, z);
        const double numeric = (up - down) / (2 * h);
        const double err = std::abs(numeric - g(i, a)) /
                           std::max({std::abs(numeric), std::abs(g(i, a)), 1e-6});
        worst = std::max(worst, err);
      }
    ++checked;
  }
  MESSAGE("decorr_grad worst relative error " << worst << " over " << checked << " banks");
  CHECK(checked >= 100);
  CHECK(worst < 1e-4);
}

TEST_CASE("binary cross-entropy clamps probabilities") {
  const std::vector<double> p{1.0, 0.0, 0.5};
  const std::vector<int> y{1, 1, 0};
  const double l = bce_loss(p, y);
  CHECK(std::isfinite(l));
  const double expect = (-std::log(1.0 - 1e-7) - std::log(1e-7) - std::log(0.5)) / 3.0;
  CHECK(l == doctest::Approx(expect).epsilon(1e-12));
  const std::vector<int> short_labels{1};
  CHECK_THROWS_AS(bce_loss(p, short_labels), Error);
  const std::vector<double> nan{NAN};
  CHECK_THROWS_AS(bce_loss(nan, short_labels), Error);
}

TEST_CASE("reconstruction loss weights the auxiliary decoders") {
  const std::vector<double> ct{0.1, -0.2, 0.3, 0.0};
  const std::vector<double> mask{1, 0, 1, 0};
  const std::vector<double> good_mask{0.9, 0.1, 0.9, 0.1};
  const std::vector<double> shifted{0.2, -0.1, 0.4, 0.1};
  const DecoderOutput perfect{ct, good_mask};
  const DecoderOutput off{shifted, good_mask};
  const double bce = -std::log(0.9);
  std::vector<DecoderOutput> outs{perfect, off, off, off};
  const double main = bce;
  const double aux = 0.1 + bce;
  CHECK(recon_loss(ct, mask, outs, 0.33) == doctest::Approx(main + 0.33 * 3 * aux).epsilon(1e-12));
  CHECK(recon_loss(ct, mask, outs, 0.0) == doctest::Approx(main).epsilon(1e-12));
  outs.pop_back();
  CHECK_THROWS_AS(recon_loss(ct, mask, outs, 0.33), Error);
}
