#include <doctest.h>

#include <cmath>

#include "oracles/texture_oracle.hpp"
#include "radfuse/error.hpp"
#include "radfuse/features.hpp"
#include "radfuse/random.hpp"

using namespace radfuse;

namespace {

QuantizedVolume levels_of(Dims dims, std::vector<std::int32_t> levels) {
  QuantizedVolume q;
  q.dims = dims;
  q.levels = std::move(levels);
  for (auto l : q.levels) q.num_levels = std::max(q.num_levels, static_cast<int>(l));
  return q;
}

QuantizedVolume constant(Dims dims) {
  return levels_of(dims, std::vector<std::int32_t>(dims.count(), 1));
}

bool close_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace

TEST_CASE("GLCM of a 1x1x4 line") {
  const auto glcm = build_glcm(levels_of({1, 1, 4}, {1, 1, 2, 2}));
  CHECK(glcm.count(1, 1) == 2);
  CHECK(glcm.count(1, 2) == 1);
  CHECK(glcm.count(2, 1) == 1);
  CHECK(glcm.count(2, 2) == 2);
  CHECK(glcm.total == 6);
  CHECK(glcm.probability(1, 1) == doctest::Approx(2.0 / 6.0));
  CHECK(texture_feature(glcm, TextureKey::GlcmIdn) == doctest::Approx(8.0 / 9.0).epsilon(1e-15));
}

TEST_CASE("GLCM of a constant ROI") {
  const auto glcm = build_glcm(constant({3, 3, 3}));
  CHECK(glcm.num_levels == 1);
  CHECK(glcm.probability(1, 1) == 1.0);
  CHECK(texture_feature(glcm, TextureKey::GlcmIdn) == 1.0);
}

TEST_CASE("isolated voxel gives an empty GLCM") {
  const auto glcm = build_glcm(levels_of({3, 3, 3}, {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1,
                                                     0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}));
  CHECK(glcm.empty());
  CHECK_THROWS_AS(texture_feature(glcm, TextureKey::GlcmIdn), Error);
  CHECK_THROWS_AS(build_glcm(levels_of({1, 1, 2}, {0, 0})), Error);
}

TEST_CASE("GLRLM runs") {
  const std::array<Offset, 1> axis{{{0, 0, 1}}};
  const auto m = build_glrlm(levels_of({1, 1, 4}, {1, 1, 2, 2}), axis);
  CHECK(m.total_runs == 2);
  CHECK(m.count(1, 2) == 1);
  CHECK(m.count(2, 2) == 1);

  const auto single = build_glrlm(levels_of({1, 1, 1}, {3}));
  CHECK(single.total_runs == 13);
  CHECK(single.count(3, 1) == 13);

  const auto constant_line = build_glrlm(constant({1, 1, 6}), axis);
  CHECK(constant_line.total_runs == 1);
  CHECK(constant_line.count(1, 6) == 1);
  CHECK(texture_feature(constant_line, TextureKey::GlrlmLongRunEmphasis) == 36.0);
}

TEST_CASE("long run emphasis of a single run of length 4") {
  Glrlm m;
  m.num_levels = 1;
  m.max_run = 4;
  m.counts = {0, 0, 0, 1};
  m.total_runs = 1;
  CHECK(texture_feature(m, TextureKey::GlrlmLongRunEmphasis) == 16.0);
}

TEST_CASE("GLDM dependence counts") {
  const auto cube = build_gldm(constant({2, 2, 2}), 0);
  CHECK(cube.count(1, 8) == 8);
  CHECK(cube.total == 8);
  CHECK(texture_feature(cube, TextureKey::GldmDependenceNonUniformityNormalized) == 1.0);
  CHECK(texture_feature(cube, TextureKey::GldmLargeDependenceEmphasis) == 64.0);

  const auto single = build_gldm(levels_of({1, 1, 1}, {2}), 0);
  CHECK(single.count(2, 1) == 1);

  // Tolerance >= Ng counts every in-ROI neighbour.
  const auto q = levels_of({1, 2, 2}, {1, 4, 2, 0});
  const auto sat = build_gldm(q, 4);
  CHECK(sat.count(1, 3) == 1);
  CHECK(sat.count(4, 3) == 1);
  CHECK(sat.count(2, 3) == 1);
  const auto strict = build_gldm(q, 0);
  CHECK(strict.count(1, 1) == 1);
  CHECK_THROWS_AS(build_gldm(q, -1), Error);
}

TEST_CASE("feature family mismatch is an error") {
  const auto q = constant({2, 2, 2});
  CHECK_THROWS_AS(texture_feature(build_glcm(q), TextureKey::GlrlmLongRunEmphasis), Error);
  CHECK_THROWS_AS(texture_feature(build_glrlm(q), TextureKey::GlcmIdn), Error);
  CHECK_THROWS_AS(texture_feature(build_gldm(q), TextureKey::GlcmIdn), Error);
  CHECK_THROWS_AS(canonical_key("glcm_Contrast"), Error);
  CHECK(canonical_key("glcm_Idn") == "original_glcm_Idn");
  CHECK(parse_texture_key("gldm_LargeDependenceEmphasis") == TextureKey::GldmLargeDependenceEmphasis);
  CHECK(!parse_texture_key("shape_Maximum3DDiameter"));
}

TEST_CASE("shape diameters") {
  RoiMask m({1, 4, 5});
  m(0, 0, 0) = 1;
  m(0, 3, 4) = 1;
  auto d = shape_diameters(m, Spacing{});
  CHECK(d.max3d == 5.0);
  CHECK(d.max2d_slice == 5.0);

  RoiMask one({2, 2, 2});
  one(1, 1, 1) = 1;
  d = shape_diameters(one, Spacing{});
  CHECK(d.max3d == 0.0);
  CHECK(d.max2d_slice == 0.0);

  RoiMask col({3, 1, 1});
  col(0, 0, 0) = 1;
  col(2, 0, 0) = 1;
  d = shape_diameters(col, Spacing{2.0, 1.0, 1.0});
  CHECK(d.max3d == 4.0);
  CHECK(d.max2d_slice == 0.0);

  CHECK_THROWS_AS(shape_diameters(RoiMask({2, 2, 2}), Spacing{}), Error);
}

TEST_CASE("shape diameters match an all-pairs scan") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed);
    const Dims dims{6, 7, 8};
    RoiMask m(dims);
    for (auto& v : m.voxels()) v = rng.uniform() < 0.4;
    m.voxels()[5] = 1;
    const Spacing sp{rng.uniform(0.5, 3), rng.uniform(0.5, 2), rng.uniform(0.5, 2)};
    double best3 = 0, best2 = 0;
    for (std::int64_t a = 0; a < static_cast<std::int64_t>(dims.count()); ++a)
      for (std::int64_t b = a + 1; b < static_cast<std::int64_t>(dims.count()); ++b) {
        if (!m.voxels()[a] || !m.voxels()[b]) continue;
        const auto az = a / 56, ay = a / 8 % 7, ax = a % 8;
        const auto bz = b / 56, by = b / 8 % 7, bx = b % 8;
        const double dz = (az - bz) * sp.z, dy = (ay - by) * sp.y, dx = (ax - bx) * sp.x;
        const double dist = std::sqrt(dz * dz + dy * dy + dx * dx);
        best3 = std::max(best3, dist);
        if (az == bz) best2 = std::max(best2, dist);
      }
    const auto d = shape_diameters(m, sp);
    CHECK(d.max3d == doctest::Approx(best3).epsilon(1e-12));
    CHECK(d.max2d_slice == doctest::Approx(best2).epsilon(1e-12));
  }
}

TEST_CASE("first-order maximum") {
  CtVolume v({1, 1, 4}, Spacing{}, std::vector<double>{-120, -80, -3, 50});
  RoiMask m(v.dims(), 1);
  m(0, 0, 3) = 0;
  CHECK(firstorder_max(v, m) == -3.0);
  CHECK(firstorder_max(v, RoiMask(v.dims(), 1)) == 50.0);
  CHECK(firstorder_max(CtVolume({2, 2, 2}, Spacing{}, -7.0), RoiMask({2, 2, 2}, 1)) == -7.0);
  CHECK_THROWS_AS(firstorder_max(v, RoiMask(v.dims())), Error);
}

TEST_CASE("extract_global key sets") {
  const auto s = synth_phantom(1, 3, {20, 20, 20});
  const auto defaults = extract_global(s);
  CHECK(defaults.size() == 4);
  CHECK(defaults.entries()[0].first == keys::kMax3dDiameter);
  CHECK(defaults.entries()[3].first == keys::kGlcmIdn);

  auto k = default_feature_keys();
  k.push_back("gldm_LargeDependenceEmphasis");
  const auto five = extract_global(s, k);
  CHECK(five.size() == 5);
  CHECK(five.get(keys::kGldmLde) >= 1.0);

  Sample empty = s;
  empty.mask = RoiMask(s.mask.dims());
  CHECK_THROWS_AS(extract_global(empty), Error);
}

TEST_CASE("texture features match the brute-force enumerator") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto q = oracle::random_quantized(seed, {8, 8, 8}, 2 + static_cast<int>(seed % 9), 0.6);
    const auto expect = oracle::brute_force_texture(q);
    const auto glcm = build_glcm(q);
    CHECK(glcm.total == expect.glcm_total);
    CHECK(close_rel(texture_feature(glcm, TextureKey::GlcmIdn), expect.idn, 1e-12));
    CHECK(close_rel(texture_feature(build_glrlm(q), TextureKey::GlrlmLongRunEmphasis), expect.lre, 1e-12));
    const auto gldm = build_gldm(q);
    CHECK(close_rel(texture_feature(gldm, TextureKey::GldmDependenceNonUniformityNormalized), expect.dnun, 1e-12));
    CHECK(close_rel(texture_feature(gldm, TextureKey::GldmLargeDependenceEmphasis), expect.lde, 1e-12));
  }
}

TEST_CASE("texture matrix invariants") {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const auto q = oracle::random_quantized(seed, {6, 7, 5}, 6, 0.7);
    const auto glcm = build_glcm(q);
    double sum = 0;
    for (int i = 1; i <= glcm.num_levels; ++i)
      for (int j = 1; j <= glcm.num_levels; ++j) {
        CHECK(glcm.count(i, j) == glcm.count(j, i));
        sum += glcm.probability(i, j);
      }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    const double idn = texture_feature(glcm, TextureKey::GlcmIdn);
    CHECK(idn > 0.0);
    CHECK(idn <= 1.0);

    const auto glrlm = build_glrlm(q);
    std::uint64_t runs = 0;
    for (auto c : glrlm.counts) runs += c;
    CHECK(runs == glrlm.total_runs);
    CHECK(texture_feature(glrlm, TextureKey::GlrlmLongRunEmphasis) >= 1.0);

    const auto gldm = build_gldm(q);
    CHECK(gldm.total == q.roi_count());
    const double dnun = texture_feature(gldm, TextureKey::GldmDependenceNonUniformityNormalized);
    CHECK(dnun > 0.0);
    CHECK(dnun <= 1.0);
    CHECK(texture_feature(gldm, TextureKey::GldmLargeDependenceEmphasis) >= 1.0);

    // Partition independence.
    CHECK(build_glcm(q, 3).counts == glcm.counts);
    CHECK(build_glrlm(q, kDirections, 4).counts == glrlm.counts);
    CHECK(build_gldm(q, 0, 5).counts == gldm.counts);
  }
}

TEST_CASE("texture features survive translation and affine intensity maps") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    Rng rng(seed);
    const Dims small{5, 5, 5}, big{9, 8, 10};
    CtVolume v(small, Spacing{});
    for (double& x : v.voxels()) x = std::round(rng.uniform(-250, 0));
    RoiMask m(small);
    for (auto& b : m.voxels()) b = rng.uniform() < 0.7;
    m.voxels()[62] = 1;
    m.voxels()[63] = 1;

    Sample a{"a", v, m, 0};
    const std::int64_t oz = rng.below(5), oy = rng.below(4), ox = rng.below(6);
    Sample b{"b", CtVolume(big, Spacing{}, 500.0), RoiMask(big), 0};
    for (std::int64_t z = 0; z < 5; ++z)
      for (std::int64_t y = 0; y < 5; ++y)
        for (std::int64_t x = 0; x < 5; ++x) {
          b.volume(z + oz, y + oy, x + ox) = v(z, y, x);
          b.mask(z + oz, y + oy, x + ox) = m(z, y, x);
        }
    const std::vector<std::string> tex{"glcm_Idn", "glrlm_LongRunEmphasis",
                                       "gldm_DependenceNonUniformityNormalized",
                                       "gldm_LargeDependenceEmphasis"};
    const auto fa = extract_global(a, tex);
    const auto fb = extract_global(b, tex);
    for (std::size_t i = 0; i < tex.size(); ++i)
      CHECK(fa.entries()[i].second == fb.entries()[i].second);

    // HU' = 2 HU + 37 with bin width 50 keeps every level.
    Sample c = a;
    for (double& x : c.volume.voxels()) x = 2 * x + 37;
    const auto qa = discretize(a.volume, a.mask, 25);
    const auto qc = discretize(c.volume, c.mask, 50);
    CHECK(qa.levels == qc.levels);
    CHECK(build_glcm(qa).counts == build_glcm(qc).counts);
    CHECK(build_glrlm(qa).counts == build_glrlm(qc).counts);
    CHECK(build_gldm(qa).counts == build_gldm(qc).counts);
  }
}
