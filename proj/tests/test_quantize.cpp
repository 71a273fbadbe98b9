#include <doctest.h>

#include <cmath>

#include "radfuse/error.hpp"
#include "radfuse/quantize.hpp"
#include "radfuse/random.hpp"

using namespace radfuse;

namespace {

CtVolume line(std::vector<double> values) {
  const auto n = static_cast<std::int64_t>(values.size());
  return CtVolume({1, 1, n}, Spacing{}, std::move(values));
}

}  // namespace

TEST_CASE("constant ROI quantizes to a single level") {
  const auto v = line({-250, -250, -250});
  const auto q = discretize(v, RoiMask(v.dims(), 1), 25);
  CHECK(q.num_levels == 1);
  for (auto l : q.levels) CHECK(l == 1);
}

TEST_CASE("floor convention at bin boundaries") {
  const auto v = line({-250, -226, -225});
  const auto q = discretize(v, RoiMask(v.dims(), 1), 25);
  CHECK(q.levels[1] == 1);
  CHECK(q.levels[2] == 2);
}

TEST_CASE("levels of a spread ROI") {
  const auto v = line({-250, -200, -100, 0});
  const auto q = discretize(v, RoiMask(v.dims(), 1), 25);
  CHECK(q.levels == std::vector<std::int32_t>{1, 3, 7, 11});
  CHECK(q.num_levels == 11);
  CHECK(q.origin == -250.0);
  CHECK(q.bin_width == 25.0);
}

TEST_CASE("out-of-ROI voxels get level 0") {
  const auto v = line({-250, 500, -100});
  RoiMask m(v.dims(), 1);
  m(0, 0, 1) = 0;
  const auto q = discretize(v, m, 25);
  CHECK(q.levels == std::vector<std::int32_t>{1, 0, 7});
  CHECK(q.roi_count() == 2);
}

TEST_CASE("discretize errors") {
  const auto v = line({1, 2});
  CHECK_THROWS_AS(discretize(v, RoiMask(v.dims(), 0), 25), Error);
  CHECK_THROWS_AS(discretize(v, RoiMask(v.dims(), 1), 0), Error);
  CHECK_THROWS_AS(discretize(v, RoiMask(v.dims(), 1), -3), Error);
}

TEST_CASE("quantization properties on random volumes") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const Dims dims{4, 5, 6};
    CtVolume v(dims, Spacing{});
    RoiMask m(dims);
    for (std::size_t i = 0; i < dims.count(); ++i) {
      v.voxels()[i] = std::round(rng.uniform(-300, 100));
      m.voxels()[i] = rng.uniform() < 0.7;
    }
    m.voxels()[0] = 1;
    const double width = 5.0 + static_cast<double>(rng.below(30));
    const auto q = discretize(v, m, width);

    // Ng bound.
    double lo = 1e9, hi = -1e9;
    for (std::size_t i = 0; i < dims.count(); ++i)
      if (m.voxels()[i]) {
        lo = std::min(lo, v.voxels()[i]);
        hi = std::max(hi, v.voxels()[i]);
      }
    CHECK(q.num_levels <= static_cast<int>(std::floor((hi - lo) / width)) + 1);

    // Monotone and in range.
    for (std::size_t i = 0; i < dims.count(); ++i) {
      if (!m.voxels()[i]) {
        CHECK(q.levels[i] == 0);
        continue;
      }
      CHECK(q.levels[i] >= 1);
      CHECK(q.levels[i] <= q.num_levels);
      for (std::size_t j = 0; j < dims.count(); ++j)
        if (m.voxels()[j] && v.voxels()[i] <= v.voxels()[j]) CHECK(q.levels[i] <= q.levels[j]);
    }

    // Shift invariance.
    CtVolume shifted = v;
    const double c = std::round(rng.uniform(-500, 500));
    for (double& x : shifted.voxels()) x += c;
    CHECK(discretize(shifted, m, width).levels == q.levels);
  }
}
