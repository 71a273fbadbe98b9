#include <algorithm>
#include <cstdlib>

#include "radfuse/error.hpp"
#include "radfuse/features.hpp"
#include "radfuse/parallel.hpp"

namespace radfuse {

namespace {

void require_roi(const QuantizedVolume& q) {
  require(q.num_levels > 0 && q.roi_count() > 0, ErrorKind::Data,
          "texture matrix needs a non-empty ROI");
}

// Runs fn(z_begin, z_end, accumulator) over z slabs with one accumulator per
// slab, then sums them. Integer counts make the result partition-independent.
template <typename Fn>
std::vector<std::uint64_t> accumulate_slabs(const QuantizedVolume& q, std::size_t size,
                                            int workers, Fn fn) {
  const auto slabs = static_cast<std::size_t>(std::max(1, workers));
  std::vector<std::vector<std::uint64_t>> partial(slabs, std::vector<std::uint64_t>(size, 0));
  const auto depth = static_cast<std::size_t>(q.dims.depth);
  parallel_for(slabs, workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t s = b; s < e; ++s)
      fn(static_cast<std::int64_t>(depth * s / slabs),
         static_cast<std::int64_t>(depth * (s + 1) / slabs), partial[s]);
  });
  std::vector<std::uint64_t> total(size, 0);
  for (const auto& p : partial)
    for (std::size_t i = 0; i < size; ++i) total[i] += p[i];
  return total;
}

}  // namespace

Glcm build_glcm(const QuantizedVolume& q, int workers) {
  require_roi(q);
  const int ng = q.num_levels;
  const Dims& d = q.dims;
  Glcm m;
  m.num_levels = ng;
  m.counts = accumulate_slabs(
      q, static_cast<std::size_t>(ng) * ng, workers,
      [&](std::int64_t z0, std::int64_t z1, std::vector<std::uint64_t>& acc) {
        for (std::int64_t z = z0; z < z1; ++z)
          for (std::int64_t y = 0; y < d.height; ++y)
            for (std::int64_t x = 0; x < d.width; ++x) {
              const auto a = q(z, y, x);
              if (a == 0) continue;
              for (const auto& o : kDirections) {
                const auto nz = z + o.dz, ny = y + o.dy, nx = x + o.dx;
                if (!d.contains(nz, ny, nx)) continue;
                const auto b = q(nz, ny, nx);
                if (b == 0) continue;
                acc[static_cast<std::size_t>(a - 1) * ng + (b - 1)] += 1;
                acc[static_cast<std::size_t>(b - 1) * ng + (a - 1)] += 1;
              }
            }
      });
  for (auto c : m.counts) m.total += c;
  return m;
}

Glrlm build_glrlm(const QuantizedVolume& q, std::span<const Offset> directions, int workers) {
  require_roi(q);
  const Dims& d = q.dims;
  const int ng = q.num_levels;
  const int max_run = static_cast<int>(std::max({d.depth, d.height, d.width}));
  Glrlm m;
  m.num_levels = ng;
  m.max_run = max_run;
  m.counts = accumulate_slabs(
      q, static_cast<std::size_t>(ng) * max_run, workers,
      [&](std::int64_t z0, std::int64_t z1, std::vector<std::uint64_t>& acc) {
        // Each run is attributed to the slab holding its first voxel.
        for (std::int64_t z = z0; z < z1; ++z)
          for (std::int64_t y = 0; y < d.height; ++y)
            for (std::int64_t x = 0; x < d.width; ++x) {
              const auto level = q(z, y, x);
              if (level == 0) continue;
              for (const auto& o : directions) {
                const auto pz = z - o.dz, py = y - o.dy, px = x - o.dx;
                if (d.contains(pz, py, px) && q(pz, py, px) == level) continue;
                int len = 1;
                auto cz = z + o.dz, cy = y + o.dy, cx = x + o.dx;
                while (d.contains(cz, cy, cx) && q(cz, cy, cx) == level) {
                  ++len;
                  cz += o.dz;
                  cy += o.dy;
                  cx += o.dx;
                }
                acc[static_cast<std::size_t>(level - 1) * max_run + (len - 1)] += 1;
              }
            }
      });
  for (auto c : m.counts) m.total_runs += c;
  return m;
}

Gldm build_gldm(const QuantizedVolume& q, int alpha, int workers) {
  require_roi(q);
  require(alpha >= 0, ErrorKind::InvalidArgument, "dependence tolerance must be >= 0");
  const Dims& d = q.dims;
  const int ng = q.num_levels;
  Gldm m;
  m.num_levels = ng;
  m.alpha = alpha;
  m.counts = accumulate_slabs(
      q, static_cast<std::size_t>(ng) * kMaxDependence, workers,
      [&](std::int64_t z0, std::int64_t z1, std::vector<std::uint64_t>& acc) {
        for (std::int64_t z = z0; z < z1; ++z)
          for (std::int64_t y = 0; y < d.height; ++y)
            for (std::int64_t x = 0; x < d.width; ++x) {
              const auto level = q(z, y, x);
              if (level == 0) continue;
              int dep = 1;
              for (int dz = -1; dz <= 1; ++dz)
                for (int dy = -1; dy <= 1; ++dy)
                  for (int dx = -1; dx <= 1; ++dx) {
                    if (dz == 0 && dy == 0 && dx == 0) continue;
                    if (!d.contains(z + dz, y + dy, x + dx)) continue;
                    const auto other = q(z + dz, y + dy, x + dx);
                    if (other != 0 && std::abs(other - level) <= alpha) ++dep;
                  }
              acc[static_cast<std::size_t>(level - 1) * kMaxDependence + (dep - 1)] += 1;
            }
      });
  for (auto c : m.counts) m.total += c;
  return m;
}

namespace reduce {

double idn(std::span<const std::uint64_t> diff, std::uint64_t total, int num_levels) {
  double num = 0.0;
  for (std::size_t k = 0; k < diff.size(); ++k)
    num += static_cast<double>(diff[k]) * idn_weight(k, num_levels);
  return num / static_cast<double>(total);
}

double long_run_emphasis(std::uint64_t sum_len_sq, std::uint64_t runs) {
  return static_cast<double>(sum_len_sq) / static_cast<double>(runs);
}

double dependence_nonuniformity_normalized(std::uint64_t sum_sq_column, std::uint64_t nz) {
  const double n = static_cast<double>(nz);
  return static_cast<double>(sum_sq_column) / (n * n);
}

double large_dependence_emphasis(std::uint64_t sum_dep_sq, std::uint64_t nz) {
  return static_cast<double>(sum_dep_sq) / static_cast<double>(nz);
}

}  // namespace reduce

namespace {

[[noreturn]] void family_mismatch(TextureKey key, std::string_view family) {
  fail(ErrorKind::InvalidArgument,
       std::string(texture_key_name(key)) + " is not a " + std::string(family) + " feature");
}

}  // namespace

double texture_feature(const Glcm& m, TextureKey key) {
  if (key != TextureKey::GlcmIdn) family_mismatch(key, "GLCM");
  require(!m.empty(), ErrorKind::Data, "GLCM has no co-occurrences");
  std::vector<std::uint64_t> diff(static_cast<std::size_t>(m.num_levels), 0);
  for (int i = 1; i <= m.num_levels; ++i)
    for (int j = 1; j <= m.num_levels; ++j) diff[std::abs(i - j)] += m.count(i, j);
  return reduce::idn(diff, m.total, m.num_levels);
}

double texture_feature(const Glrlm& m, TextureKey key) {
  if (key != TextureKey::GlrlmLongRunEmphasis) family_mismatch(key, "GLRLM");
  require(m.total_runs > 0, ErrorKind::Data, "GLRLM has no runs");
  std::uint64_t sum = 0;
  for (int i = 1; i <= m.num_levels; ++i)
    for (int j = 1; j <= m.max_run; ++j)
      sum += m.count(i, j) * static_cast<std::uint64_t>(j) * static_cast<std::uint64_t>(j);
  return reduce::long_run_emphasis(sum, m.total_runs);
}

double texture_feature(const Gldm& m, TextureKey key) {
  require(m.total > 0, ErrorKind::Data, "GLDM is empty");
  switch (key) {
    case TextureKey::GldmDependenceNonUniformityNormalized: {
      std::uint64_t sum = 0;
      for (int j = 1; j <= kMaxDependence; ++j) {
        std::uint64_t column = 0;
        for (int i = 1; i <= m.num_levels; ++i) column += m.count(i, j);
        sum += column * column;
      }
      return reduce::dependence_nonuniformity_normalized(sum, m.total);
    }
    case TextureKey::GldmLargeDependenceEmphasis: {
      std::uint64_t sum = 0;
      for (int i = 1; i <= m.num_levels; ++i)
        for (int j = 1; j <= kMaxDependence; ++j)
          sum += m.count(i, j) * static_cast<std::uint64_t>(j * j);
      return reduce::large_dependence_emphasis(sum, m.total);
    }
    default:
      family_mismatch(key, "GLDM");
  }
}

}  // namespace radfuse
