#include "radfuse/localmap.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "radfuse/error.hpp"
#include "radfuse/parallel.hpp"
#include "radfuse/raw_io.hpp"

namespace radfuse {

namespace {

// Inclusive voxel box.
struct Box {
  std::int64_t lo[3];
  std::int64_t hi[3];
};

Box patch_box(const Dims& d, std::int64_t z, std::int64_t y, std::int64_t x, int p) {
  const std::int64_t ext[3] = {d.depth, d.height, d.width};
  const std::int64_t c[3] = {z, y, x};
  Box b;
  for (int a = 0; a < 3; ++a) {
    b.lo[a] = std::max<std::int64_t>(0, c[a] - p);
    b.hi[a] = std::min<std::int64_t>(ext[a] - 1, c[a] + p);
  }
  return b;
}

void check_inputs(const QuantizedVolume& q, const RoiMask& mask, int radius) {
  require(radius >= 1, ErrorKind::InvalidArgument, "patch radius must be >= 1");
  require(q.dims == mask.dims() && q.levels.size() == q.dims.count(), ErrorKind::InvalidArgument,
          "quantized volume and mask dims differ");
  const auto m = mask.voxels();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const bool inside = m[i] != 0;
    if (inside != (q.levels[i] > 0) || q.levels[i] > q.num_levels)
      fail(ErrorKind::InvalidArgument, "quantized levels do not match the ROI mask");
  }
}

LocalFeatureMap empty_map(const Dims& d, TextureKey key, int radius) {
  LocalFeatureMap out;
  out.dims = d;
  out.channels = {{std::string(texture_key_name(key)), radius}};
  out.values.assign(d.count(), 0.0);
  out.validity.assign(d.count(), 0);
  return out;
}

// Inclusive 3D prefix sums over a zero border in modular uint64 arithmetic.
// Box sums come out exact whenever the true sum fits in 64 bits, which lets
// callers pack several small counters into one value.
class PrefixSum {
 public:
  explicit PrefixSum(const Dims& d)
      : d_(d), sy_(d.width + 1), sz_((d.height + 1) * (d.width + 1)),
        s_(static_cast<std::size_t>((d.depth + 1) * sz_), 0) {}

  // value(i) for linear voxel index i.
  template <typename Value>
  void build(Value value, int workers) {
    parallel_for(static_cast<std::size_t>(d_.depth), workers, [&](std::size_t b, std::size_t e) {
      for (auto z = static_cast<std::int64_t>(b); z < static_cast<std::int64_t>(e); ++z) {
        std::uint64_t* slice = &s_[static_cast<std::size_t>((z + 1) * sz_)];
        for (std::int64_t y = 0; y < d_.height; ++y) {
          std::uint64_t row = 0;
          std::uint64_t* cur = slice + (y + 1) * sy_;
          const std::uint64_t* up = slice + y * sy_;
          const std::size_t base = d_.index(z, y, 0);
          for (std::int64_t x = 0; x < d_.width; ++x) {
            row += static_cast<std::uint64_t>(value(base + static_cast<std::size_t>(x)));
            cur[x + 1] = up[x + 1] + row;
          }
        }
      }
    });
    parallel_for(static_cast<std::size_t>(d_.height), workers, [&](std::size_t b, std::size_t e) {
      for (std::int64_t z = 2; z <= d_.depth; ++z)
        for (auto y = static_cast<std::int64_t>(b) + 1; y <= static_cast<std::int64_t>(e); ++y) {
          std::uint64_t* cur = &s_[static_cast<std::size_t>(z * sz_ + y * sy_)];
          const std::uint64_t* prev = cur - sz_;
          for (std::int64_t x = 1; x <= d_.width; ++x) cur[x] += prev[x];
        }
    });
  }

  std::uint64_t sum(const std::int64_t lo[3], const std::int64_t hi[3]) const {
    const std::int64_t z0 = lo[0] * sz_, z1 = (hi[0] + 1) * sz_;
    const std::int64_t y0 = lo[1] * sy_, y1 = (hi[1] + 1) * sy_;
    const std::int64_t x0 = lo[2], x1 = hi[2] + 1;
    auto at = [&](std::int64_t o) { return s_[static_cast<std::size_t>(o)]; };
    return at(z1 + y1 + x1) - at(z0 + y1 + x1) - at(z1 + y0 + x1) - at(z1 + y1 + x0) +
           at(z0 + y0 + x1) + at(z0 + y1 + x0) + at(z1 + y0 + x0) - at(z0 + y0 + x0);
  }

 private:
  Dims d_;
  std::int64_t sy_, sz_;
  std::vector<std::uint64_t> s_;
};

// Bit layout for counters bounded by the patch volume.
struct Packing {
  int bits;
  int per_word;
  std::uint64_t field;

  Packing(const Dims& d, int radius) {
    const auto side = static_cast<std::uint64_t>(2 * radius + 1);
    const std::uint64_t box_max = std::min<std::uint64_t>(side * side * side, d.count());
    bits = std::bit_width(box_max);
    per_word = 64 / bits;
    field = bits == 64 ? ~0ull : (1ull << bits) - 1;
  }
};

// Runs fn(z, y, x, linear index) over every voxel, partitioned by z.
template <typename Fn>
void for_each_voxel(const Dims& d, int workers, Fn fn) {
  parallel_for(static_cast<std::size_t>(d.depth), workers, [&](std::size_t b, std::size_t e) {
    for (auto z = static_cast<std::int64_t>(b); z < static_cast<std::int64_t>(e); ++z)
      for (std::int64_t y = 0; y < d.height; ++y)
        for (std::int64_t x = 0; x < d.width; ++x) fn(z, y, x, d.index(z, y, x));
  });
}

// Shrinks b to the voxels v with v + steps * o also inside b.
bool shift_box(Box& b, const Offset& o, std::int64_t steps) {
  const int shift[3] = {o.dz, o.dy, o.dx};
  for (int a = 0; a < 3; ++a) {
    if (shift[a] > 0) b.hi[a] -= steps;
    if (shift[a] < 0) b.lo[a] += steps;
    if (b.lo[a] > b.hi[a]) return false;
  }
  return true;
}

// glcm_Idn. For offset δ the pair (v, v+δ) lies in box B iff v lies in
// B ∩ (B - δ), itself a box, so per-difference pair counts over any patch
// are box sums of per-offset indicator volumes.
void idn_kernel(const QuantizedVolume& q, int radius, int workers,
                const std::vector<std::uint8_t>& valid, std::vector<double>& out) {
  const Dims& d = q.dims;
  const std::size_t n = d.count();
  const int ng = q.num_levels;
  const auto ung = static_cast<std::size_t>(ng);

  std::vector<std::vector<std::int16_t>> code(kDirections.size());
  std::vector<std::vector<char>> present(kDirections.size(), std::vector<char>(ung, 0));
  for (std::size_t k = 0; k < kDirections.size(); ++k) {
    const auto& o = kDirections[k];
    auto& c = code[k];
    c.assign(n, -1);
    for (std::int64_t z = 0; z < d.depth; ++z)
      for (std::int64_t y = 0; y < d.height; ++y)
        for (std::int64_t x = 0; x < d.width; ++x) {
          const auto a = q(z, y, x);
          if (a == 0 || !d.contains(z + o.dz, y + o.dy, x + o.dx)) continue;
          const auto b = q(z + o.dz, y + o.dy, x + o.dx);
          if (b == 0) continue;
          const auto diff = static_cast<std::int16_t>(std::abs(a - b));
          c[d.index(z, y, x)] = diff;
          present[k][static_cast<std::size_t>(diff)] = 1;
        }
  }

  const Packing pack(d, radius);
  std::vector<std::uint32_t> pairs(n * ung, 0);
  PrefixSum prefix(d);
  for (std::size_t k = 0; k < kDirections.size(); ++k) {
    const auto& c = code[k];
    for (int lo = 0; lo < ng; lo += pack.per_word) {
      const int hi = std::min(ng, lo + pack.per_word);
      if (std::none_of(present[k].begin() + lo, present[k].begin() + hi, [](char p) { return p; }))
        continue;
      prefix.build(
          [&](std::size_t i) -> std::uint64_t {
            const int diff = c[i];
            return diff >= lo && diff < hi ? 1ull << ((diff - lo) * pack.bits) : 0;
          },
          workers);
      for_each_voxel(d, workers, [&](std::int64_t z, std::int64_t y, std::int64_t x, std::size_t i) {
        if (!valid[i]) return;
        Box b = patch_box(d, z, y, x, radius);
        if (!shift_box(b, kDirections[k], 1)) return;
        std::uint64_t packed = prefix.sum(b.lo, b.hi);
        for (int diff = lo; packed != 0; ++diff, packed >>= pack.bits)
          pairs[i * ung + static_cast<std::size_t>(diff)] +=
              static_cast<std::uint32_t>(packed & pack.field);
      });
    }
  }

  std::vector<double> weight(ung);
  for (std::size_t diff = 0; diff < ung; ++diff) weight[diff] = reduce::idn_weight(diff, ng);
  for_each_voxel(d, workers, [&](std::int64_t, std::int64_t, std::int64_t, std::size_t i) {
    if (!valid[i]) return;
    // Zero counts would add exact zeros, so skipping them keeps the
    // accumulation bit-identical to reduce::idn.
    double num = 0.0;
    std::uint64_t total = 0;
    for (std::size_t diff = 0; diff < ung; ++diff) {
      const std::uint64_t count = pairs[i * ung + diff];
      if (count == 0) continue;
      num += static_cast<double>(2 * count) * weight[diff];
      total += 2 * count;
    }
    out[i] = total > 0 ? num / static_cast<double>(total) : 0.0;
  });
}

// glrlm_LongRunEmphasis. A run of length L holds L^2 ordered pairs (u, u')
// with u' = u + mδ, m >= 0, so inside a patch B
//   sum L^2 = sum_m (m ? 2 : 1) #{u in B ∩ (B - mδ) : fw(u) > m}
//   runs    = #{u in B : fw(u) > 0} - #{u in B ∩ (B - δ) : fw(u) > 1}
// where fw(u) is the forward run length from u. Both are box sums.
void lre_kernel(const QuantizedVolume& q, int radius, int workers,
                const std::vector<std::uint8_t>& valid, std::vector<double>& out) {
  const Dims& d = q.dims;
  const std::size_t n = d.count();
  const Packing pack(d, radius);
  const int max_step = 2 * radius;

  std::vector<std::uint64_t> sum(n, 0), runs(n, 0);
  std::vector<std::uint32_t> fw(n, 0);
  PrefixSum prefix(d);
  for (const auto& o : kDirections) {
    // Every offset is lexicographically positive, so u + δ follows u.
    for (std::int64_t z = d.depth - 1; z >= 0; --z)
      for (std::int64_t y = d.height - 1; y >= 0; --y)
        for (std::int64_t x = d.width - 1; x >= 0; --x) {
          const auto level = q(z, y, x);
          const std::size_t i = d.index(z, y, x);
          if (level == 0) {
            fw[i] = 0;
            continue;
          }
          const auto nz = z + o.dz, ny = y + o.dy, nx = x + o.dx;
          const bool continues = d.contains(nz, ny, nx) && q(nz, ny, nx) == level;
          fw[i] = continues ? fw[d.index(nz, ny, nx)] + 1 : 1;
        }

    for (int lo = 0; lo <= max_step; lo += pack.per_word) {
      const int hi = std::min(max_step + 1, lo + pack.per_word);
      prefix.build(
          [&](std::size_t i) {
            std::uint64_t v = 0;
            for (int m = lo; m < hi && static_cast<int>(fw[i]) > m; ++m)
              v |= 1ull << ((m - lo) * pack.bits);
            return v;
          },
          workers);
      for_each_voxel(d, workers, [&](std::int64_t z, std::int64_t y, std::int64_t x, std::size_t i) {
        if (!valid[i]) return;
        const Box patch = patch_box(d, z, y, x, radius);
        for (int m = lo; m < hi; ++m) {
          Box b = patch;
          if (!shift_box(b, o, m)) break;
          const std::uint64_t count = (prefix.sum(b.lo, b.hi) >> ((m - lo) * pack.bits)) & pack.field;
          sum[i] += m == 0 ? count : 2 * count;
          if (m == 0) runs[i] += count;
          if (m == 1) runs[i] -= count;
        }
      });
    }
  }
  for_each_voxel(d, workers, [&](std::int64_t, std::int64_t, std::int64_t, std::size_t i) {
    if (valid[i]) out[i] = reduce::long_run_emphasis(sum[i], runs[i]);
  });
}

// GLDM features. sim[u] holds one bit per 26-neighbour that is in the ROI
// and within alpha levels; neighbours across a patch face are masked off
// according to which faces u touches.
void gldm_kernel(const QuantizedVolume& q, TextureKey key, int radius, int alpha, int workers,
                 const std::vector<std::uint8_t>& valid, std::vector<double>& out) {
  const Dims& d = q.dims;
  std::vector<std::uint32_t> sim(d.count(), 0);
  for (std::int64_t z = 0; z < d.depth; ++z)
    for (std::int64_t y = 0; y < d.height; ++y)
      for (std::int64_t x = 0; x < d.width; ++x) {
        const auto level = q(z, y, x);
        if (level == 0) continue;
        std::uint32_t bits = 0;
        int bit = 0;
        for (int dz = -1; dz <= 1; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              if (dz == 0 && dy == 0 && dx == 0) continue;
              if (d.contains(z + dz, y + dy, x + dx)) {
                const auto other = q(z + dz, y + dy, x + dx);
                if (other != 0 && std::abs(other - level) <= alpha) bits |= 1u << bit;
              }
              ++bit;
            }
        sim[d.index(z, y, x)] = bits;
      }

  // allowed[faces]: bit 2a set = on the low face of axis a, bit 2a+1 = high face.
  std::uint32_t allowed[64];
  for (int faces = 0; faces < 64; ++faces) {
    std::uint32_t bits = 0;
    int bit = 0;
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dz == 0 && dy == 0 && dx == 0) continue;
          const int delta[3] = {dz, dy, dx};
          bool ok = true;
          for (int a = 0; a < 3; ++a) {
            if (delta[a] < 0 && (faces & (1 << (2 * a)))) ok = false;
            if (delta[a] > 0 && (faces & (1 << (2 * a + 1)))) ok = false;
          }
          if (ok) bits |= 1u << bit;
          ++bit;
        }
    allowed[faces] = bits;
  }

  for_each_voxel(d, workers, [&](std::int64_t z, std::int64_t y, std::int64_t x, std::size_t i) {
    if (!valid[i]) return;
    const Box b = patch_box(d, z, y, x, radius);
    std::uint64_t hist[kMaxDependence + 1] = {};
    for (auto uz = b.lo[0]; uz <= b.hi[0]; ++uz)
      for (auto uy = b.lo[1]; uy <= b.hi[1]; ++uy) {
        const int fzy = (uz == b.lo[0] ? 1 : 0) | (uz == b.hi[0] ? 2 : 0) |
                        (uy == b.lo[1] ? 4 : 0) | (uy == b.hi[1] ? 8 : 0);
        for (auto ux = b.lo[2]; ux <= b.hi[2]; ++ux) {
          const std::size_t u = d.index(uz, uy, ux);
          if (q.levels[u] == 0) continue;
          const int faces = fzy | (ux == b.lo[2] ? 16 : 0) | (ux == b.hi[2] ? 32 : 0);
          hist[1 + std::popcount(sim[u] & allowed[faces])] += 1;
        }
      }
    std::uint64_t nz = 0, sum = 0;
    for (int j = 1; j <= kMaxDependence; ++j) {
      nz += hist[j];
      sum += key == TextureKey::GldmLargeDependenceEmphasis
                 ? hist[j] * static_cast<std::uint64_t>(j * j)
                 : hist[j] * hist[j];
    }
    out[i] = key == TextureKey::GldmLargeDependenceEmphasis
                 ? reduce::large_dependence_emphasis(sum, nz)
                 : reduce::dependence_nonuniformity_normalized(sum, nz);
  });
}

}  // namespace

LocalFeatureMap local_feature_map(const QuantizedVolume& q, const RoiMask& mask, TextureKey key,
                                  int radius, const LocalMapOptions& options) {
  check_inputs(q, mask, radius);
  require(options.alpha_dep >= 0, ErrorKind::InvalidArgument, "dependence tolerance must be >= 0");
  const Dims& d = q.dims;
  auto out = empty_map(d, key, radius);
  if (mask.empty()) return out;

  PrefixSum roi(d);
  const auto m = mask.voxels();
  roi.build([&](std::size_t i) { return m[i] != 0 ? 1u : 0u; }, options.workers);
  for_each_voxel(d, options.workers, [&](std::int64_t z, std::int64_t y, std::int64_t x, std::size_t i) {
    const Box b = patch_box(d, z, y, x, radius);
    out.validity[i] = roi.sum(b.lo, b.hi) > 0 ? 1 : 0;
  });

  switch (key) {
    case TextureKey::GlcmIdn:
      idn_kernel(q, radius, options.workers, out.validity, out.values);
      break;
    case TextureKey::GlrlmLongRunEmphasis:
      lre_kernel(q, radius, options.workers, out.validity, out.values);
      break;
    case TextureKey::GldmDependenceNonUniformityNormalized:
    case TextureKey::GldmLargeDependenceEmphasis:
      gldm_kernel(q, key, radius, options.alpha_dep, options.workers, out.validity, out.values);
      break;
  }
  return out;
}

LocalFeatureMap naive_local_oracle(const QuantizedVolume& q, const RoiMask& mask, TextureKey key,
                                   int radius, int alpha_dep) {
  check_inputs(q, mask, radius);
  const Dims& d = q.dims;
  auto out = empty_map(d, key, radius);
  for (std::int64_t z = 0; z < d.depth; ++z)
    for (std::int64_t y = 0; y < d.height; ++y)
      for (std::int64_t x = 0; x < d.width; ++x) {
        const Box b = patch_box(d, z, y, x, radius);
        QuantizedVolume patch;
        patch.dims = {b.hi[0] - b.lo[0] + 1, b.hi[1] - b.lo[1] + 1, b.hi[2] - b.lo[2] + 1};
        patch.num_levels = q.num_levels;
        patch.bin_width = q.bin_width;
        patch.origin = q.origin;
        patch.levels.assign(patch.dims.count(), 0);
        bool any = false;
        for (auto pz = b.lo[0]; pz <= b.hi[0]; ++pz)
          for (auto py = b.lo[1]; py <= b.hi[1]; ++py)
            for (auto px = b.lo[2]; px <= b.hi[2]; ++px)
              if (mask(pz, py, px)) {
                patch.levels[patch.dims.index(pz - b.lo[0], py - b.lo[1], px - b.lo[2])] =
                    q(pz, py, px);
                any = true;
              }
        if (!any) continue;
        const auto i = d.index(z, y, x);
        out.validity[i] = 1;
        switch (key) {
          case TextureKey::GlcmIdn: {
            const auto glcm = build_glcm(patch);
            out.values[i] = glcm.empty() ? 0.0 : texture_feature(glcm, key);
            break;
          }
          case TextureKey::GlrlmLongRunEmphasis:
            out.values[i] = texture_feature(build_glrlm(patch), key);
            break;
          default:
            out.values[i] = texture_feature(build_gldm(patch, alpha_dep), key);
            break;
        }
      }
  return out;
}

LocalFeatureMap stack_local_maps(std::span<const LocalFeatureMap> maps) {
  require(!maps.empty(), ErrorKind::InvalidArgument, "nothing to stack");
  LocalFeatureMap out;
  out.dims = maps.front().dims;
  for (const auto& m : maps) {
    require(m.dims == out.dims, ErrorKind::InvalidArgument,
            "cannot stack maps of dims " + to_string(m.dims) + " and " + to_string(out.dims));
    out.channels.insert(out.channels.end(), m.channels.begin(), m.channels.end());
    out.values.insert(out.values.end(), m.values.begin(), m.values.end());
    out.validity.insert(out.validity.end(), m.validity.begin(), m.validity.end());
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::filesystem::path base_of(const std::filesystem::path& path) {
  auto base = path;
  if (base.extension() == ".vol" || base.extension() == ".volhdr") base.replace_extension();
  return base;
}

std::filesystem::path with_suffix(std::filesystem::path base, const char* suffix) {
  base += suffix;
  return base;
}

}  // namespace

void save_local_map(const std::filesystem::path& path, const LocalFeatureMap& map,
                    Spacing spacing) {
  const auto base = base_of(path);
  const Dims& d = map.dims;
  const std::vector<std::int64_t> dims{static_cast<std::int64_t>(map.channel_count()), d.depth,
                                       d.height, d.width};
  std::vector<unsigned char> bytes(map.values.size() * 4);
  for (std::size_t i = 0; i < map.values.size(); ++i)
    raw::store_le<float>(bytes.data() + 4 * i, static_cast<float>(map.values[i]));
  raw::write_header(with_suffix(base, ".volhdr"), {dims, spacing, "float32le"});
  raw::write_payload(with_suffix(base, ".vol"), bytes);

  raw::write_header(with_suffix(base, ".valid.volhdr"), {dims, spacing, "uint8"});
  raw::write_payload(with_suffix(base, ".valid.vol"),
                     std::vector<unsigned char>(map.validity.begin(), map.validity.end()));

  std::ofstream spec(with_suffix(base, ".channels"));
  if (!spec) fail(ErrorKind::Io, "cannot write channel spec for " + base.string());
  for (const auto& c : map.channels) spec << c.key << ' ' << c.radius << '\n';
}

LocalFeatureMap load_local_map(const std::filesystem::path& path) {
  const auto base = base_of(path);
  const auto h = raw::read_header(with_suffix(base, ".volhdr"));
  if (h.dtype != "float32le" || h.dims.size() != 4)
    fail(ErrorKind::Format, base.string() + ": local maps need dtype float32le and 4 dims");
  LocalFeatureMap map;
  map.dims = {h.dims[1], h.dims[2], h.dims[3]};
  const auto bytes = raw::read_payload(with_suffix(base, ".vol"), h.count() * 4);
  map.values.resize(h.count());
  for (std::size_t i = 0; i < map.values.size(); ++i)
    map.values[i] = raw::load_le<float>(bytes.data() + 4 * i);

  std::ifstream spec(with_suffix(base, ".channels"));
  if (!spec) fail(ErrorKind::Io, "missing channel spec for " + base.string());
  std::string key;
  int radius = 0;
  while (spec >> key >> radius) map.channels.push_back({key, radius});
  if (map.channels.size() != static_cast<std::size_t>(h.dims[0]))
    fail(ErrorKind::Format, base.string() + ": channel spec does not match dims");

  const auto valid_hdr = with_suffix(base, ".valid.volhdr");
  if (std::filesystem::exists(valid_hdr)) {
    const auto vh = raw::read_header(valid_hdr);
    if (vh.dims != h.dims || vh.dtype != "uint8")
      fail(ErrorKind::Format, base.string() + ": validity grid does not match map");
    const auto vb = raw::read_payload(with_suffix(base, ".valid.vol"), h.count());
    map.validity.assign(vb.begin(), vb.end());
  } else {
    map.validity.resize(map.values.size());
    for (std::size_t i = 0; i < map.values.size(); ++i) map.validity[i] = map.values[i] != 0.0;
  }
  return map;
}

}  // namespace radfuse
