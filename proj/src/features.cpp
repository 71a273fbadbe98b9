#include "radfuse/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "radfuse/error.hpp"

namespace radfuse {

std::vector<std::string> default_feature_keys() {
  return {std::string(keys::kMax3dDiameter), std::string(keys::kMax2dDiameterSlice),
          std::string(keys::kFirstOrderMaximum), std::string(keys::kGlcmIdn)};
}

std::vector<std::string> all_feature_keys() {
  auto k = default_feature_keys();
  k.emplace_back(keys::kGlrlmLre);
  k.emplace_back(keys::kGldmDnun);
  k.emplace_back(keys::kGldmLde);
  return k;
}

std::string canonical_key(std::string_view key) {
  constexpr std::string_view prefix = "original_";
  for (const auto& k : all_feature_keys()) {
    if (key == k) return k;
    if (std::string_view(k).substr(prefix.size()) == key) return k;
  }
  fail(ErrorKind::InvalidArgument, "unknown feature key '" + std::string(key) + "'");
}

std::string_view texture_key_name(TextureKey key) {
  switch (key) {
    case TextureKey::GlcmIdn: return keys::kGlcmIdn;
    case TextureKey::GlrlmLongRunEmphasis: return keys::kGlrlmLre;
    case TextureKey::GldmDependenceNonUniformityNormalized: return keys::kGldmDnun;
    case TextureKey::GldmLargeDependenceEmphasis: return keys::kGldmLde;
  }
  return {};
}

std::optional<TextureKey> parse_texture_key(std::string_view key) {
  std::string canonical;
  try {
    canonical = canonical_key(key);
  } catch (const Error&) {
    return std::nullopt;
  }
  for (auto k : kTextureKeys)
    if (texture_key_name(k) == canonical) return k;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

struct Point {
  std::int64_t z, y, x;
};

std::vector<Point> surface_voxels(const RoiMask& mask) {
  const Dims& d = mask.dims();
  std::vector<Point> out;
  constexpr int nb[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
  for (std::int64_t z = 0; z < d.depth; ++z)
    for (std::int64_t y = 0; y < d.height; ++y)
      for (std::int64_t x = 0; x < d.width; ++x) {
        if (!mask(z, y, x)) continue;
        bool surface = false;
        for (const auto& n : nb) {
          const auto nz = z + n[0], ny = y + n[1], nx = x + n[2];
          if (!d.contains(nz, ny, nx) || !mask(nz, ny, nx)) {
            surface = true;
            break;
          }
        }
        if (surface) out.push_back({z, y, x});
      }
  return out;
}

// Keeps points that are extreme along every axis-aligned line listed in
// `axes`. A point strictly between two others on such a line is not a
// convex-hull vertex, so the maximum pairwise distance is unchanged.
std::vector<Point> line_extremes(const std::vector<Point>& pts, const Dims& d,
                                 std::initializer_list<int> axes) {
  std::vector<char> keep(pts.size(), 1);
  for (int axis : axes) {
    auto coord = [axis](const Point& p) { return axis == 0 ? p.z : axis == 1 ? p.y : p.x; };
    auto line = [axis, &d](const Point& p) -> std::size_t {
      if (axis == 0) return static_cast<std::size_t>(p.y * d.width + p.x);
      if (axis == 1) return static_cast<std::size_t>(p.z * d.width + p.x);
      return static_cast<std::size_t>(p.z * d.height + p.y);
    };
    const std::size_t lines = axis == 0   ? static_cast<std::size_t>(d.height * d.width)
                              : axis == 1 ? static_cast<std::size_t>(d.depth * d.width)
                                          : static_cast<std::size_t>(d.depth * d.height);
    std::vector<std::int64_t> lo(lines, std::numeric_limits<std::int64_t>::max());
    std::vector<std::int64_t> hi(lines, std::numeric_limits<std::int64_t>::min());
    for (const auto& p : pts) {
      lo[line(p)] = std::min(lo[line(p)], coord(p));
      hi[line(p)] = std::max(hi[line(p)], coord(p));
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto c = coord(pts[i]);
      if (c != lo[line(pts[i])] && c != hi[line(pts[i])]) keep[i] = 0;
    }
  }
  std::vector<Point> out;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (keep[i]) out.push_back(pts[i]);
  return out;
}

double max_distance_sq(const std::vector<Point>& pts, const Spacing& s) {
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double dz = static_cast<double>(pts[i].z - pts[j].z) * s.z;
      const double dy = static_cast<double>(pts[i].y - pts[j].y) * s.y;
      const double dx = static_cast<double>(pts[i].x - pts[j].x) * s.x;
      best = std::max(best, dz * dz + dy * dy + dx * dx);
    }
  return best;
}

}  // namespace

Diameters shape_diameters(const RoiMask& mask, Spacing spacing) {
  require(!mask.empty(), ErrorKind::Data, "shape diameters need a non-empty ROI");
  const auto surface = surface_voxels(mask);
  Diameters out;
  out.max3d = std::sqrt(max_distance_sq(line_extremes(surface, mask.dims(), {0, 1, 2}), spacing));

  const auto in_plane = line_extremes(surface, mask.dims(), {1, 2});
  double best = 0.0;
  std::vector<Point> slice;
  for (std::int64_t z = 0; z < mask.dims().depth; ++z) {
    slice.clear();
    for (const auto& p : in_plane)
      if (p.z == z) slice.push_back(p);
    best = std::max(best, max_distance_sq(slice, spacing));
  }
  out.max2d_slice = std::sqrt(best);
  return out;
}

double firstorder_max(const CtVolume& volume, const RoiMask& mask) {
  require(volume.dims() == mask.dims(), ErrorKind::InvalidArgument, "volume and mask dims differ");
  const auto v = volume.voxels();
  const auto m = mask.voxels();
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (m[i]) best = std::max(best, v[i]);
  require(std::isfinite(best), ErrorKind::Data, "first-order maximum needs a non-empty ROI");
  return best;
}

// ---------------------------------------------------------------------------

void FeatureVector::add(std::string key, double value) {
  require(!find(key), ErrorKind::InvalidArgument, "duplicate feature key '" + key + "'");
  require(std::isfinite(value), ErrorKind::Numeric, "feature '" + key + "' is not finite");
  entries_.emplace_back(std::move(key), value);
}

std::optional<double> FeatureVector::find(std::string_view key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  return std::nullopt;
}

double FeatureVector::get(std::string_view key) const {
  const auto v = find(key);
  require(v.has_value(), ErrorKind::InvalidArgument,
          "missing feature key '" + std::string(key) + "'");
  return *v;
}

FeatureVector extract_global(const Sample& sample, std::span<const std::string> requested,
                             const ExtractOptions& options) {
  require(sample.volume.dims() == sample.mask.dims(), ErrorKind::InvalidArgument,
          sample.id + ": volume and mask dims differ");
  require(!sample.mask.empty(), ErrorKind::Data, sample.id + ": empty ROI");

  std::optional<QuantizedVolume> q;
  std::optional<Glcm> glcm;
  std::optional<Glrlm> glrlm;
  std::optional<Gldm> gldm;
  std::optional<Diameters> diameters;
  auto quantized = [&]() -> const QuantizedVolume& {
    if (!q) q = discretize(sample.volume, sample.mask, options.bin_width);
    return *q;
  };

  FeatureVector out;
  for (const auto& raw : requested) {
    const auto key = canonical_key(raw);
    double value = 0.0;
    if (key == keys::kMax3dDiameter || key == keys::kMax2dDiameterSlice) {
      if (!diameters) diameters = shape_diameters(sample.mask, sample.volume.spacing());
      value = key == keys::kMax3dDiameter ? diameters->max3d : diameters->max2d_slice;
    } else if (key == keys::kFirstOrderMaximum) {
      value = firstorder_max(sample.volume, sample.mask);
    } else if (key == keys::kGlcmIdn) {
      if (!glcm) glcm = build_glcm(quantized(), options.workers);
      value = texture_feature(*glcm, TextureKey::GlcmIdn);
    } else if (key == keys::kGlrlmLre) {
      if (!glrlm) glrlm = build_glrlm(quantized(), kDirections, options.workers);
      value = texture_feature(*glrlm, TextureKey::GlrlmLongRunEmphasis);
    } else {
      if (!gldm) gldm = build_gldm(quantized(), options.alpha_dep, options.workers);
      value = texture_feature(*gldm, *parse_texture_key(key));
    }
    out.add(key, value);
  }
  return out;
}

FeatureVector extract_global(const Sample& sample, const ExtractOptions& options) {
  const auto k = default_feature_keys();
  return extract_global(sample, k, options);
}

}  // namespace radfuse
