#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "radfuse/quantize.hpp"
#include "radfuse/volume.hpp"

namespace radfuse {

struct Offset {
  int dz, dy, dx;
};

/// The 13 unique 3D neighbour offsets (26-connectivity modulo sign).
inline constexpr std::array<Offset, 13> kDirections{{
    {0, 0, 1},   {0, 1, -1}, {0, 1, 0},  {0, 1, 1},  {1, -1, -1},
    {1, -1, 0},  {1, -1, 1}, {1, 0, -1}, {1, 0, 0},  {1, 0, 1},
    {1, 1, -1},  {1, 1, 0},  {1, 1, 1},
}};

enum class TextureKey {
  GlcmIdn,
  GlrlmLongRunEmphasis,
  GldmDependenceNonUniformityNormalized,
  GldmLargeDependenceEmphasis,
};

inline constexpr std::array<TextureKey, 4> kTextureKeys{
    TextureKey::GlcmIdn, TextureKey::GlrlmLongRunEmphasis,
    TextureKey::GldmDependenceNonUniformityNormalized,
    TextureKey::GldmLargeDependenceEmphasis};

namespace keys {
inline constexpr std::string_view kMax3dDiameter = "original_shape_Maximum3DDiameter";
inline constexpr std::string_view kMax2dDiameterSlice = "original_shape_Maximum2DDiameterSlice";
inline constexpr std::string_view kFirstOrderMaximum = "original_firstorder_Maximum";
inline constexpr std::string_view kGlcmIdn = "original_glcm_Idn";
inline constexpr std::string_view kGlrlmLre = "original_glrlm_LongRunEmphasis";
inline constexpr std::string_view kGldmDnun = "original_gldm_DependenceNonUniformityNormalized";
inline constexpr std::string_view kGldmLde = "original_gldm_LargeDependenceEmphasis";
}  // namespace keys

/// Canonical key set selected by the LASSO stage of the reference pipeline.
std::vector<std::string> default_feature_keys();
std::vector<std::string> all_feature_keys();

/// Accepts canonical names and the same names without the `original_` prefix.
std::string canonical_key(std::string_view key);
std::optional<TextureKey> parse_texture_key(std::string_view key);
std::string_view texture_key_name(TextureKey key);  // canonical

// ---------------------------------------------------------------------------
// Texture matrices. Levels are 1-based in the accessors.

struct Glcm {
  int num_levels = 0;
  std::vector<std::uint64_t> counts;  // num_levels^2, row-major, symmetric
  std::uint64_t total = 0;

  std::uint64_t count(int i, int j) const {
    return counts[static_cast<std::size_t>(i - 1) * num_levels + (j - 1)];
  }
  double probability(int i, int j) const {
    return static_cast<double>(count(i, j)) / static_cast<double>(total);
  }
  bool empty() const { return total == 0; }
};

struct Glrlm {
  int num_levels = 0;
  int max_run = 0;
  std::vector<std::uint64_t> counts;  // num_levels x max_run
  std::uint64_t total_runs = 0;

  std::uint64_t count(int level, int run) const {
    return counts[static_cast<std::size_t>(level - 1) * max_run + (run - 1)];
  }
};

inline constexpr int kMaxDependence = 27;

struct Gldm {
  int num_levels = 0;
  int alpha = 0;
  std::vector<std::uint64_t> counts;  // num_levels x 27, dependence 1..27
  std::uint64_t total = 0;

  std::uint64_t count(int level, int dependence) const {
    return counts[static_cast<std::size_t>(level - 1) * kMaxDependence + (dependence - 1)];
  }
};

/// Symmetric co-occurrences over all 13 offsets, accumulated into one matrix.
/// An ROI without any in-ROI neighbour pair yields an empty matrix.
Glcm build_glcm(const QuantizedVolume& q, int workers = 1);

/// Maximal equal-level runs along each direction; out-of-ROI voxels break runs.
Glrlm build_glrlm(const QuantizedVolume& q,
                  std::span<const Offset> directions = kDirections, int workers = 1);

/// Dependence = 1 + number of in-ROI 26-neighbours within `alpha` levels.
Gldm build_gldm(const QuantizedVolume& q, int alpha = 0, int workers = 1);

double texture_feature(const Glcm& m, TextureKey key);
double texture_feature(const Glrlm& m, TextureKey key);
double texture_feature(const Gldm& m, TextureKey key);

// Feature values from integer reductions of the matrices. Every code path
// (global extraction, local maps, their oracle) funnels through these so the
// floating-point evaluation order is shared.
namespace reduce {

inline double idn_weight(std::size_t d, int num_levels) {
  return 1.0 / (1.0 + static_cast<double>(d) / static_cast<double>(num_levels));
}

/// diff[d] = sum of GLCM counts with |i - j| = d, for d in [0, num_levels).
double idn(std::span<const std::uint64_t> diff, std::uint64_t total, int num_levels);
double long_run_emphasis(std::uint64_t sum_len_sq, std::uint64_t runs);
double dependence_nonuniformity_normalized(std::uint64_t sum_sq_column, std::uint64_t nz);
double large_dependence_emphasis(std::uint64_t sum_dep_sq, std::uint64_t nz);

}  // namespace reduce

// ---------------------------------------------------------------------------
// Shape and first order

struct Diameters {
  double max3d = 0.0;
  double max2d_slice = 0.0;
};

/// Largest centre-to-centre distance between surface voxels (6-connectivity),
/// in millimetres; `max2d_slice` restricts pairs to one axial slice.
Diameters shape_diameters(const RoiMask& mask, Spacing spacing);

double firstorder_max(const CtVolume& volume, const RoiMask& mask);

// ---------------------------------------------------------------------------

/// Ordered feature-key -> value map with unique keys.
class FeatureVector {
 public:
  void add(std::string key, double value);
  double get(std::string_view key) const;
  std::optional<double> find(std::string_view key) const;
  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, double>> entries_;
};

struct ExtractOptions {
  double bin_width = kDefaultBinWidth;
  int alpha_dep = 0;
  int workers = 1;
};

/// Quantizes once, builds each needed matrix once, returns the requested
/// keys in request order (canonical names).
FeatureVector extract_global(const Sample& sample, std::span<const std::string> keys,
                             const ExtractOptions& options = {});
FeatureVector extract_global(const Sample& sample, const ExtractOptions& options = {});

}  // namespace radfuse
