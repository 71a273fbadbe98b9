#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace radfuse {

/// Grid extent in voxels, slowest axis first (z, y, x).
struct Dims {
  std::int64_t depth = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(depth * height * width);
  }
  std::size_t index(std::int64_t z, std::int64_t y, std::int64_t x) const {
    return static_cast<std::size_t>((z * height + y) * width + x);
  }
  bool contains(std::int64_t z, std::int64_t y, std::int64_t x) const {
    return z >= 0 && y >= 0 && x >= 0 && z < depth && y < height && x < width;
  }
  bool positive() const { return depth > 0 && height > 0 && width > 0; }

  friend bool operator==(const Dims&, const Dims&) = default;
};

std::string to_string(const Dims& dims);

/// Voxel spacing in millimetres, (z, y, x).
struct Spacing {
  double z = 1.0;
  double y = 1.0;
  double x = 1.0;

  friend bool operator==(const Spacing&, const Spacing&) = default;
};

/// Dense CT intensity grid in Hounsfield units.
class CtVolume {
 public:
  CtVolume() = default;
  CtVolume(Dims dims, Spacing spacing, double fill = 0.0);
  CtVolume(Dims dims, Spacing spacing, std::vector<double> voxels);

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::span<const double> voxels() const { return voxels_; }
  std::span<double> voxels() { return voxels_; }

  double operator()(std::int64_t z, std::int64_t y, std::int64_t x) const {
    return voxels_[dims_.index(z, y, x)];
  }
  double& operator()(std::int64_t z, std::int64_t y, std::int64_t x) {
    return voxels_[dims_.index(z, y, x)];
  }

  friend bool operator==(const CtVolume&, const CtVolume&) = default;

 private:
  Dims dims_;
  Spacing spacing_;
  std::vector<double> voxels_;
};

/// Binary region of interest; every voxel is 0 or 1.
class RoiMask {
 public:
  RoiMask() = default;
  explicit RoiMask(Dims dims, std::uint8_t fill = 0);
  RoiMask(Dims dims, std::vector<std::uint8_t> voxels);

  const Dims& dims() const { return dims_; }
  std::span<const std::uint8_t> voxels() const { return voxels_; }
  std::span<std::uint8_t> voxels() { return voxels_; }

  std::uint8_t operator()(std::int64_t z, std::int64_t y, std::int64_t x) const {
    return voxels_[dims_.index(z, y, x)];
  }
  std::uint8_t& operator()(std::int64_t z, std::int64_t y, std::int64_t x) {
    return voxels_[dims_.index(z, y, x)];
  }

  std::size_t count() const;
  bool empty() const { return count() == 0; }

  friend bool operator==(const RoiMask&, const RoiMask&) = default;

 private:
  Dims dims_;
  std::vector<std::uint8_t> voxels_;
};

/// One labelled case. label 0 = paroxysmal, 1 = persistent.
struct Sample {
  std::string id;
  CtVolume volume;
  RoiMask mask;
  int label = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

inline constexpr double kFatLowHu = -250.0;
inline constexpr double kFatHighHu = 0.0;
inline constexpr double kWindowLowHu = -1024.0;
inline constexpr double kWindowHighHu = 1024.0;

/// mask = 1 iff low <= HU <= high.
RoiMask threshold_roi(const CtVolume& volume, double low = kFatLowHu,
                      double high = kFatHighHu);

/// Affine map lo -> -1, hi -> +1, clipped outside [lo, hi].
CtVolume normalize_intensities(const CtVolume& volume, double lo = kWindowLowHu,
                               double hi = kWindowHighHu);

/// Zero-pads volume and mask up to `target`, content kept at the low corner.
Sample pad_to_shape(const Sample& sample, Dims target);

// ---------------------------------------------------------------------------
// Synthetic phantoms

/// Generator knobs. Defaults are the calibrated values used by the test
/// suite and the CLI; the per-class entries are indexed by label.
struct PhantomParams {
  std::array<double, 2> shell_thickness_mm{2.6, 3.6};
  double shell_thickness_jitter_mm = 0.6;
  std::array<double, 2> texture_sigma_vox{1.6, 0.8};
  double texture_sigma_jitter = 0.15;
  std::array<double, 2> fat_mean_hu{-120.0, -95.0};
  double fat_mean_jitter_hu = 12.0;
  double fat_texture_amplitude_hu = 45.0;
  double atrium_fraction = 0.28;  // mean semi-axis as a fraction of the extent
  double atrium_jitter = 0.05;
  double blood_hu = 260.0;
  double tissue_hu = 45.0;
  double noise_hu = 12.0;
};

/// Deterministic in (label, seed, dims, params). Requires every dim >= 16.
Sample synth_phantom(int label, std::uint64_t seed, Dims dims,
                     const PhantomParams& params = {});

// ---------------------------------------------------------------------------
// File I/O
//
// A volume `<name>.vol` is raw little-endian voxels (x fastest, then y, then
// z) next to a `<name>.volhdr` key-value header carrying `dims`,
// `spacing_mm` and `dtype`.

/// `path` may name either the payload or the header; returns the pair.
std::pair<std::filesystem::path, std::filesystem::path> volume_paths(
    const std::filesystem::path& path);

CtVolume load_volume(const std::filesystem::path& path);
void save_volume(const std::filesystem::path& path, const CtVolume& volume);

RoiMask load_mask(const std::filesystem::path& path, Spacing* spacing = nullptr);
void save_mask(const std::filesystem::path& path, const RoiMask& mask,
               Spacing spacing = {});

struct ManifestRecord {
  std::string id;
  std::filesystem::path volume;
  std::optional<std::filesystem::path> mask;
  int label = 0;
};

/// One JSON object per line with fields id, volume, mask (optional), label.
/// Relative paths resolve against the manifest's directory.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    std::span<const ManifestRecord> records);

/// Loads the volume; the mask is read when present, thresholded otherwise.
Sample load_sample(const ManifestRecord& record);

}  // namespace radfuse
