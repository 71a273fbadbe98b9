#include "radfuse/volume.hpp"

#include <algorithm>
#include <cmath>

#include "radfuse/error.hpp"

namespace radfuse {

std::string to_string(const Dims& dims) {
  return "(" + std::to_string(dims.depth) + "," + std::to_string(dims.height) +
         "," + std::to_string(dims.width) + ")";
}

namespace {

void check_geometry(const Dims& dims, const Spacing& spacing) {
  require(dims.positive(), ErrorKind::InvalidArgument,
          "volume dims must be positive, got " + to_string(dims));
  require(spacing.z > 0 && spacing.y > 0 && spacing.x > 0 &&
              std::isfinite(spacing.z) && std::isfinite(spacing.y) &&
              std::isfinite(spacing.x),
          ErrorKind::InvalidArgument, "voxel spacing must be positive");
}

}  // namespace

CtVolume::CtVolume(Dims dims, Spacing spacing, double fill)
    : dims_(dims), spacing_(spacing) {
  check_geometry(dims_, spacing_);
  require(std::isfinite(fill), ErrorKind::InvalidArgument, "fill value must be finite");
  voxels_.assign(dims_.count(), fill);
}

CtVolume::CtVolume(Dims dims, Spacing spacing, std::vector<double> voxels)
    : dims_(dims), spacing_(spacing), voxels_(std::move(voxels)) {
  check_geometry(dims_, spacing_);
  require(voxels_.size() == dims_.count(), ErrorKind::InvalidArgument,
          "voxel count " + std::to_string(voxels_.size()) + " does not match dims " +
              to_string(dims_));
  require(std::all_of(voxels_.begin(), voxels_.end(),
                      [](double v) { return std::isfinite(v); }),
          ErrorKind::InvalidArgument, "volume contains non-finite values");
}

RoiMask::RoiMask(Dims dims, std::uint8_t fill) : dims_(dims) {
  require(dims_.positive(), ErrorKind::InvalidArgument,
          "mask dims must be positive, got " + to_string(dims));
  require(fill <= 1, ErrorKind::InvalidArgument, "mask values must be 0 or 1");
  voxels_.assign(dims_.count(), fill);
}

RoiMask::RoiMask(Dims dims, std::vector<std::uint8_t> voxels)
    : dims_(dims), voxels_(std::move(voxels)) {
  require(dims_.positive(), ErrorKind::InvalidArgument,
          "mask dims must be positive, got " + to_string(dims));
  require(voxels_.size() == dims_.count(), ErrorKind::InvalidArgument,
          "mask voxel count does not match dims " + to_string(dims_));
  require(std::all_of(voxels_.begin(), voxels_.end(), [](auto v) { return v <= 1; }),
          ErrorKind::InvalidArgument, "mask values must be 0 or 1");
}

std::size_t RoiMask::count() const {
  return static_cast<std::size_t>(std::count(voxels_.begin(), voxels_.end(), 1));
}

RoiMask threshold_roi(const CtVolume& volume, double low, double high) {
  require(low <= high, ErrorKind::InvalidArgument, "threshold low must not exceed high");
  RoiMask mask(volume.dims());
  const auto in = volume.voxels();
  auto out = mask.voxels();
  for (std::size_t i = 0; i < in.size(); ++i)
    out[i] = (in[i] >= low && in[i] <= high) ? 1 : 0;
  return mask;
}

CtVolume normalize_intensities(const CtVolume& volume, double lo, double hi) {
  require(lo < hi, ErrorKind::InvalidArgument, "normalization window needs lo < hi");
  CtVolume out = volume;
  const double scale = 2.0 / (hi - lo);
  for (double& v : out.voxels()) {
    const double t = (v - lo) * scale - 1.0;
    v = std::clamp(t, -1.0, 1.0);
  }
  return out;
}

Sample pad_to_shape(const Sample& sample, Dims target) {
  const Dims& src = sample.volume.dims();
  require(sample.mask.dims() == src, ErrorKind::InvalidArgument,
          "sample volume and mask dims differ");
  require(src.depth <= target.depth && src.height <= target.height &&
              src.width <= target.width,
          ErrorKind::InvalidArgument,
          "cannot pad " + to_string(src) + " down to " + to_string(target));
  if (src == target) return sample;

  Sample out;
  out.id = sample.id;
  out.label = sample.label;
  out.volume = CtVolume(target, sample.volume.spacing(), 0.0);
  out.mask = RoiMask(target, 0);
  for (std::int64_t z = 0; z < src.depth; ++z)
    for (std::int64_t y = 0; y < src.height; ++y)
      for (std::int64_t x = 0; x < src.width; ++x) {
        out.volume(z, y, x) = sample.volume(z, y, x);
        out.mask(z, y, x) = sample.mask(z, y, x);
      }
  return out;
}

}  // namespace radfuse
