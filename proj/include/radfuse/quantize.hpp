#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "radfuse/volume.hpp"

namespace radfuse {

inline constexpr double kDefaultBinWidth = 25.0;

/// Gray-level indices over a volume. Level 0 marks voxels outside the ROI;
/// ROI voxels carry levels in [1, num_levels].
struct QuantizedVolume {
  Dims dims;
  std::vector<std::int32_t> levels;
  int num_levels = 0;
  double bin_width = kDefaultBinWidth;
  double origin = 0.0;  // minimum ROI intensity

  std::int32_t operator()(std::int64_t z, std::int64_t y, std::int64_t x) const {
    return levels[dims.index(z, y, x)];
  }
  std::size_t roi_count() const;
};

/// Fixed-bin-width discretization anchored at the ROI minimum:
/// level = floor((HU - min_roi) / bin_width) + 1.
QuantizedVolume discretize(const CtVolume& volume, const RoiMask& mask,
                           double bin_width = kDefaultBinWidth);

}  // namespace radfuse
