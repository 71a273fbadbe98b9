#include "radfuse/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "radfuse/error.hpp"

namespace radfuse {

std::size_t QuantizedVolume::roi_count() const {
  return static_cast<std::size_t>(
      std::count_if(levels.begin(), levels.end(), [](auto l) { return l > 0; }));
}

QuantizedVolume discretize(const CtVolume& volume, const RoiMask& mask, double bin_width) {
  require(bin_width > 0 && std::isfinite(bin_width), ErrorKind::InvalidArgument,
          "bin width must be positive");
  require(volume.dims() == mask.dims(), ErrorKind::InvalidArgument,
          "volume and mask dims differ");
  const auto hu = volume.voxels();
  const auto roi = mask.voxels();

  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hu.size(); ++i)
    if (roi[i]) lo = std::min(lo, hu[i]);
  require(std::isfinite(lo), ErrorKind::Data, "cannot discretize an empty ROI");

  QuantizedVolume q;
  q.dims = volume.dims();
  q.bin_width = bin_width;
  q.origin = lo;
  q.levels.assign(hu.size(), 0);
  for (std::size_t i = 0; i < hu.size(); ++i) {
    if (!roi[i]) continue;
    const auto level = static_cast<std::int32_t>(std::floor((hu[i] - lo) / bin_width)) + 1;
    q.levels[i] = level;
    q.num_levels = std::max(q.num_levels, static_cast<int>(level));
  }
  return q;
}

}  // namespace radfuse
