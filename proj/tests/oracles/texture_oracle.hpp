#pragma once

// Brute-force texture feature enumerators used only by tests. They share no
// code with the library's matrix builders.

#include <cstdint>
#include <vector>

#include "radfuse/quantize.hpp"

namespace oracle {

struct TextureValues {
  double idn = 0.0;
  double lre = 0.0;
  double dnun = 0.0;
  double lde = 0.0;
  std::uint64_t glcm_total = 0;
};

/// Pairs over all 26 signed offsets, runs by walking every line of every
/// direction, dependence by direct neighbourhood scan.
TextureValues brute_force_texture(const radfuse::QuantizedVolume& q, int alpha = 0);

/// Random quantized volume with a random ROI (roughly `fill` of voxels).
radfuse::QuantizedVolume random_quantized(std::uint64_t seed, radfuse::Dims dims, int levels,
                                          double fill);

}  // namespace oracle
