#include <algorithm>
#include <cmath>

#include "radfuse/error.hpp"
#include "radfuse/random.hpp"
#include "radfuse/volume.hpp"

namespace radfuse {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Separable Gaussian blur, zero-flux (clamped) borders.
void blur_axis(std::vector<double>& field, const Dims& d, int axis, double sigma) {
  if (sigma <= 0) return;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    sum += kernel[k + radius];
  }
  for (double& k : kernel) k /= sum;

  const std::int64_t extent[3] = {d.depth, d.height, d.width};
  const std::int64_t n = extent[axis];
  std::vector<double> line(n), out(n);
  std::int64_t e[3] = {d.depth, d.height, d.width};
  e[axis] = 1;
  for (std::int64_t a = 0; a < e[0]; ++a)
    for (std::int64_t b = 0; b < e[1]; ++b)
      for (std::int64_t c = 0; c < e[2]; ++c) {
        auto idx = [&](std::int64_t t) {
          std::int64_t p[3] = {a, b, c};
          p[axis] = t;
          return d.index(p[0], p[1], p[2]);
        };
        for (std::int64_t t = 0; t < n; ++t) line[t] = field[idx(t)];
        for (std::int64_t t = 0; t < n; ++t) {
          double acc = 0;
          for (int k = -radius; k <= radius; ++k) {
            const auto s = std::clamp<std::int64_t>(t + k, 0, n - 1);
            acc += kernel[k + radius] * line[s];
          }
          out[t] = acc;
        }
        for (std::int64_t t = 0; t < n; ++t) field[idx(t)] = out[t];
      }
}

}  // namespace

Sample synth_phantom(int label, std::uint64_t seed, Dims dims, const PhantomParams& params) {
  require(label == 0 || label == 1, ErrorKind::InvalidArgument, "label must be 0 or 1");
  require(dims.depth >= 16 && dims.height >= 16 && dims.width >= 16,
          ErrorKind::InvalidArgument, "phantom dims must be at least 16 per axis");

  std::uint64_t key = splitmix(seed);
  key = splitmix(key ^ static_cast<std::uint64_t>(label));
  key = splitmix(key ^ static_cast<std::uint64_t>(dims.depth));
  key = splitmix(key ^ static_cast<std::uint64_t>(dims.height));
  key = splitmix(key ^ static_cast<std::uint64_t>(dims.width));
  Rng rng(key);

  const double extent[3] = {static_cast<double>(dims.depth), static_cast<double>(dims.height),
                            static_cast<double>(dims.width)};
  double center[3], semi[3];
  for (int a = 0; a < 3; ++a) {
    center[a] = 0.5 * (extent[a] - 1) + rng.uniform(-0.05, 0.05) * extent[a];
    const double frac = std::max(0.1, params.atrium_fraction + params.atrium_jitter * rng.normal());
    semi[a] = frac * extent[a];
  }
  const double thickness =
      std::max(1.0, params.shell_thickness_mm[label] +
                        params.shell_thickness_jitter_mm * rng.normal());
  const double sigma =
      std::max(0.3, params.texture_sigma_vox[label] * (1.0 + params.texture_sigma_jitter * rng.normal()));
  const double fat_mean = params.fat_mean_hu[label] + params.fat_mean_jitter_hu * rng.normal();

  // Spacing is isotropic 1 mm, so the shell thickness is in voxels too.
  double outer[3];
  for (int a = 0; a < 3; ++a) outer[a] = semi[a] + thickness;

  std::vector<double> texture(dims.count());
  for (double& t : texture) t = rng.normal();
  for (int axis = 0; axis < 3; ++axis) blur_axis(texture, dims, axis, sigma);
  double mean = 0, sq = 0;
  for (double t : texture) mean += t;
  mean /= static_cast<double>(texture.size());
  for (double t : texture) sq += (t - mean) * (t - mean);
  const double sd = std::sqrt(sq / static_cast<double>(texture.size()));
  for (double& t : texture) t = (t - mean) / (sd > 0 ? sd : 1.0);

  Sample s;
  s.id = "phantom_c" + std::to_string(label) + "_s" + std::to_string(seed);
  s.label = label;
  s.volume = CtVolume(dims, Spacing{}, 0.0);
  for (std::int64_t z = 0; z < dims.depth; ++z)
    for (std::int64_t y = 0; y < dims.height; ++y)
      for (std::int64_t x = 0; x < dims.width; ++x) {
        const double p[3] = {static_cast<double>(z), static_cast<double>(y), static_cast<double>(x)};
        double r_in = 0, r_out = 0;
        for (int a = 0; a < 3; ++a) {
          const double dz = p[a] - center[a];
          r_in += dz * dz / (semi[a] * semi[a]);
          r_out += dz * dz / (outer[a] * outer[a]);
        }
        const auto i = dims.index(z, y, x);
        const double noise = params.noise_hu * rng.normal();
        double hu;
        if (r_in <= 1.0) {
          hu = std::max(5.0, params.blood_hu + noise);
        } else if (r_out <= 1.0) {
          hu = std::clamp(fat_mean + params.fat_texture_amplitude_hu * texture[i], -245.0, -5.0);
        } else {
          hu = std::max(5.0, params.tissue_hu + noise);
        }
        s.volume.voxels()[i] = std::nearbyint(hu);
      }
  s.mask = threshold_roi(s.volume);
  return s;
}

}  // namespace radfuse
