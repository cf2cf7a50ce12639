#pragma once

// False-color rendering of float maps as 8-bit RGB PNG. Values are min-max
// normalized and mapped through a fixed piecewise-linear ramp:
//   0.00 (0,0,4)  0.25 (81,18,124)  0.50 (183,55,121)  0.75 (252,137,97)  1.00 (252,253,191)
// The minimum maps to the first stop and the maximum to the last; a constant
// map renders entirely in the first stop.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "stereokit/grid.hpp"
#include "stereokit/imgio.hpp"

namespace stereokit {

using Rgb8 = std::array<std::uint8_t, 3>;

inline constexpr std::array<Rgb8, 5> kColormapStops = {{
    {0, 0, 4},
    {81, 18, 124},
    {183, 55, 121},
    {252, 137, 97},
    {252, 253, 191},
}};

inline Rgb8 colormap(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const double pos = t * (kColormapStops.size() - 1);
  const std::size_t i = std::min(static_cast<std::size_t>(pos), kColormapStops.size() - 2);
  const double f = pos - static_cast<double>(i);
  Rgb8 out;
  for (int k = 0; k < 3; ++k)
    out[k] = static_cast<std::uint8_t>(
        std::lround(kColormapStops[i][k] * (1.0 - f) + kColormapStops[i + 1][k] * f));
  return out;
}

inline std::vector<std::uint8_t> render_colormap(const FloatMap& map) {
  require_finite(map, "emit_visualization");
  std::vector<std::uint8_t> rgb(map.size() * 3);
  if (map.empty()) return rgb;
  const auto [lo_it, hi_it] = std::minmax_element(map.data().begin(), map.data().end());
  const double lo = *lo_it, range = *hi_it - *lo_it;
  for (std::size_t i = 0; i < map.size(); ++i) {
    const Rgb8 c = colormap(range > 0.0 ? (map[i] - lo) / range : 0.0);
    std::copy(c.begin(), c.end(), rgb.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }
  return rgb;
}

inline void emit_visualization(const FloatMap& map, const std::filesystem::path& path) {
  store_png_rgb8(render_colormap(map), map.height(), map.width(), path);
}

}  // namespace stereokit
