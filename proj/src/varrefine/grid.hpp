#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "deskflow/image.hpp"

namespace deskflow::var {

/// Single-channel double raster used by the variational solver.
struct Grid {
  int w = 0;
  int h = 0;
  std::vector<double> v;

  Grid() = default;
  Grid(int width, int height, double fill = 0.0)
      : w(width), h(height), v(static_cast<std::size_t>(width) * height, fill) {}

  double& operator()(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
  double operator()(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
  double clamped(int x, int y) const { return (*this)(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); }

  /// Bilinear read with coordinates clamped to the raster.
  double sample(double x, double y) const {
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const int x0 = std::min(static_cast<int>(x), std::max(w - 2, 0));
    const int y0 = std::min(static_cast<int>(y), std::max(h - 2, 0));
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double ax = x - x0;
    const double ay = y - y0;
    return (1 - ay) * ((1 - ax) * (*this)(x0, y0) + ax * (*this)(x1, y0)) +
           ay * ((1 - ax) * (*this)(x0, y1) + ax * (*this)(x1, y1));
  }
};

Grid gaussian_blur(const Grid& g, double sigma);
Grid luminance(const Image& image);
Grid boundary_map(const Image& image);

}  // namespace deskflow::var
