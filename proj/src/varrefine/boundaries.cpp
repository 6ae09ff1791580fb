#include <algorithm>
#include <cmath>

#include "deskflow/varrefine.hpp"
#include "grid.hpp"

namespace deskflow::var {

Grid gaussian_blur(const Grid& g, double sigma) {
  if (sigma <= 0.0) return g;
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= sum;
  Grid tmp(g.w, g.h), out(g.w, g.h);
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * g.clamped(x + i, y);
      tmp(x, y) = s;
    }
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * tmp.clamped(x, y + i);
      out(x, y) = s;
    }
  return out;
}

Grid luminance(const Image& image) {
  Grid g(image.width, image.height);
  if (image.channels >= 3) {
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x)
        g(x, y) = 0.299 * image.at(0, y, x) + 0.587 * image.at(1, y, x) + 0.114 * image.at(2, y, x);
  } else {
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) g(x, y) = image.at(0, y, x);
  }
  return g;
}

Grid boundary_map(const Image& image) {
  const Grid g = gaussian_blur(luminance(image), 1.0);
  Grid mag(g.w, g.h);
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x) {
      const double gx = (g.clamped(x + 1, y - 1) + 2 * g.clamped(x + 1, y) + g.clamped(x + 1, y + 1)) -
                        (g.clamped(x - 1, y - 1) + 2 * g.clamped(x - 1, y) + g.clamped(x - 1, y + 1));
      const double gy = (g.clamped(x - 1, y + 1) + 2 * g.clamped(x, y + 1) + g.clamped(x + 1, y + 1)) -
                        (g.clamped(x - 1, y - 1) + 2 * g.clamped(x, y - 1) + g.clamped(x + 1, y - 1));
      mag(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  std::vector<double> sorted = mag.v;
  const std::size_t k = static_cast<std::size_t>(std::floor(0.99 * (sorted.size() - 1)));
  std::nth_element(sorted.begin(), sorted.begin() + k, sorted.end());
  double norm = sorted[k];
  if (norm <= 0.0) norm = *std::max_element(mag.v.begin(), mag.v.end());
  // Blurred constant images keep tiny rounding residues; treat them as flat.
  if (norm <= 1e-9) return Grid(g.w, g.h);
  for (double& v : mag.v) v = std::min(1.0, v / norm);
  return mag;
}

}  // namespace deskflow::var

namespace deskflow {

Image detect_boundaries(const Image& image) {
  const var::Grid b = var::boundary_map(image);
  Image out(image.width, image.height, 1);
  for (std::size_t i = 0; i < b.v.size(); ++i) out.data[i] = static_cast<float>(b.v[i]);
  return out;
}

}  // namespace deskflow
