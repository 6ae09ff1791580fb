#include "deskflow/image.hpp"

#include <algorithm>
#include <cmath>

#include "deskflow/errors.hpp"

namespace deskflow {

Image::Image(int w, int h, int c, float fill)
    : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {
  if (w < 0 || h < 0 || c < 0) throw ShapeError("negative image dimensions");
}

float Image::sample_bilinear(int c, double x, double y) const {
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * at(c, y0, x0) + fx * at(c, y0, x1);
  const double bottom = (1.0 - fx) * at(c, y1, x0) + fx * at(c, y1, x1);
  return static_cast<float>((1.0 - fy) * top + fy * bottom);
}

float Image::sample_bilinear_wrap(int c, double x, double y) const {
  const double fx0 = std::floor(x);
  const double fy0 = std::floor(y);
  const double fx = x - fx0;
  const double fy = y - fy0;
  auto wrap = [](long long v, int n) { return static_cast<int>(((v % n) + n) % n); };
  const int x0 = wrap(static_cast<long long>(fx0), width);
  const int y0 = wrap(static_cast<long long>(fy0), height);
  const int x1 = (x0 + 1) % width;
  const int y1 = (y0 + 1) % height;
  const double top = (1.0 - fx) * at(c, y0, x0) + fx * at(c, y0, x1);
  const double bottom = (1.0 - fx) * at(c, y1, x0) + fx * at(c, y1, x1);
  return static_cast<float>((1.0 - fy) * top + fy * bottom);
}

Image Image::to_gray() const {
  if (channels == 1) return *this;
  if (channels < 3) throw ShapeError("to_gray expects 1, 3 or 4 channels");
  Image out(width, height, 1);
  const std::size_t n = plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    out.data[i] = 0.299f * data[i] + 0.587f * data[n + i] + 0.114f * data[2 * n + i];
  }
  return out;
}

Image Image::crop(int x0, int y0, int w, int h) const {
  if (x0 < 0 || y0 < 0 || x0 + w > width || y0 + h > height) throw ShapeError("crop outside image");
  Image out(w, h, channels);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < h; ++y)
      std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(c * plane_size() + static_cast<std::size_t>(y0 + y) * width + x0), w, &out.at(c, y, 0));
  return out;
}

}  // namespace deskflow
