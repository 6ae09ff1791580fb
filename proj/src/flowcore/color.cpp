#include <algorithm>
#include <cmath>
#include <numbers>

#include "deskflow/flow.hpp"

namespace deskflow {

const std::vector<std::array<int, 3>>& color_wheel() {
  static const std::vector<std::array<int, 3>> wheel = [] {
    constexpr int RY = 15, YG = 6, GC = 4, CB = 11, BM = 13, MR = 6;
    std::vector<std::array<int, 3>> w;
    w.reserve(RY + YG + GC + CB + BM + MR);
    for (int i = 0; i < RY; ++i) w.push_back({255, 255 * i / RY, 0});
    for (int i = 0; i < YG; ++i) w.push_back({255 - 255 * i / YG, 255, 0});
    for (int i = 0; i < GC; ++i) w.push_back({0, 255, 255 * i / GC});
    for (int i = 0; i < CB; ++i) w.push_back({0, 255 - 255 * i / CB, 255});
    for (int i = 0; i < BM; ++i) w.push_back({255 * i / BM, 0, 255});
    for (int i = 0; i < MR; ++i) w.push_back({255, 0, 255 - 255 * i / MR});
    return w;
  }();
  return wheel;
}

Image flow_to_color(const FlowField& flow, double max_magnitude) {
  flow.check_well_formed();
  if (max_magnitude <= 0.0) {
    max_magnitude = 0.0;
    for (std::size_t i = 0; i < flow.size(); ++i) {
      if (flow.valid[i]) max_magnitude = std::max(max_magnitude, std::hypot(flow.u[i], flow.v[i]));
    }
  }
  const auto& wheel = color_wheel();
  const int ncols = static_cast<int>(wheel.size());
  Image out(flow.width, flow.height, 3, 0.0f);
  for (int y = 0; y < flow.height; ++y) {
    for (int x = 0; x < flow.width; ++x) {
      const std::size_t i = flow.index(x, y);
      if (!flow.valid[i]) continue;
      double u = flow.u[i];
      double v = flow.v[i];
      if (max_magnitude > 0.0) {
        u /= max_magnitude;
        v /= max_magnitude;
      }
      const double rad = std::min(std::sqrt(u * u + v * v), 1.0);
      const double a = std::atan2(-v, -u) / std::numbers::pi;
      const double fk = (a + 1.0) / 2.0 * (ncols - 1);
      const int k0 = std::clamp(static_cast<int>(std::floor(fk)), 0, ncols - 1);
      const int k1 = (k0 + 1) % ncols;
      const double f = fk - k0;
      for (int c = 0; c < 3; ++c) {
        const double col0 = wheel[k0][c] / 255.0;
        const double col1 = wheel[k1][c] / 255.0;
        double col = (1.0 - f) * col0 + f * col1;
        col = 1.0 - rad * (1.0 - col);
        // Rounded to the 8-bit grid so that saturated colors land exactly on
        // wheel entries.
        out.at(c, y, x) = static_cast<float>(std::round(col * 255.0) / 255.0);
      }
    }
  }
  return out;
}

}  // namespace deskflow
