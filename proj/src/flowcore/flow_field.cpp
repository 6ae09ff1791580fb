#include <algorithm>

#include "deskflow/errors.hpp"
#include "deskflow/flow.hpp"

namespace deskflow {

FlowField::FlowField(int w, int h, double fill_u, double fill_v)
    : width(w), height(h), u(static_cast<std::size_t>(w) * h, fill_u),
      v(static_cast<std::size_t>(w) * h, fill_v), valid(static_cast<std::size_t>(w) * h, 1) {
  if (w < 0 || h < 0) throw ShapeError("negative flow dimensions");
}

std::size_t FlowField::valid_count() const {
  return static_cast<std::size_t>(std::count_if(valid.begin(), valid.end(), [](auto m) { return m != 0; }));
}

void FlowField::check_well_formed() const {
  if (width < 0 || height < 0 || u.size() != size() || v.size() != size() || valid.size() != size())
    throw ShapeError("flow field buffers do not match " + std::to_string(width) + "x" + std::to_string(height));
}

FlowField FlowField::crop(int x0, int y0, int w, int h) const {
  if (x0 < 0 || y0 < 0 || x0 + w > width || y0 + h > height) throw ShapeError("crop outside flow field");
  FlowField out(w, h);
  for (int y = 0; y < h; ++y) {
    const std::size_t src = index(x0, y0 + y);
    const std::size_t dst = out.index(0, y);
    std::copy_n(u.begin() + src, w, out.u.begin() + dst);
    std::copy_n(v.begin() + src, w, out.v.begin() + dst);
    std::copy_n(valid.begin() + src, w, out.valid.begin() + dst);
  }
  return out;
}

}  // namespace deskflow
