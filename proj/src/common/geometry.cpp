#include "deskflow/geometry.hpp"

#include <cmath>
#include <numbers>

#include "deskflow/errors.hpp"

namespace deskflow {

Affine2 Affine2::inverse() const {
  const double det = determinant();
  if (det == 0.0 || !std::isfinite(det)) throw Error("affine map is not invertible");
  const double ia = m[4] / det;
  const double ib = -m[1] / det;
  const double id = -m[3] / det;
  const double ie = m[0] / det;
  return {{ia, ib, -(ia * m[2] + ib * m[5]), id, ie, -(id * m[2] + ie * m[5])}};
}

Affine2 compose(const Affine2& outer, const Affine2& inner) {
  const auto& a = outer.m;
  const auto& b = inner.m;
  return {{a[0] * b[0] + a[1] * b[3], a[0] * b[1] + a[1] * b[4], a[0] * b[2] + a[1] * b[5] + a[2],
           a[3] * b[0] + a[4] * b[3], a[3] * b[1] + a[4] * b[4], a[3] * b[2] + a[4] * b[5] + a[5]}};
}

Affine2 AffineTransform::matrix() const {
  const double theta = rotation_deg * std::numbers::pi / 180.0;
  const double c = zoom * std::cos(theta);
  const double s = zoom * std::sin(theta);
  // center + M (x - center) + t
  return {{c, -s, cx - (c * cx - s * cy) + tx, s, c, cy - (s * cx + c * cy) + ty}};
}

}  // namespace deskflow
