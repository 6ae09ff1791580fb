#pragma once

#include <array>

namespace deskflow {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Row-major 2x3 affine map: x' = a*x + b*y + c, y' = d*x + e*y + f.
struct Affine2 {
  std::array<double, 6> m{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

  static Affine2 identity() { return {}; }
  static Affine2 translation(double tx, double ty) { return {{1.0, 0.0, tx, 0.0, 1.0, ty}}; }

  Point2 apply(Point2 p) const { return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]}; }
  double determinant() const { return m[0] * m[4] - m[1] * m[3]; }
  /// Throws Error when the linear part is singular.
  Affine2 inverse() const;
};

/// (outer ∘ inner)(x) = outer(inner(x)).
Affine2 compose(const Affine2& outer, const Affine2& inner);

/// Zoom and rotation about a pivot, followed by a translation:
/// T(x) = center + zoom * R(rotation) * (x - center) + translation.
/// Rotation is in degrees, positive turning +x toward +y (clockwise on screen).
struct AffineTransform {
  double zoom = 1.0;
  double rotation_deg = 0.0;
  double tx = 0.0;
  double ty = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  Affine2 matrix() const;
  bool is_identity() const { return zoom == 1.0 && rotation_deg == 0.0 && tx == 0.0 && ty == 0.0; }
};

}  // namespace deskflow
