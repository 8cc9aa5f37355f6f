#pragma once

#include <array>
#include <cmath>

namespace nps {

// Dense symmetric 3x3 helpers used for covariance algebra. Matrices are
// stored row-major as array<double, 9>; symmetry is assumed, not enforced.
using Mat3 = std::array<double, 9>;
using Vec3 = std::array<double, 3>;

inline double det3(const Mat3& a) {
  return a[0] * (a[4] * a[8] - a[5] * a[7]) -
         a[1] * (a[3] * a[8] - a[5] * a[6]) +
         a[2] * (a[3] * a[7] - a[4] * a[6]);
}

// Adjugate-based inverse. Returns false when the determinant is too small
// relative to the matrix scale for the inverse to be trustworthy.
inline bool invert3(const Mat3& a, Mat3& out) {
  const double d = det3(a);
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::fabs(v));
  if (!(std::fabs(d) > 1e-14 * scale * scale * scale) || !std::isfinite(d)) {
    return false;
  }
  const double inv_d = 1.0 / d;
  out[0] = (a[4] * a[8] - a[5] * a[7]) * inv_d;
  out[1] = (a[2] * a[7] - a[1] * a[8]) * inv_d;
  out[2] = (a[1] * a[5] - a[2] * a[4]) * inv_d;
  out[3] = (a[5] * a[6] - a[3] * a[8]) * inv_d;
  out[4] = (a[0] * a[8] - a[2] * a[6]) * inv_d;
  out[5] = (a[2] * a[3] - a[0] * a[5]) * inv_d;
  out[6] = (a[3] * a[7] - a[4] * a[6]) * inv_d;
  out[7] = (a[1] * a[6] - a[0] * a[7]) * inv_d;
  out[8] = (a[0] * a[4] - a[1] * a[3]) * inv_d;
  return true;
}

inline Vec3 mat3_mul_vec(const Mat3& a, const Vec3& x) {
  return {a[0] * x[0] + a[1] * x[1] + a[2] * x[2],
          a[3] * x[0] + a[4] * x[1] + a[5] * x[2],
          a[6] * x[0] + a[7] * x[1] + a[8] * x[2]};
}

// Positive definiteness via leading principal minors (Sylvester).
inline bool is_positive_definite3(const Mat3& a) {
  if (!(a[0] > 0.0)) return false;
  const double m2 = a[0] * a[4] - a[1] * a[3];
  if (!(m2 > 0.0)) return false;
  return det3(a) > 0.0;
}

}  // namespace nps
