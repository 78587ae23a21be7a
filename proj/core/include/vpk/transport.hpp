#pragma once

#include <cmath>

#include "vpk/grid.hpp"

namespace vpk {

enum class TransportLaw { nonrelativistic, relativistic };

struct TransportModel {
  TransportLaw law = TransportLaw::nonrelativistic;
  int mu = +1;  // sign of the force coupling
};

// a(v): identity, or v/sqrt(1+|v|^2) (speed-limited by 1).
inline Vec3 velocity_map(const Vec3& v, const TransportModel& model) {
  if (model.law == TransportLaw::nonrelativistic) return v;
  const double s = std::sqrt(1.0 + v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / s, v[1] / s, v[2] / s};
}

// Jacobian Da with (Da)_{ij} = d a_i / d v_j; identity for the identity law,
// (delta_ij - a_i a_j)/sqrt(1+|v|^2) for the relativistic map.
inline void velocity_jacobian(const Vec3& v, const TransportModel& model,
                              double J[3][3]) {
  if (model.law == TransportLaw::nonrelativistic) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) J[i][j] = (i == j) ? 1.0 : 0.0;
    return;
  }
  const double s2 = 1.0 + v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
  const double s = std::sqrt(s2);
  Vec3 a = {v[0] / s, v[1] / s, v[2] / s};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      J[i][j] = ((i == j) ? 1.0 : 0.0) / s - a[i] * a[j] / s;
}

// Largest |a(v)| over the velocity box (attained at a corner).
inline double max_speed(const PhaseGrid& g, const TransportModel& model) {
  Vec3 corner = {0.0, 0.0, 0.0};
  for (int ax = 0; ax < g.d; ++ax) corner[ax] = g.Vmax;
  const Vec3 a = velocity_map(corner, model);
  return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
}

}  // namespace vpk
