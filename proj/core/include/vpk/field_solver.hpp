#pragma once

#include <functional>
#include <vector>

#include "vpk/grid.hpp"

namespace vpk {

enum class FieldRegime { torus, free_space };

struct FieldSolveResult {
  SpatialField phi;
  std::vector<SpatialField> grad_phi;  // d components
  FieldRegime regime = FieldRegime::torus;
};

// Spectral inversion of Laplacian phi = rho - mean(rho) on the periodic box;
// phi has zero mean, grad by spectral differentiation.
FieldSolveResult solve_poisson_torus(const SpatialField& rho);

// Pointwise density evaluator for the free-space quadrature.
using DensityEvaluator = std::function<double(const Vec3&)>;

struct QuadratureSpec {
  int cells_per_axis = 64;  // midpoint rule over the support cube
};

// grad phi(y) = int grad E_d(y - z) rho(z) dz with the decaying fundamental
// solution (d=3 Newtonian; d=1,2 included for pipeline tests). Midpoint rule
// over [-R, R]^d; cells are offset so no quadrature node hits a target.
std::vector<Vec3> field_free_space(int d, const DensityEvaluator& rho,
                                   double support_radius,
                                   const QuadratureSpec& quad,
                                   const std::vector<Vec3>& targets);

// Potential variant (same quadrature), used by tests.
std::vector<double> potential_free_space(int d, const DensityEvaluator& rho,
                                         double support_radius,
                                         const QuadratureSpec& quad,
                                         const std::vector<Vec3>& targets);

// Free-space force on an auxiliary uniform lattice, solved once per call by
// zero-padded FFT convolution with the Newtonian kernel (d = 3), then queried
// by trilinear interpolation. The fast path for profile-equation runs.
class ForceLattice {
 public:
  // Lattice covers [-extent, extent]^3 with n nodes per axis (cell-centered).
  ForceLattice(double extent, int n);

  double extent() const { return extent_; }
  int n() const { return n_; }
  double spacing() const { return h_; }
  Vec3 node(int i, int j, int k) const;

  // Supply density values at every lattice node (row-major i,j,k), then solve.
  void solve(const std::vector<double>& rho_nodes);

  // Trilinear interpolation of grad phi; returns 0 outside the lattice hull
  // padded by the far-field continuation mass/(4 pi r^2) * direction.
  Vec3 force_at(const Vec3& y) const;

 private:
  double extent_;
  int n_;
  double h_;
  double mass_ = 0.0;
  std::vector<double> grad_[3];  // n^3 each
};

}  // namespace vpk
