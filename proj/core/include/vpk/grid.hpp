#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vpk {

// Multi-index over at most 3 axes; unused trailing entries are zero.
using MultiIndex = std::array<int, 3>;
using Vec3 = std::array<double, 3>;

inline int mi_order(const MultiIndex& a) { return a[0] + a[1] + a[2]; }

struct GridError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Uniform tensor grid for one phase-space box:
//   position nodes  x_i = -Lx/2 + i*dx,  i = 0..Nx-1, per axis
//   velocity nodes  v_j = -Vmax + j*dv,  j = 0..Nv-1, per axis
struct PhaseGrid {
  int d = 0;
  int Nx = 0;
  int Nv = 0;
  double Lx = 0.0;
  double Vmax = 0.0;
  double dx = 0.0;
  double dv = 0.0;
  std::vector<double> x_nodes;  // size Nx, one axis
  std::vector<double> v_nodes;  // size Nv, one axis
  std::vector<double> xi_x;     // position wavenumbers, FFT index order
  std::vector<double> xi_v;     // velocity wavenumbers, FFT index order

  std::size_t nx_total = 0;  // Nx^d
  std::size_t nv_total = 0;  // Nv^d

  double cell_x() const;   // dx^d
  double cell_v() const;   // dv^d
  double box_volume() const;

  // Decode linear index into per-axis indices (row-major, axis 0 slowest).
  void decode_x(std::size_t lin, MultiIndex& out) const;
  void decode_v(std::size_t lin, MultiIndex& out) const;
  void x_coord(std::size_t lin, Vec3& out) const;
  void v_coord(std::size_t lin, Vec3& out) const;
};

PhaseGrid build_grid(int d, int Nx, int Nv, double Lx, double Vmax);

// Phase-space density sampled on a PhaseGrid.
// Storage: velocity index outermost, position innermost, so each velocity
// slice is a contiguous block of Nx^d values.
struct PhaseField {
  PhaseGrid grid;
  std::vector<double> values;  // size nv_total * nx_total

  PhaseField() = default;
  explicit PhaseField(const PhaseGrid& g)
      : grid(g), values(g.nv_total * g.nx_total, 0.0) {}

  double* slice(std::size_t v_lin) { return values.data() + v_lin * grid.nx_total; }
  const double* slice(std::size_t v_lin) const {
    return values.data() + v_lin * grid.nx_total;
  }
};

struct SpatialField {
  PhaseGrid grid;
  std::vector<double> values;  // size nx_total

  SpatialField() = default;
  explicit SpatialField(const PhaseGrid& g) : grid(g), values(g.nx_total, 0.0) {}
};

void validate_finite(const PhaseField& f, const char* what);
void validate_finite(const SpatialField& u, const char* what);

// rho(x) = dv^d * sum_v f(x,v)
SpatialField density(const PhaseField& f);

// Deterministic blocked pairwise sum; result independent of thread count.
double pairwise_sum(const double* data, std::size_t n);

double sup_norm(const SpatialField& u);
double sup_norm(const PhaseField& f);

// l2_norm = sqrt(cell_volume * sum weight(x,v)^2 u(x,v)^2); weight optional.
// Weights are evaluated at node coordinates.
using PhaseWeightFn = std::function<double(const Vec3& x, const Vec3& v)>;
using SpatialWeightFn = std::function<double(const Vec3& x)>;

double l2_norm(const SpatialField& u, const SpatialWeightFn& weight = nullptr);
double l2_norm(const PhaseField& f, const PhaseWeightFn& weight = nullptr);

}  // namespace vpk
