#include "vpk/grid.hpp"

#include <cmath>
#include <numbers>

namespace vpk {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::vector<double> fft_wavenumbers(int N, double period) {
  std::vector<double> xi(N);
  const double base = 2.0 * std::numbers::pi / period;
  for (int m = 0; m < N; ++m) {
    int ms = (m < N / 2) ? m : m - N;
    xi[m] = base * ms;
  }
  return xi;
}

std::size_t ipow(std::size_t b, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

}  // namespace

double PhaseGrid::cell_x() const { return std::pow(dx, d); }
double PhaseGrid::cell_v() const { return std::pow(dv, d); }
double PhaseGrid::box_volume() const {
  return std::pow(Lx, d) * std::pow(2.0 * Vmax, d);
}

void PhaseGrid::decode_x(std::size_t lin, MultiIndex& out) const {
  out = {0, 0, 0};
  for (int ax = d - 1; ax >= 0; --ax) {
    out[ax] = static_cast<int>(lin % static_cast<std::size_t>(Nx));
    lin /= static_cast<std::size_t>(Nx);
  }
}

void PhaseGrid::decode_v(std::size_t lin, MultiIndex& out) const {
  out = {0, 0, 0};
  for (int ax = d - 1; ax >= 0; --ax) {
    out[ax] = static_cast<int>(lin % static_cast<std::size_t>(Nv));
    lin /= static_cast<std::size_t>(Nv);
  }
}

void PhaseGrid::x_coord(std::size_t lin, Vec3& out) const {
  MultiIndex idx;
  decode_x(lin, idx);
  out = {0.0, 0.0, 0.0};
  for (int ax = 0; ax < d; ++ax) out[ax] = x_nodes[idx[ax]];
}

void PhaseGrid::v_coord(std::size_t lin, Vec3& out) const {
  MultiIndex idx;
  decode_v(lin, idx);
  out = {0.0, 0.0, 0.0};
  for (int ax = 0; ax < d; ++ax) out[ax] = v_nodes[idx[ax]];
}

PhaseGrid build_grid(int d, int Nx, int Nv, double Lx, double Vmax) {
  if (d < 1 || d > 3) throw GridError("build_grid: d must be 1, 2, or 3");
  if (!is_pow2(Nx) || Nx < 4)
    throw GridError("build_grid: Nx must be a power of two >= 4 (FFT-compatible grid)");
  if (!is_pow2(Nv) || Nv < 4)
    throw GridError("build_grid: Nv must be a power of two >= 4 (FFT-compatible grid)");
  if (!(Lx > 0.0)) throw GridError("build_grid: Lx must be positive");
  if (!(Vmax > 0.0)) throw GridError("build_grid: Vmax must be positive");

  PhaseGrid g;
  g.d = d;
  g.Nx = Nx;
  g.Nv = Nv;
  g.Lx = Lx;
  g.Vmax = Vmax;
  g.dx = Lx / Nx;
  g.dv = 2.0 * Vmax / Nv;
  g.x_nodes.resize(Nx);
  for (int i = 0; i < Nx; ++i) g.x_nodes[i] = -0.5 * Lx + i * g.dx;
  g.v_nodes.resize(Nv);
  for (int j = 0; j < Nv; ++j) g.v_nodes[j] = -Vmax + j * g.dv;
  g.xi_x = fft_wavenumbers(Nx, Lx);
  g.xi_v = fft_wavenumbers(Nv, 2.0 * Vmax);
  g.nx_total = ipow(static_cast<std::size_t>(Nx), d);
  g.nv_total = ipow(static_cast<std::size_t>(Nv), d);
  return g;
}

void validate_finite(const PhaseField& f, const char* what) {
  for (double x : f.values)
    if (!std::isfinite(x)) throw GridError(std::string(what) + ": non-finite entry");
}

void validate_finite(const SpatialField& u, const char* what) {
  for (double x : u.values)
    if (!std::isfinite(x)) throw GridError(std::string(what) + ": non-finite entry");
}

SpatialField density(const PhaseField& f) {
  SpatialField rho(f.grid);
  const std::size_t nx = f.grid.nx_total;
  for (std::size_t j = 0; j < f.grid.nv_total; ++j) {
    const double* s = f.slice(j);
    for (std::size_t i = 0; i < nx; ++i) rho.values[i] += s[i];
  }
  const double w = f.grid.cell_v();
  for (double& r : rho.values) r *= w;
  return rho;
}

double pairwise_sum(const double* data, std::size_t n) {
  if (n <= 32) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += data[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

namespace {

double sup_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

double sup_norm(const SpatialField& u) { return sup_abs(u.values); }
double sup_norm(const PhaseField& f) { return sup_abs(f.values); }

double l2_norm(const SpatialField& u, const SpatialWeightFn& weight) {
  const PhaseGrid& g = u.grid;
  std::vector<double> sq(u.values.size());
  Vec3 x;
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    double w = 1.0;
    if (weight) {
      g.x_coord(i, x);
      w = weight(x);
    }
    const double t = w * u.values[i];
    sq[i] = t * t;
  }
  return std::sqrt(g.cell_x() * pairwise_sum(sq.data(), sq.size()));
}

double l2_norm(const PhaseField& f, const PhaseWeightFn& weight) {
  const PhaseGrid& g = f.grid;
  const std::size_t nx = g.nx_total;
  std::vector<double> slice_sums(g.nv_total);
  std::vector<double> sq(nx);
  Vec3 x, v;
  for (std::size_t j = 0; j < g.nv_total; ++j) {
    const double* s = f.slice(j);
    if (weight) g.v_coord(j, v);
    for (std::size_t i = 0; i < nx; ++i) {
      double w = 1.0;
      if (weight) {
        g.x_coord(i, x);
        w = weight(x, v);
      }
      const double t = w * s[i];
      sq[i] = t * t;
    }
    slice_sums[j] = pairwise_sum(sq.data(), nx);
  }
  return std::sqrt(g.cell_x() * g.cell_v() *
                   pairwise_sum(slice_sums.data(), slice_sums.size()));
}

}  // namespace vpk
