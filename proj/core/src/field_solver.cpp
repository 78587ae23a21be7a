#include "vpk/field_solver.hpp"

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "vpk/fft.hpp"

namespace vpk {

FieldSolveResult solve_poisson_torus(const SpatialField& rho) {
  const PhaseGrid& g = rho.grid;
  FieldSolveResult res;
  res.regime = FieldRegime::torus;
  res.phi = SpatialField(g);
  res.grad_phi.assign(g.d, SpatialField(g));

  std::vector<cplx> spec(g.nx_total);
  for (std::size_t i = 0; i < g.nx_total; ++i) spec[i] = rho.values[i];
  dft_cube(spec.data(), g.d, g.Nx, -1);

  // phi_hat = -rho_hat/|xi|^2, zero mode removed (neutralizing background).
  std::vector<cplx> phi_spec(g.nx_total);
  std::vector<cplx> grad_spec;
  const int N = g.Nx;
  for (std::size_t lin = 0; lin < g.nx_total; ++lin) {
    std::size_t r = lin;
    double xi2 = 0.0;
    for (int ax = 0; ax < g.d; ++ax) {
      const int m = static_cast<int>(r % static_cast<std::size_t>(N));
      r /= static_cast<std::size_t>(N);
      xi2 += g.xi_x[m] * g.xi_x[m];
    }
    phi_spec[lin] = (xi2 > 0.0) ? -spec[lin] / xi2 : cplx(0.0, 0.0);
  }

  const double scale = 1.0 / static_cast<double>(g.nx_total);
  std::vector<cplx> work(g.nx_total);

  work = phi_spec;
  dft_cube(work.data(), g.d, g.Nx, +1);
  for (std::size_t i = 0; i < g.nx_total; ++i)
    res.phi.values[i] = work[i].real() * scale;

  for (int comp = 0; comp < g.d; ++comp) {
    work = phi_spec;
    for (std::size_t lin = 0; lin < g.nx_total; ++lin) {
      std::size_t r = lin;
      double xic = 0.0;
      for (int ax = g.d - 1; ax >= 0; --ax) {
        const int m = static_cast<int>(r % static_cast<std::size_t>(N));
        r /= static_cast<std::size_t>(N);
        if (ax == comp) xic = g.xi_x[m];
      }
      work[lin] *= cplx(0.0, xic);
    }
    dft_cube(work.data(), g.d, g.Nx, +1);
    for (std::size_t i = 0; i < g.nx_total; ++i)
      res.grad_phi[comp].values[i] = work[i].real() * scale;
  }
  return res;
}

namespace {

// grad of the decaying fundamental solution of the Laplacian.
Vec3 grad_E(int d, const Vec3& x) {
  const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
  const double r = std::sqrt(r2);
  Vec3 out = {0.0, 0.0, 0.0};
  if (r == 0.0) return out;
  double c = 0.0;
  switch (d) {
    case 3: c = 1.0 / (4.0 * std::numbers::pi * r2 * r); break;
    case 2: c = 1.0 / (2.0 * std::numbers::pi * r2); break;
    case 1: out[0] = (x[0] > 0 ? 0.5 : -0.5); return out;
  }
  for (int ax = 0; ax < d; ++ax) out[ax] = c * x[ax];
  return out;
}

double E_fundamental(int d, const Vec3& x) {
  const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
  switch (d) {
    case 3: return -1.0 / (4.0 * std::numbers::pi * r);
    case 2: return std::log(r) / (2.0 * std::numbers::pi);
    default: return 0.5 * std::abs(x[0]);
  }
}

template <typename Accum>
void midpoint_scan(int d, double R, int M, const std::vector<Vec3>& targets,
                   Accum&& acc) {
  const double h = 2.0 * R / M;
  const double tol = 1e-9 * h;
  MultiIndex idx = {0, 0, 0};
  std::size_t total = 1;
  for (int ax = 0; ax < d; ++ax) total *= static_cast<std::size_t>(M);
  for (std::size_t lin = 0; lin < total; ++lin) {
    std::size_t r = lin;
    Vec3 z = {0.0, 0.0, 0.0};
    for (int ax = d - 1; ax >= 0; --ax) {
      idx[ax] = static_cast<int>(r % static_cast<std::size_t>(M));
      r /= static_cast<std::size_t>(M);
      z[ax] = -R + (idx[ax] + 0.5) * h;
    }
    for (const Vec3& y : targets) {
      double dist2 = 0.0;
      for (int ax = 0; ax < d; ++ax) dist2 += (y[ax] - z[ax]) * (y[ax] - z[ax]);
      if (dist2 < tol * tol)
        throw GridError(
            "field_free_space: target coincides with a quadrature node");
    }
    acc(z, std::pow(h, d));
  }
}

}  // namespace

std::vector<Vec3> field_free_space(int d, const DensityEvaluator& rho,
                                   double support_radius,
                                   const QuadratureSpec& quad,
                                   const std::vector<Vec3>& targets) {
  if (d < 1 || d > 3) throw GridError("field_free_space: d out of range");
  if (!(support_radius > 0.0))
    throw GridError("field_free_space: nonpositive support radius");
  std::vector<Vec3> out(targets.size(), Vec3{0.0, 0.0, 0.0});
  midpoint_scan(d, support_radius, quad.cells_per_axis, targets,
                [&](const Vec3& z, double w) {
                  const double rz = rho(z) * w;
                  if (rz == 0.0) return;
                  for (std::size_t ti = 0; ti < targets.size(); ++ti) {
                    Vec3 diff = {targets[ti][0] - z[0], targets[ti][1] - z[1],
                                 targets[ti][2] - z[2]};
                    const Vec3 gE = grad_E(d, diff);
                    for (int ax = 0; ax < d; ++ax) out[ti][ax] += rz * gE[ax];
                  }
                });
  return out;
}

std::vector<double> potential_free_space(int d, const DensityEvaluator& rho,
                                         double support_radius,
                                         const QuadratureSpec& quad,
                                         const std::vector<Vec3>& targets) {
  std::vector<double> out(targets.size(), 0.0);
  midpoint_scan(d, support_radius, quad.cells_per_axis, targets,
                [&](const Vec3& z, double w) {
                  const double rz = rho(z) * w;
                  if (rz == 0.0) return;
                  for (std::size_t ti = 0; ti < targets.size(); ++ti) {
                    Vec3 diff = {targets[ti][0] - z[0], targets[ti][1] - z[1],
                                 targets[ti][2] - z[2]};
                    out[ti] += rz * E_fundamental(d, diff);
                  }
                });
  return out;
}

// ---------------------------------------------------------------------------
// ForceLattice

namespace {

struct KernelCacheEntry {
  int n = 0;
  long long hq = 0;
  // FFT of the three Newtonian kernel components on the 2n zero-padded cube;
  // purely imaginary by antisymmetry, so only the imaginary part is stored.
  std::vector<double> spec[3];
};

std::mutex g_kernel_mutex;
std::shared_ptr<KernelCacheEntry> g_kernel_cache;

std::shared_ptr<KernelCacheEntry> kernel_for(int n, double h) {
  const long long hq = static_cast<long long>(std::llround(h * 1e12));
  {
    std::lock_guard<std::mutex> lock(g_kernel_mutex);
    if (g_kernel_cache && g_kernel_cache->n == n && g_kernel_cache->hq == hq)
      return g_kernel_cache;
  }
  auto entry = std::make_shared<KernelCacheEntry>();
  entry->n = n;
  entry->hq = hq;
  const int P = 2 * n;
  const std::size_t total = static_cast<std::size_t>(P) * P * P;
  std::vector<cplx> buf(total);
  const double w = h * h * h;
  for (int comp = 0; comp < 3; ++comp) {
    std::fill(buf.begin(), buf.end(), cplx(0.0, 0.0));
    for (int i = -(n - 1); i <= n - 1; ++i)
      for (int j = -(n - 1); j <= n - 1; ++j)
        for (int k = -(n - 1); k <= n - 1; ++k) {
          Vec3 x = {i * h, j * h, k * h};
          const Vec3 gE = grad_E(3, x);
          const std::size_t ii = static_cast<std::size_t>((i + P) % P);
          const std::size_t jj = static_cast<std::size_t>((j + P) % P);
          const std::size_t kk = static_cast<std::size_t>((k + P) % P);
          buf[(ii * P + jj) * P + kk] = gE[comp] * w;
        }
    dft_cube(buf.data(), 3, P, -1);
    entry->spec[comp].resize(total);
    for (std::size_t i = 0; i < total; ++i) entry->spec[comp][i] = buf[i].imag();
  }
  std::lock_guard<std::mutex> lock(g_kernel_mutex);
  g_kernel_cache = entry;
  return entry;
}

}  // namespace

ForceLattice::ForceLattice(double extent, int n) : extent_(extent), n_(n) {
  if (n < 2 || !(extent > 0.0)) throw GridError("ForceLattice: bad geometry");
  h_ = 2.0 * extent / (n - 1);
}

Vec3 ForceLattice::node(int i, int j, int k) const {
  return {-extent_ + i * h_, -extent_ + j * h_, -extent_ + k * h_};
}

void ForceLattice::solve(const std::vector<double>& rho_nodes) {
  const std::size_t n3 =
      static_cast<std::size_t>(n_) * n_ * n_;
  if (rho_nodes.size() != n3) throw GridError("ForceLattice: wrong rho size");
  auto kernel = kernel_for(n_, h_);

  const int P = 2 * n_;
  const std::size_t total = static_cast<std::size_t>(P) * P * P;
  std::vector<cplx> rho_spec(total, cplx(0.0, 0.0));
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      for (int k = 0; k < n_; ++k)
        rho_spec[(static_cast<std::size_t>(i) * P + j) * P + k] =
            rho_nodes[(static_cast<std::size_t>(i) * n_ + j) * n_ + k];
  dft_cube(rho_spec.data(), 3, P, -1);

  mass_ = 0.0;
  for (double r : rho_nodes) mass_ += r;
  mass_ *= h_ * h_ * h_;

  std::vector<cplx> work(total);
  const double scale = 1.0 / static_cast<double>(total);
  for (int comp = 0; comp < 3; ++comp) {
    for (std::size_t i = 0; i < total; ++i)
      work[i] = rho_spec[i] * cplx(0.0, kernel->spec[comp][i]);
    dft_cube(work.data(), 3, P, +1);
    grad_[comp].resize(n3);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        for (int k = 0; k < n_; ++k)
          grad_[comp][(static_cast<std::size_t>(i) * n_ + j) * n_ + k] =
              work[(static_cast<std::size_t>(i) * P + j) * P + k].real() *
              scale;
  }
}

Vec3 ForceLattice::force_at(const Vec3& y) const {
  const double lo = -extent_;
  bool inside = true;
  double fi[3];
  int ci[3];
  for (int ax = 0; ax < 3; ++ax) {
    const double s = (y[ax] - lo) / h_;
    if (s < 0.0 || s > n_ - 1) {
      inside = false;
      break;
    }
    ci[ax] = std::min(static_cast<int>(s), n_ - 2);
    fi[ax] = s - ci[ax];
  }
  if (!inside) {
    // Monopole far field.
    const double r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
    const double r = std::sqrt(r2);
    if (r == 0.0) return {0.0, 0.0, 0.0};
    const double c = mass_ / (4.0 * std::numbers::pi * r2 * r);
    return {c * y[0], c * y[1], c * y[2]};
  }
  Vec3 out = {0.0, 0.0, 0.0};
  for (int comp = 0; comp < 3; ++comp) {
    double acc = 0.0;
    for (int di = 0; di < 2; ++di)
      for (int dj = 0; dj < 2; ++dj)
        for (int dk = 0; dk < 2; ++dk) {
          const double w = (di ? fi[0] : 1.0 - fi[0]) *
                           (dj ? fi[1] : 1.0 - fi[1]) *
                           (dk ? fi[2] : 1.0 - fi[2]);
          acc += w * grad_[comp][(static_cast<std::size_t>(ci[0] + di) * n_ +
                                  (ci[1] + dj)) *
                                     n_ +
                                 (ci[2] + dk)];
        }
    out[comp] = acc;
  }
  return out;
}

}  // namespace vpk
