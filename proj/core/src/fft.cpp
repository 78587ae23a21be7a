#include "vpk/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <numbers>

namespace vpk {

namespace {

std::mutex g_planner_mutex;

// Cached in-place c2c plans for cubes. FFTW_UNALIGNED so the cached plan can
// be executed on any buffer via the new-array interface.
fftw_plan cube_plan(int d, int N, int sign) {
  static std::map<std::tuple<int, int, int>, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(g_planner_mutex);
  auto key = std::make_tuple(d, N, sign);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  std::size_t total = 1;
  int dims[3];
  for (int i = 0; i < d; ++i) {
    dims[i] = N;
    total *= static_cast<std::size_t>(N);
  }
  std::vector<cplx> scratch(total);
  fftw_plan p = fftw_plan_dft(
      d, dims, reinterpret_cast<fftw_complex*>(scratch.data()),
      reinterpret_cast<fftw_complex*>(scratch.data()), sign,
      FFTW_ESTIMATE | FFTW_UNALIGNED);
  cache.emplace(key, p);
  return p;
}

std::size_t cube_total(int d, int N) {
  std::size_t t = 1;
  for (int i = 0; i < d; ++i) t *= static_cast<std::size_t>(N);
  return t;
}

int g_max_deriv_order = 8;

}  // namespace

void dft_cube(cplx* data, int d, int N, int sign) {
  fftw_plan p = cube_plan(d, N, sign);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(data),
                   reinterpret_cast<fftw_complex*>(data));
}

// Strided in-place transform over the velocity cube of a PhaseField laid out
// with velocity outermost: the v-cube for fixed x has element stride nx and
// consecutive x's are adjacent. Plan is built on the live array (estimate
// mode, cheap) because the buffer is large and transient.
void dft_vcube_many(cplx* data, int d, int N, std::size_t nx, int sign) {
  int dims[3];
  for (int i = 0; i < d; ++i) dims[i] = N;
  fftw_plan p;
  {
    std::lock_guard<std::mutex> lock(g_planner_mutex);
    p = fftw_plan_many_dft(d, dims, static_cast<int>(nx),
                           reinterpret_cast<fftw_complex*>(data), nullptr,
                           static_cast<int>(nx), 1,
                           reinterpret_cast<fftw_complex*>(data), nullptr,
                           static_cast<int>(nx), 1, sign,
                           FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  fftw_execute(p);
  {
    std::lock_guard<std::mutex> lock(g_planner_mutex);
    fftw_destroy_plan(p);
  }
}

void fourier_forward(const double* u, cplx* out, int d, int N, double period) {
  const std::size_t total = cube_total(d, N);
  for (std::size_t i = 0; i < total; ++i) out[i] = u[i];
  dft_cube(out, d, N, -1);
  const double cell = std::pow(period / N, d);
  // (-1)^(m1+..+md) accounts for nodes starting at -period/2.
  for (std::size_t lin = 0; lin < total; ++lin) {
    std::size_t r = lin;
    int parity = 0;
    for (int ax = 0; ax < d; ++ax) {
      parity += static_cast<int>(r % static_cast<std::size_t>(N));
      r /= static_cast<std::size_t>(N);
    }
    out[lin] *= (parity & 1) ? -cell : cell;
  }
}

void fourier_backward(const cplx* u_hat, double* out, int d, int N,
                      double period) {
  const std::size_t total = cube_total(d, N);
  std::vector<cplx> buf(total);
  const double scale = 1.0 / std::pow(period, d);
  for (std::size_t lin = 0; lin < total; ++lin) {
    std::size_t r = lin;
    int parity = 0;
    for (int ax = 0; ax < d; ++ax) {
      parity += static_cast<int>(r % static_cast<std::size_t>(N));
      r /= static_cast<std::size_t>(N);
    }
    buf[lin] = u_hat[lin] * ((parity & 1) ? -scale : scale);
  }
  dft_cube(buf.data(), d, N, +1);
  for (std::size_t i = 0; i < total; ++i) out[i] = buf[i].real();
}

int max_derivative_order() { return g_max_deriv_order; }
void set_max_derivative_order(int k) { g_max_deriv_order = k; }

namespace {

void check_order(const MultiIndex& alpha) {
  if (mi_order(alpha) > g_max_deriv_order)
    throw GridError("spectral_derivative: order exceeds configured maximum "
                    "(aliasing risk)");
  for (int a : alpha)
    if (a < 0) throw GridError("spectral_derivative: negative multi-index");
}

// Multiply spectrum (FFT index order, cube edge N) by prod (i xi_ax)^alpha_ax.
void apply_deriv_multiplier(cplx* spec, int d, int N,
                            const std::vector<double>& xi,
                            const MultiIndex& alpha) {
  const std::size_t total = cube_total(d, N);
  for (std::size_t lin = 0; lin < total; ++lin) {
    std::size_t r = lin;
    cplx mult(1.0, 0.0);
    for (int ax = d - 1; ax >= 0; --ax) {
      const int m = static_cast<int>(r % static_cast<std::size_t>(N));
      r /= static_cast<std::size_t>(N);
      for (int p = 0; p < alpha[ax]; ++p) mult *= cplx(0.0, xi[m]);
    }
    spec[lin] *= mult;
  }
}

}  // namespace

SpatialField spectral_derivative(const SpatialField& u, const MultiIndex& alpha) {
  check_order(alpha);
  const PhaseGrid& g = u.grid;
  SpatialField out(g);
  std::vector<cplx> spec(g.nx_total);
  for (std::size_t i = 0; i < g.nx_total; ++i) spec[i] = u.values[i];
  dft_cube(spec.data(), g.d, g.Nx, -1);
  apply_deriv_multiplier(spec.data(), g.d, g.Nx, g.xi_x, alpha);
  dft_cube(spec.data(), g.d, g.Nx, +1);
  const double scale = 1.0 / static_cast<double>(g.nx_total);
  for (std::size_t i = 0; i < g.nx_total; ++i)
    out.values[i] = spec[i].real() * scale;
  return out;
}

PhaseField spectral_derivative(const PhaseField& f, const MultiIndex& alpha,
                               Space space) {
  check_order(alpha);
  const PhaseGrid& g = f.grid;
  PhaseField out(g);
  if (space == Space::position) {
    std::vector<cplx> spec(g.nx_total);
    const double scale = 1.0 / static_cast<double>(g.nx_total);
    for (std::size_t j = 0; j < g.nv_total; ++j) {
      const double* s = f.slice(j);
      for (std::size_t i = 0; i < g.nx_total; ++i) spec[i] = s[i];
      dft_cube(spec.data(), g.d, g.Nx, -1);
      apply_deriv_multiplier(spec.data(), g.d, g.Nx, g.xi_x, alpha);
      dft_cube(spec.data(), g.d, g.Nx, +1);
      double* o = out.slice(j);
      for (std::size_t i = 0; i < g.nx_total; ++i) o[i] = spec[i].real() * scale;
    }
  } else {
    std::vector<cplx> spec(f.values.size());
    for (std::size_t i = 0; i < f.values.size(); ++i) spec[i] = f.values[i];
    dft_vcube_many(spec.data(), g.d, g.Nv, g.nx_total, -1);
    // Multiplier depends only on the v-cube index.
    for (std::size_t j = 0; j < g.nv_total; ++j) {
      std::size_t r = j;
      cplx mult(1.0, 0.0);
      for (int ax = g.d - 1; ax >= 0; --ax) {
        const int m = static_cast<int>(r % static_cast<std::size_t>(g.Nv));
        r /= static_cast<std::size_t>(g.Nv);
        for (int p = 0; p < alpha[ax]; ++p) mult *= cplx(0.0, g.xi_v[m]);
      }
      cplx* row = spec.data() + j * g.nx_total;
      for (std::size_t i = 0; i < g.nx_total; ++i) row[i] *= mult;
    }
    dft_vcube_many(spec.data(), g.d, g.Nv, g.nx_total, +1);
    const double scale = 1.0 / static_cast<double>(g.nv_total);
    for (std::size_t i = 0; i < f.values.size(); ++i)
      out.values[i] = spec[i].real() * scale;
  }
  return out;
}

void for_each_v_derivative(
    const PhaseField& f, const std::vector<MultiIndex>& betas,
    const std::function<void(std::size_t, const PhaseField&)>& fn) {
  const PhaseGrid& g = f.grid;
  for (const MultiIndex& b : betas) check_order(b);
  std::vector<cplx> spec(f.values.size());
  for (std::size_t i = 0; i < f.values.size(); ++i) spec[i] = f.values[i];
  dft_vcube_many(spec.data(), g.d, g.Nv, g.nx_total, -1);
  std::vector<cplx> work(f.values.size());
  PhaseField out(g);
  const double scale = 1.0 / static_cast<double>(g.nv_total);
  for (std::size_t bi = 0; bi < betas.size(); ++bi) {
    const MultiIndex& beta = betas[bi];
    for (std::size_t j = 0; j < g.nv_total; ++j) {
      std::size_t r = j;
      cplx mult(1.0, 0.0);
      for (int ax = g.d - 1; ax >= 0; --ax) {
        const int m = static_cast<int>(r % static_cast<std::size_t>(g.Nv));
        r /= static_cast<std::size_t>(g.Nv);
        for (int p = 0; p < beta[ax]; ++p) mult *= cplx(0.0, g.xi_v[m]);
      }
      const cplx* src = spec.data() + j * g.nx_total;
      cplx* dst = work.data() + j * g.nx_total;
      for (std::size_t i = 0; i < g.nx_total; ++i) dst[i] = src[i] * mult;
    }
    dft_vcube_many(work.data(), g.d, g.Nv, g.nx_total, +1);
    for (std::size_t i = 0; i < f.values.size(); ++i)
      out.values[i] = work[i].real() * scale;
    fn(bi, out);
  }
}

namespace {

// Multiply spectrum by e^{i xi . shift} (translation u(x) -> u(x+shift)).
void apply_shift_multiplier(cplx* spec, int d, int N,
                            const std::vector<double>& xi, const Vec3& shift) {
  // Separable: precompute per-axis phase tables.
  std::vector<cplx> phase[3];
  for (int ax = 0; ax < d; ++ax) {
    phase[ax].resize(N);
    for (int m = 0; m < N; ++m)
      phase[ax][m] = std::polar(1.0, xi[m] * shift[ax]);
  }
  const std::size_t total = cube_total(d, N);
  for (std::size_t lin = 0; lin < total; ++lin) {
    std::size_t r = lin;
    cplx mult(1.0, 0.0);
    for (int ax = d - 1; ax >= 0; --ax) {
      const int m = static_cast<int>(r % static_cast<std::size_t>(N));
      r /= static_cast<std::size_t>(N);
      mult *= phase[ax][m];
    }
    spec[lin] *= mult;
  }
}

}  // namespace

SpatialField shift_spatial(const SpatialField& u, const Vec3& shift) {
  const PhaseGrid& g = u.grid;
  SpatialField out(g);
  std::vector<cplx> spec(g.nx_total);
  for (std::size_t i = 0; i < g.nx_total; ++i) spec[i] = u.values[i];
  dft_cube(spec.data(), g.d, g.Nx, -1);
  apply_shift_multiplier(spec.data(), g.d, g.Nx, g.xi_x, shift);
  dft_cube(spec.data(), g.d, g.Nx, +1);
  const double scale = 1.0 / static_cast<double>(g.nx_total);
  for (std::size_t i = 0; i < g.nx_total; ++i)
    out.values[i] = spec[i].real() * scale;
  return out;
}

PhaseField interpolate(const PhaseField& f,
                       const std::function<Vec3(const Vec3& v)>& offset) {
  const PhaseGrid& g = f.grid;
  PhaseField out(g);
  std::vector<cplx> spec(g.nx_total);
  const double scale = 1.0 / static_cast<double>(g.nx_total);
  Vec3 v;
  for (std::size_t j = 0; j < g.nv_total; ++j) {
    g.v_coord(j, v);
    const Vec3 s = offset(v);
    const double* in = f.slice(j);
    for (std::size_t i = 0; i < g.nx_total; ++i) spec[i] = in[i];
    dft_cube(spec.data(), g.d, g.Nx, -1);
    apply_shift_multiplier(spec.data(), g.d, g.Nx, g.xi_x, s);
    dft_cube(spec.data(), g.d, g.Nx, +1);
    double* o = out.slice(j);
    for (std::size_t i = 0; i < g.nx_total; ++i) o[i] = spec[i].real() * scale;
  }
  return out;
}

void trig_eval(const cplx* u_hat, const PhaseGrid& g, const Vec3& point,
               const std::vector<MultiIndex>& alphas, double* out) {
  const int d = g.d;
  const int N = g.Nx;
  std::vector<cplx> phase[3];
  for (int ax = 0; ax < d; ++ax) {
    phase[ax].resize(N);
    for (int m = 0; m < N; ++m)
      phase[ax][m] = std::polar(1.0, g.xi_x[m] * point[ax]);
  }
  const std::size_t na = alphas.size();
  std::vector<cplx> acc(na, cplx(0.0, 0.0));
  const std::size_t total = g.nx_total;
  MultiIndex midx;
  for (std::size_t lin = 0; lin < total; ++lin) {
    std::size_t r = lin;
    cplx ph(1.0, 0.0);
    for (int ax = d - 1; ax >= 0; --ax) {
      const int m = static_cast<int>(r % static_cast<std::size_t>(N));
      midx[ax] = m;
      r /= static_cast<std::size_t>(N);
      ph *= phase[ax][m];
    }
    const cplx base = u_hat[lin] * ph;
    for (std::size_t ai = 0; ai < na; ++ai) {
      cplx mult(1.0, 0.0);
      for (int ax = 0; ax < d; ++ax)
        for (int p = 0; p < alphas[ai][ax]; ++p)
          mult *= cplx(0.0, g.xi_x[midx[ax]]);
      acc[ai] += base * mult;
    }
  }
  const double scale = 1.0 / std::pow(g.Lx, d);
  for (std::size_t ai = 0; ai < na; ++ai) out[ai] = (acc[ai] * scale).real();
}

}  // namespace vpk
