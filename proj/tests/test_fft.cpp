#include <cmath>
#include <numbers>

#include "doctest.h"
#include "vpk/fft.hpp"

using namespace vpk;

TEST_CASE("fourier convention: Gaussian transform is sqrt(2pi)^d e^{-|xi|^2/2}") {
  const int N = 64;
  const double L = 40.0;
  const double dx = L / N;
  std::vector<double> u(N);
  for (int n = 0; n < N; ++n) {
    const double x = -L / 2 + n * dx;
    u[n] = std::exp(-x * x / 2.0);
  }
  std::vector<cplx> uh(N);
  fourier_forward(u.data(), uh.data(), 1, N, L);
  for (int m : {0, 1, 2, 5, 63}) {
    const double xi = (m <= N / 2 ? m : m - N) * 2.0 * std::numbers::pi / L;
    const double expect =
        std::sqrt(2.0 * std::numbers::pi) * std::exp(-xi * xi / 2.0);
    CHECK(uh[m].real() == doctest::Approx(expect).epsilon(1e-10));
    CHECK(std::abs(uh[m].imag()) < 1e-12);
  }
  std::vector<double> back(N);
  fourier_backward(uh.data(), back.data(), 1, N, L);
  for (int n = 0; n < N; ++n)
    CHECK(back[n] == doctest::Approx(u[n]).epsilon(1e-12));
}

TEST_CASE("spectral derivative of a plane wave") {
  const PhaseGrid g = build_grid(3, 16, 8, 16.0, 4.0);
  SpatialField u(g);
  const double k0 = 2.0 * std::numbers::pi / g.Lx;
  Vec3 x;
  for (std::size_t i = 0; i < g.nx_total; ++i) {
    g.x_coord(i, x);
    u.values[i] = std::sin(2.0 * k0 * x[0]) * std::cos(k0 * x[1]);
  }
  const SpatialField du = spectral_derivative(u, {1, 0, 0});
  for (std::size_t i = 0; i < g.nx_total; i += 11) {
    g.x_coord(i, x);
    const double expect = 2.0 * k0 * std::cos(2.0 * k0 * x[0]) * std::cos(k0 * x[1]);
    CHECK(du.values[i] == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("trig_eval reproduces node values and off-node plane waves") {
  const PhaseGrid g = build_grid(3, 16, 8, 16.0, 4.0);
  SpatialField u(g);
  const double k0 = 2.0 * std::numbers::pi / g.Lx;
  Vec3 x;
  for (std::size_t i = 0; i < g.nx_total; ++i) {
    g.x_coord(i, x);
    u.values[i] = std::cos(k0 * (x[0] - 2.0 * x[2]));
  }
  std::vector<cplx> uh(g.nx_total);
  fourier_forward(u.values.data(), uh.data(), g.d, g.Nx, g.Lx);
  const std::vector<MultiIndex> alphas = {{0, 0, 0}, {1, 0, 0}};
  double out[2];
  const Vec3 p = {0.37, -1.91, 2.44};
  trig_eval(uh.data(), g, p, alphas, out);
  CHECK(out[0] == doctest::Approx(std::cos(k0 * (p[0] - 2.0 * p[2]))).epsilon(1e-11));
  CHECK(out[1] ==
        doctest::Approx(-k0 * std::sin(k0 * (p[0] - 2.0 * p[2]))).epsilon(1e-10));
}

TEST_CASE("interpolate applies a per-velocity shift exactly") {
  const PhaseGrid g = build_grid(3, 16, 4, 16.0, 2.0);
  PhaseField f(g);
  const double k0 = 2.0 * std::numbers::pi / g.Lx;
  Vec3 x, v;
  for (std::size_t j = 0; j < g.nv_total; ++j) {
    double* s = f.slice(j);
    for (std::size_t i = 0; i < g.nx_total; ++i) {
      g.x_coord(i, x);
      s[i] = std::sin(k0 * x[1]);
    }
  }
  const PhaseField shifted =
      interpolate(f, [](const Vec3& vv) { return Vec3{0.0, vv[0], 0.0}; });
  for (std::size_t j = 0; j < g.nv_total; j += 7) {
    g.v_coord(j, v);
    const double* s = shifted.slice(j);
    for (std::size_t i = 0; i < g.nx_total; i += 23) {
      g.x_coord(i, x);
      CHECK(s[i] == doctest::Approx(std::sin(k0 * (x[1] + v[0]))).epsilon(1e-11));
    }
  }
}

TEST_CASE("for_each_v_derivative matches per-alpha spectral derivatives") {
  const PhaseGrid g = build_grid(3, 4, 16, 8.0, 4.0);
  PhaseField f(g);
  Vec3 v;
  for (std::size_t j = 0; j < g.nv_total; ++j) {
    g.v_coord(j, v);
    const double fv =
        std::exp(-(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) / 2.0);
    double* s = f.slice(j);
    for (std::size_t i = 0; i < g.nx_total; ++i) s[i] = fv * (1.0 + 0.1 * i);
  }
  const std::vector<MultiIndex> betas = {{0, 0, 0}, {1, 0, 0}, {0, 1, 1}};
  for_each_v_derivative(f, betas, [&](std::size_t bi, const PhaseField& df) {
    const PhaseField ref = spectral_derivative(f, betas[bi], Space::velocity);
    double worst = 0.0;
    for (std::size_t i = 0; i < df.values.size(); ++i)
      worst = std::max(worst, std::abs(df.values[i] - ref.values[i]));
    CHECK(worst < 1e-10);
  });
}

TEST_CASE("derivative order guard") {
  const PhaseGrid g = build_grid(3, 8, 4, 16.0, 2.0);
  SpatialField u(g);
  CHECK_THROWS_AS(spectral_derivative(u, {max_derivative_order() + 1, 0, 0}),
                  GridError);
}
