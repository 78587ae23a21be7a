#include <cmath>
#include <numbers>

#include "doctest.h"
#include "vpk/diagnostics.hpp"
#include "vpk/transport.hpp"

using namespace vpk;

namespace {

PhaseField gauss(const PhaseGrid& g, double eps, double sx, double sv) {
  PhaseField f(g);
  Vec3 x, v;
  for (std::size_t j = 0; j < g.nv_total; ++j) {
    g.v_coord(j, v);
    const double fv =
        std::exp(-(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) / (2 * sv * sv));
    double* s = f.slice(j);
    for (std::size_t i = 0; i < g.nx_total; ++i) {
      g.x_coord(i, x);
      s[i] = eps * fv *
             std::exp(-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2 * sx * sx));
    }
  }
  return f;
}

}  // namespace

TEST_CASE("power-law fit recovers an exact power") {
  std::vector<std::pair<double, double>> series;
  for (double t = 1.0; t <= 64.0; t *= 2.0)
    series.emplace_back(t, 5.0 * std::pow(t, -3.0));
  const FitResult fit = fit_power_law(series, 1.0, 64.0);
  CHECK(fit.slope == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(fit.max_residual < 1e-12);
  CHECK(fit.n_used == 7);
  CHECK_THROWS_AS(fit_power_law(series, 100.0, 200.0), std::invalid_argument);
}

TEST_CASE("free-streaming oracle: closed form and quadrature agree") {
  const GaussianSpec spec{1.0, 1.0, 1.0};
  TransportModel nonrel;
  TransportModel rel;
  rel.law = TransportLaw::relativistic;
  const double tp = std::pow(2.0 * std::numbers::pi, 1.5);
  CHECK(free_stream_oracle(spec, 0.0, {0, 0, 0}, 3, nonrel) ==
        doctest::Approx(tp).epsilon(1e-12));
  CHECK(tp == doctest::Approx(15.749609945722419).epsilon(1e-15));
  // at t = 0 the transport law is irrelevant
  CHECK(free_stream_oracle(spec, 0.0, {0.5, 0, 0}, 3, rel) ==
        doctest::Approx(free_stream_oracle(spec, 0.0, {0.5, 0, 0}, 3, nonrel))
            .epsilon(1e-7));
  // nonrelativistic closed form at t = 10
  CHECK(free_stream_oracle(spec, 10.0, {0, 0, 0}, 3, nonrel) ==
        doctest::Approx(tp * std::pow(101.0, -1.5)).epsilon(1e-12));
  // relativistic density decays with the same cubic power
  const double r20 = free_stream_oracle(spec, 20.0, {0, 0, 0}, 3, rel);
  const double r40 = free_stream_oracle(spec, 40.0, {0, 0, 0}, 3, rel);
  CHECK(r20 / r40 == doctest::Approx(8.0).epsilon(0.15));
}

TEST_CASE("energies are 1-homogeneous in the data") {
  const PhaseGrid g = build_grid(3, 8, 8, 16.0, 4.0);
  const PhaseField f = gauss(g, 1e-2, 1.0, 0.8);
  PhaseField f3 = f;
  for (double& x : f3.values) x *= 3.0;
  WeightConfig w;
  const auto [e1, e2] = energy_high(f, w);
  const auto [s1, s2] = energy_high(f3, w);
  CHECK(e1 > 0.0);
  CHECK(e2 > 0.0);
  CHECK(s1 == doctest::Approx(3.0 * e1).epsilon(1e-12));
  CHECK(s2 == doctest::Approx(3.0 * e2).epsilon(1e-12));

  const CorrectionAccumulator corr = make_correction_accumulator(g, w);
  CHECK(energy_low(f3, corr, w) ==
        doctest::Approx(3.0 * energy_low(f, corr, w)).epsilon(1e-12));
}

TEST_CASE("correction accumulator integrates a constant-force pairing") {
  const PhaseGrid g = build_grid(3, 8, 8, 16.0, 4.0);
  const PhaseField f = gauss(g, 1.0, 1.0, 0.8);
  WeightConfig w;
  CorrectionAccumulator acc = make_correction_accumulator(g, w);
  const Vec3 F = {0.5, 0.0, -0.25};
  const ShiftedForceFn force = [&](std::size_t, Vec3* out) {
    for (std::size_t i = 0; i < g.nx_total; ++i) out[i] = F;
  };
  accumulate_correction(acc, f, 0.0, force);  // seeds
  accumulate_correction(acc, f, 2.0, force);  // trapezoid over [0, 2]
  // expected: 2 * F_c * dx^3 sum_x grad_v^alpha f, per velocity node
  const std::vector<double> m = zero_mode(f);
  REQUIRE(!acc.alphas.empty());
  const std::vector<double> dm = vcube_derivative(m, g, acc.alphas[0]);
  double worst = 0.0;
  for (std::size_t j = 0; j < g.nv_total; ++j)
    for (int c = 0; c < 3; ++c)
      worst = std::max(worst, std::abs(acc.g_alpha[0][c * g.nv_total + j] -
                                       2.0 * F[c] * dm[j]));
  CHECK(worst < 1e-9);
  CHECK(correction_norm(acc, g, w) > 0.0);
}

TEST_CASE("scattering gap is a weighted distance") {
  const PhaseGrid g = build_grid(3, 8, 8, 16.0, 4.0);
  WeightConfig w;
  std::vector<double> a(g.nv_total, 0.0), b(g.nv_total, 0.0);
  CHECK(scattering_gap(a, b, g, w) == 0.0);
  b[0] = 1.0;
  const double gap1 = scattering_gap(a, b, g, w);
  for (double& x : b) x *= 2.0;
  CHECK(scattering_gap(a, b, g, w) == doctest::Approx(2.0 * gap1).epsilon(1e-13));
}
