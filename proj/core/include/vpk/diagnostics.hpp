#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "vpk/grid.hpp"
#include "vpk/transport.hpp"

namespace vpk {

// Weighted-energy configuration. The weight exponents follow the high/low
// energy definitions with the order parameter N0; exponents are floored at 0
// so desk-scale N0 stays in double range.
struct WeightConfig {
  int N0 = 2;
  double delta = 0.01;  // reported growth-exponent budget; never enforced

  int exponent_high(int deriv_total) const {
    const int e = 10 * N0 - 8 * deriv_total;
    return e > 0 ? e : 0;
  }
  int exponent_low(int deriv_total) const {
    const int e = 10 * N0 - 8 * deriv_total - 20;
    return e > 0 ? e : 0;
  }
};

struct EnergySample {
  double t = 0.0;
  double e_high1 = 0.0;  // |alpha|+|beta| = N0
  double e_high2 = 0.0;  // |alpha|+|beta| < N0
  double e_low = 0.0;
  double g_alpha_norm = 0.0;
};

struct DecaySample {
  double t = 0.0;
  std::vector<double> sup_deriv;  // ||grad^k rho||_inf, k = 0..K
};

// E1 sums weighted L2 norms of grad_x^alpha grad_v^beta g over
// |alpha|+|beta| = N0, E2 over < N0; weights (1+|v|+|x|)^exponent_high.
std::pair<double, double> energy_high(const PhaseField& g,
                                      const WeightConfig& w);

// Correction accumulator: for each top-order v-multi-index alpha, the
// time integral of  integral_x  grad_phi(s, x + a(v) s) grad_v^alpha g dx,
// a d-vector per velocity node, advanced by the trapezoid rule.
struct CorrectionAccumulator {
  std::vector<MultiIndex> alphas;            // |alpha| = N0
  std::vector<std::vector<double>> g_alpha;  // [alpha][c*nv + j]
  std::vector<std::vector<double>> prev;     // integrand at prev_t
  double prev_t = 0.0;
  bool has_prev = false;
};

CorrectionAccumulator make_correction_accumulator(const PhaseGrid& g,
                                                  const WeightConfig& w);

// Force values at the transported nodes x + t a(v), one slice at a time.
using ShiftedForceFn = std::function<void(std::size_t v_lin, Vec3* out)>;

// Evaluates the integrand at time t and adds the trapezoid increment from
// the previously recorded time (no-op on the first call, which only seeds).
void accumulate_correction(CorrectionAccumulator& acc, const PhaseField& g,
                           double t, const ShiftedForceFn& force);

// Sum over alpha of ||(1+|v|)^exponent_low(N0) g_alpha||_{L2_v}.
double correction_norm(const CorrectionAccumulator& acc, const PhaseGrid& g,
                       const WeightConfig& w);

// E_low: m(v) = dx^d sum_x g (the zero spatial Fourier mode), spectral
// grad_v^alpha, minus div_v g_alpha at top order, weighted L2_v norms summed
// over |alpha| <= N0.
double energy_low(const PhaseField& g, const CorrectionAccumulator& corr,
                  const WeightConfig& w);

// Zero spatial mode m(v) = dx^d sum_x g(x,v) as a velocity-cube array.
std::vector<double> zero_mode(const PhaseField& g);

// Spectral grad_v^alpha of a real function sampled on the velocity cube.
std::vector<double> vcube_derivative(const std::vector<double>& m,
                                     const PhaseGrid& g,
                                     const MultiIndex& alpha);

// Weighted L2_v distance between two zero-mode functions (weight
// (1+|v|)^exponent_low(0)).
double scattering_gap(const std::vector<double>& ma,
                      const std::vector<double>& mb, const PhaseGrid& g,
                      const WeightConfig& w);

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;      // in log y
  double max_residual = 0.0;   // max |log y - fit|
  int n_used = 0;
};

// Least squares on (log t, log y) restricted to t in [t_lo, t_hi].
// Throws std::invalid_argument on nonpositive y or fewer than 4 samples.
FitResult fit_power_law(const std::vector<std::pair<double, double>>& series,
                        double t_lo, double t_hi);

struct GaussianSpec {
  double amplitude = 1.0;
  double sigma_x = 1.0;
  double sigma_v = 1.0;
};

// Density of the freely transported Gaussian A e^{-|x|^2/2sx^2 -|v|^2/2sv^2}:
// closed form for the identity transport law; adaptive quadrature (1e-8
// relative, d = 3 only) for the relativistic law.
double free_stream_oracle(const GaussianSpec& spec, double t, const Vec3& x,
                          int d, const TransportModel& model);

}  // namespace vpk
