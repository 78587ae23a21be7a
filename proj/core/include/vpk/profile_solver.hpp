#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vpk/diagnostics.hpp"
#include "vpk/field_solver.hpp"
#include "vpk/grid.hpp"
#include "vpk/reconstruct.hpp"
#include "vpk/transport.hpp"

namespace vpk {

// g(t,x,v) = f(t, x + a(v) t, v): exact Fourier phase shift per slice.
PhaseField to_profile(const PhaseField& f, double t, const TransportModel& m);
PhaseField from_profile(const PhaseField& g, double t, const TransportModel& m);

// rho(t,x) = dv^d sum_v g(x - t a(v), v) at the given targets.
std::vector<double> reconstruct_density(const PhaseField& g, double t,
                                        const TransportModel& m,
                                        const std::vector<Vec3>& targets,
                                        const ReconstructOptions& opt = {});

// Estimate of ||grad_x^k rho(t,.)||_inf over the reachable set.
double sup_density_derivative(const PhaseField& g, double t,
                              const TransportModel& m, int k,
                              const ReconstructOptions& opt = {});

// Arbitrary-point force evaluator, grad phi(t, y).
using FieldEval = std::function<Vec3(const Vec3&)>;

// The transport-frame interaction term
//   grad_phi(t, x + a(v) t) . (grad_v - t (Da)^T grad_x) g
// evaluated nodewise. The dynamics of the profile is
//   d g / d t = -mu * profile_rhs(g, t, ...),
// the sign and mu following from the characteristics of the kinetic
// equation under the pullback x -> x + a(v) t.
PhaseField profile_rhs(const PhaseField& g, double t, const TransportModel& m,
                       const FieldEval& field_eval);

struct ProfileOptions {
  double support_tol = 1e-10;   // compact-support contract at box edges
  double support_rel = 1e-3;    // in-flight wrap check, relative to sup|g|
  double echo_gamma = 0.45;
  double tail_tol = 1e-7;
  double spread_factor = 8.0;   // force-lattice spacing <= sqrt(1+t^2)/factor
  int lattice_max_n = 129;      // nodes per axis cap for the force lattice
  bool zero_field = false;      // free-transport mode (force identically 0)
  bool track_corrections = true;
  WeightConfig weights;
};

struct ProfileState {
  double t = 0.0;
  PhaseField g;
  TransportModel model;
  ProfileOptions opt;
  CorrectionAccumulator corrections;
  std::shared_ptr<ForceLattice> field;  // field of the current (t, g), lazy
};

// Validates the support contract and seeds the correction accumulator.
ProfileState make_profile_state(PhaseField g0, const TransportModel& model,
                                const ProfileOptions& opt = {});

// Free-space force lattice for the state's current (t, g); cached on the
// state. Null when opt.zero_field is set.
std::shared_ptr<const ForceLattice> profile_field(ProfileState& s);

// Explicit midpoint step of the profile equation; advances t, accumulates
// the corrections by the trapezoid rule, enforces the support contract.
void step_profile(ProfileState& s, double dt);

// Force lattice built from g at time t (free-space Poisson of the
// reconstructed density). Exposed for tests and cross-backend checks.
std::shared_ptr<ForceLattice> build_profile_field(const PhaseField& g,
                                                  double t,
                                                  const TransportModel& m,
                                                  const ProfileOptions& opt);

}  // namespace vpk
