#pragma once

#include <functional>
#include <vector>

#include "vpk/fft.hpp"
#include "vpk/grid.hpp"
#include "vpk/transport.hpp"

namespace vpk {

// Even base bump: 1 on [-5/4, 5/4], 0 outside [-3/2, 3/2], quintic
// smoothstep (C^2) transition on the gap.
double psi_base(double x);

// psi_k(x) = psi_base(x/2^k) - psi_base(x/2^(k-1)); dyadic shell cutoffs.
double psi_k(int k, double x);
double psi_leq(int k, double x);  // psi_base(x/2^k)
double psi_geq(int k, double x);  // 1 - psi_leq(k-1, x)

// Frequency-shell projection: multiply u_hat(xi) by psi_k(|xi|).
SpatialField project_k(const SpatialField& u, int k);

// True when the shell's support [2^(k-1) 5/4, 2^k 3/2] is fully inside the
// grid's resolved wavenumbers.
bool shell_resolved(const PhaseGrid& g, int k);

// Shell-localized symbol norm: sum over |alpha| <= alpha_max of
// 2^(|alpha| k) || F^{-1}[ grad_xi^alpha m . psi_k(|xi|) ] ||_{L1}, evaluated
// on a shell-adapted 64^3 grid of extent 2^(k+2), central differences at
// step 2^k/64 (d = 3).
double symbol_norm(const std::function<double(const Vec3&)>& m, int k,
                   int alpha_max);

struct SymbolSpec {
  std::function<double(const Vec3& xi, const Vec3& v)> m;  // nullptr = 1
  std::function<double(const Vec3& v)> c;                  // nullptr = 1
  double a = 0.0;  // homogeneity exponent, > -3

  double eval_m(const Vec3& xi, const Vec3& v) const { return m ? m(xi, v) : 1.0; }
  double eval_c(const Vec3& v) const { return c ? c(v) : 1.0; }
};

struct ProbeReport {
  double t = 0.0;
  int k = 0;           // shell, or 0 for shell-summed probes
  double a = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;  // lhs / rhs when rhs > 0
  int truncation_order = 2;
};

// Oscillatory-integral decay probe at the point x:
//   LHS = | int int e^{i x.xi + i t a(v).xi} m(xi,v) |xi|^a g_hat(t,xi,v) dv dxi |
// assembled on a t-adapted fine frequency lattice; RHS is the constant-free
// combination |t|^{-3-a} L1-norm of weighted v-derivatives of the zero mode
// plus the |t|^{-4-a} weighted L1_x L1_v term, times the symbol-norm factor.
// Requires |t| >= 1, a > -3, d = 3.
ProbeReport decay_probe(const PhaseField& g, double t, double a,
                        const SymbolSpec& spec, const TransportModel& model,
                        const Vec3& x, int truncation_order = 2);

// Shell-localized bilinear operator:
//   B_k(f1,f2)(x,v) = f1(x,v) . E(P_k[f2])(x + a(v) t),
//   E(P_k[f])(x) = int int e^{i x.xi} e^{-i mu t a(u).xi}
//                  c(u) m(xi,u) psi_k(|xi|) f_hat(xi,u) dxi du
// with xi over the grid's resolved wavenumbers.
PhaseField bilinear_Bk(const PhaseField& f1, const PhaseField& f2, int k,
                       double t, const SymbolSpec& spec,
                       const TransportModel& model);

// L2 probes of the two bilinear shell estimates. `lemma` selects the
// right side: 2 = low-frequency form (requires 1/|t| <= 2^k <= 1, needs the
// auxiliary velocity vector field f3), 3 = min(|t|^-3, 2^(3k)) form.
ProbeReport bilinear_probe(const PhaseField& f1, const PhaseField& f2,
                           const std::vector<Vec3>& f3, int k, double t,
                           const SymbolSpec& spec, const TransportModel& model,
                           int lemma, int truncation_order = 2);

}  // namespace vpk
