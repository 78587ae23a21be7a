#include "vpk/lp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vpk/diagnostics.hpp"
#include "vpk/parallel.hpp"
#include "vpk/reconstruct.hpp"

namespace vpk {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

double psi_base(double x) {
  const double r = std::abs(x);
  if (r <= 1.25) return 1.0;
  if (r >= 1.5) return 0.0;
  const double s = (r - 1.25) / 0.25;
  const double step = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
  return 1.0 - step;
}

double psi_k(int k, double x) {
  return psi_base(std::ldexp(x, -k)) - psi_base(std::ldexp(x, -(k - 1)));
}

double psi_leq(int k, double x) { return psi_base(std::ldexp(x, -k)); }

double psi_geq(int k, double x) { return 1.0 - psi_leq(k - 1, x); }

SpatialField project_k(const SpatialField& u, int k) {
  const PhaseGrid& g = u.grid;
  std::vector<cplx> spec(g.nx_total);
  for (std::size_t i = 0; i < g.nx_total; ++i) spec[i] = u.values[i];
  dft_cube(spec.data(), g.d, g.Nx, -1);
  for (std::size_t lin = 0; lin < g.nx_total; ++lin) {
    std::size_t r = lin;
    double norm2 = 0.0;
    for (int ax = g.d - 1; ax >= 0; --ax) {
      const int m = static_cast<int>(r % static_cast<std::size_t>(g.Nx));
      r /= static_cast<std::size_t>(g.Nx);
      norm2 += g.xi_x[m] * g.xi_x[m];
    }
    spec[lin] *= psi_k(k, std::sqrt(norm2));
  }
  dft_cube(spec.data(), g.d, g.Nx, +1);
  SpatialField out(g);
  const double scale = 1.0 / static_cast<double>(g.nx_total);
  for (std::size_t i = 0; i < g.nx_total; ++i)
    out.values[i] = spec[i].real() * scale;
  return out;
}

bool shell_resolved(const PhaseGrid& g, int k) {
  const double nyquist = std::numbers::pi / g.dx;
  return std::ldexp(1.5, k) <= nyquist;
}

double symbol_norm(const std::function<double(const Vec3&)>& m, int k,
                   int alpha_max) {
  constexpr int N = 64;
  const double extent = std::ldexp(1.0, k + 2);
  const double dxi = 2.0 * extent / N;
  const double fd_step = std::ldexp(1.0, k) / 64.0;

  // Nested central differences for grad^alpha m.
  std::function<double(const Vec3&, MultiIndex)> fd = [&](const Vec3& xi,
                                                          MultiIndex alpha) {
    int ax = 0;
    while (ax < 3 && alpha[ax] == 0) ++ax;
    if (ax == 3) {
      const double val = m(xi);
      if (!std::isfinite(val))
        throw std::invalid_argument("symbol_norm: non-finite symbol value");
      return val;
    }
    alpha[ax] -= 1;
    Vec3 p = xi, q = xi;
    p[ax] += fd_step;
    q[ax] -= fd_step;
    return (fd(p, alpha) - fd(q, alpha)) / (2.0 * fd_step);
  };

  double total = 0.0;
  std::vector<cplx> h(static_cast<std::size_t>(N) * N * N);
  for (const MultiIndex& alpha : derivative_set(3, alpha_max)) {
    std::size_t lin = 0;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j)
        for (int l = 0; l < N; ++l) {
          const Vec3 xi = {(i - N / 2) * dxi, (j - N / 2) * dxi,
                           (l - N / 2) * dxi};
          const double r =
              std::sqrt(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
          const double cut = psi_k(k, r);
          h[lin++] = (cut == 0.0) ? 0.0 : fd(xi, alpha) * cut;
        }
    dft_cube(h.data(), 3, N, +1);
    double l1 = 0.0;
    for (const cplx& v : h) l1 += std::abs(v);
    // F^{-1} weight (2pi)^-3 dxi^3, L1 measure = conjugate spacing^3.
    const double x_spacing = kTwoPi / (N * dxi);
    l1 *= std::pow(dxi / kTwoPi, 3) * std::pow(x_spacing, 3);
    total += std::ldexp(l1, mi_order(alpha) * k);
  }
  return total;
}

// ---------------------------------------------------------------------------

namespace {

// Symbol-norm prefactor sum over v-derivatives of m up to `order`, sampled
// in v; identically the base norm when the symbol is trivial.
double symbol_prefactor(const SymbolSpec& spec, const PhaseGrid& g, int k,
                        int order) {
  if (!spec.m) return symbol_norm([](const Vec3&) { return 1.0; }, k, order);
  const double hv = 1e-3;
  std::vector<Vec3> vsamples = {{0.0, 0.0, 0.0},
                                {0.5 * g.Vmax, 0.5 * g.Vmax, 0.5 * g.Vmax}};
  double total = 0.0;
  for (const MultiIndex& beta : derivative_set(3, order)) {
    double best = 0.0;
    for (const Vec3& vs : vsamples) {
      auto mfun = [&](const Vec3& xi) {
        // central differences in v for grad_v^beta m
        std::function<double(Vec3, MultiIndex)> fd = [&](Vec3 v,
                                                         MultiIndex b) {
          int ax = 0;
          while (ax < 3 && b[ax] == 0) ++ax;
          if (ax == 3) return spec.m(xi, v);
          b[ax] -= 1;
          Vec3 p = v, q = v;
          p[ax] += hv;
          q[ax] -= hv;
          return (fd(p, b) - fd(q, b)) / (2.0 * hv);
        };
        return fd(vs, beta);
      };
      best = std::max(best, symbol_norm(mfun, k, order));
    }
    total += best;
  }
  return total;
}

}  // namespace

ProbeReport decay_probe(const PhaseField& g, double t, double a,
                        const SymbolSpec& spec, const TransportModel& model,
                        const Vec3& x, int truncation_order) {
  const PhaseGrid& gr = g.grid;
  if (gr.d != 3) throw std::invalid_argument("decay_probe: d = 3 only");
  if (std::abs(t) < 1.0)
    throw std::invalid_argument("decay_probe: requires |t| >= 1");
  if (a <= -3.0) throw std::invalid_argument("decay_probe: requires a > -3");

  // Fine frequency lattice, echo-capped extent, image-safe spacing.
  const double gamma = 0.45;
  const double Xi =
      std::min(0.999 * std::numbers::pi / gr.dx,
               gamma * kTwoPi / (std::abs(t) * gr.dv));
  const double amax = max_speed(gr, model);
  const double xmax = std::max({std::abs(x[0]), std::abs(x[1]), std::abs(x[2])});
  const double L_im = 0.5 * gr.Lx + std::abs(t) * amax + xmax + 4.0 * gr.dx;
  const double dxi = kTwoPi / L_im;
  const int half = std::min(128, static_cast<int>(std::ceil(Xi / dxi)));
  const int mq = 2 * half + 1;
  std::vector<double> xi(mq);
  for (int q = 0; q < mq; ++q) xi[q] = (q - half) * dxi;
  std::vector<cplx> Ex(static_cast<std::size_t>(mq) * gr.Nx);
  for (int q = 0; q < mq; ++q)
    for (int n = 0; n < gr.Nx; ++n)
      Ex[static_cast<std::size_t>(q) * gr.Nx + n] =
          std::polar(gr.dx, -gr.x_nodes[n] * xi[q]);
  // |xi|^a table over the lattice.
  const std::size_t mtot = static_cast<std::size_t>(mq) * mq * mq;
  std::vector<double> xia(mtot);
  {
    std::size_t idx = 0;
    for (int q0 = 0; q0 < mq; ++q0)
      for (int q1 = 0; q1 < mq; ++q1)
        for (int q2 = 0; q2 < mq; ++q2) {
          const double r =
              std::sqrt(xi[q0] * xi[q0] + xi[q1] * xi[q1] + xi[q2] * xi[q2]);
          xia[idx++] = (r == 0.0) ? (a == 0.0 ? 1.0 : 0.0) : std::pow(r, a);
        }
  }

  const int N = gr.Nx;
  const std::size_t chunks = std::min<std::size_t>(16, gr.nv_total);
  std::vector<std::vector<cplx>> phi_acc(chunks);
  parallel_chunks(gr.nv_total, chunks,
                  [&](std::size_t b, std::size_t e, std::size_t c) {
    phi_acc[c].assign(mtot, cplx(0.0, 0.0));
    std::vector<cplx> s1(static_cast<std::size_t>(mq) * N * N);
    std::vector<cplx> s2(static_cast<std::size_t>(mq) * mq * N);
    std::vector<cplx> p0(mq), p1(mq), p2(mq);
    Vec3 v;
    for (std::size_t j = b; j < e; ++j) {
      const double* slice = g.slice(j);
      // axis-0 contraction (real input)
      for (int q = 0; q < mq; ++q) {
        cplx* row = s1.data() + static_cast<std::size_t>(q) * N * N;
        std::fill(row, row + static_cast<std::size_t>(N) * N, cplx(0.0, 0.0));
        const cplx* ph = Ex.data() + static_cast<std::size_t>(q) * N;
        for (int n = 0; n < N; ++n) {
          const double pr = ph[n].real(), pi = ph[n].imag();
          const double* src = slice + static_cast<std::size_t>(n) * N * N;
          double* dst = reinterpret_cast<double*>(row);
          for (std::size_t i = 0; i < static_cast<std::size_t>(N) * N; ++i) {
            dst[2 * i] += pr * src[i];
            dst[2 * i + 1] += pi * src[i];
          }
        }
      }
      // axis-1
      for (int q0 = 0; q0 < mq; ++q0)
        for (int q1 = 0; q1 < mq; ++q1) {
          cplx* row =
              s2.data() + (static_cast<std::size_t>(q0) * mq + q1) * N;
          std::fill(row, row + N, cplx(0.0, 0.0));
          const cplx* ph = Ex.data() + static_cast<std::size_t>(q1) * N;
          const cplx* in = s1.data() + static_cast<std::size_t>(q0) * N * N;
          for (int n = 0; n < N; ++n) {
            const cplx p = ph[n];
            const cplx* src = in + static_cast<std::size_t>(n) * N;
            for (int l = 0; l < N; ++l) row[l] += p * src[l];
          }
        }
      // axis-2 + accumulate with transport phase and symbol.
      gr.v_coord(j, v);
      const Vec3 av = velocity_map(v, model);
      for (int q = 0; q < mq; ++q) {
        p0[q] = std::polar(1.0, t * av[0] * xi[q]);
        p1[q] = std::polar(1.0, t * av[1] * xi[q]);
        p2[q] = std::polar(1.0, t * av[2] * xi[q]);
      }
      cplx* acc = phi_acc[c].data();
      std::size_t idx = 0;
      for (int q0 = 0; q0 < mq; ++q0)
        for (int q1 = 0; q1 < mq; ++q1) {
          const cplx p01 = p0[q0] * p1[q1];
          const cplx* in = s2.data() + (static_cast<std::size_t>(q0) * mq + q1) * N;
          for (int q2 = 0; q2 < mq; ++q2) {
            cplx ghat(0.0, 0.0);
            const cplx* ph = Ex.data() + static_cast<std::size_t>(q2) * N;
            for (int n = 0; n < N; ++n) ghat += ph[n] * in[n];
            double sym = xia[idx];
            if (spec.m)
              sym *= spec.m({xi[q0], xi[q1], xi[q2]}, v);
            acc[idx] += (p01 * p2[q2]) * ghat * sym;
            ++idx;
          }
        }
    }
  });
  std::vector<cplx> phi(mtot, cplx(0.0, 0.0));
  for (std::size_t c = 0; c < chunks; ++c)
    for (std::size_t i = 0; i < mtot; ++i) phi[i] += phi_acc[c][i];

  cplx lhs_c(0.0, 0.0);
  {
    std::vector<cplx> e0(mq), e1(mq), e2(mq);
    for (int q = 0; q < mq; ++q) {
      e0[q] = std::polar(1.0, x[0] * xi[q]);
      e1[q] = std::polar(1.0, x[1] * xi[q]);
      e2[q] = std::polar(1.0, x[2] * xi[q]);
    }
    std::size_t idx = 0;
    for (int q0 = 0; q0 < mq; ++q0)
      for (int q1 = 0; q1 < mq; ++q1) {
        const cplx p01 = e0[q0] * e1[q1];
        for (int q2 = 0; q2 < mq; ++q2) lhs_c += p01 * e2[q2] * phi[idx++];
      }
  }
  const double lhs =
      std::abs(lhs_c) * gr.cell_v() * dxi * dxi * dxi;

  // Constant-free right side.
  const int dmax = std::min(5 + static_cast<int>(std::floor(a)),
                            truncation_order);
  const double smult = symbol_prefactor(spec, gr, 0, truncation_order);
  const std::vector<double> mhat = zero_mode(g);
  const auto alphas = derivative_set(3, std::max(dmax, 0));
  const double wexp = 5.0 + std::abs(a);

  std::vector<double> wv(gr.nv_total);
  Vec3 vv;
  for (std::size_t j = 0; j < gr.nv_total; ++j) {
    gr.v_coord(j, vv);
    wv[j] = std::pow(
        1.0 + std::sqrt(vv[0] * vv[0] + vv[1] * vv[1] + vv[2] * vv[2]), wexp);
  }
  std::vector<double> wx(gr.nx_total);
  Vec3 xx;
  for (std::size_t i = 0; i < gr.nx_total; ++i) {
    gr.x_coord(i, xx);
    wx[i] = 1.0 + std::sqrt(xx[0] * xx[0] + xx[1] * xx[1] + xx[2] * xx[2]);
  }

  double term = 0.0;
  std::vector<double> l1b(alphas.size(), 0.0);
  for_each_v_derivative(g, alphas, [&](std::size_t ai, const PhaseField& dg) {
    double acc = 0.0;
    for (std::size_t j = 0; j < gr.nv_total; ++j) {
      const double* s = dg.slice(j);
      double inner = 0.0;
      for (std::size_t i = 0; i < gr.nx_total; ++i)
        inner += wx[i] * std::abs(s[i]);
      acc += wv[j] * inner;
    }
    l1b[ai] = acc * gr.cell_x() * gr.cell_v();
  });
  for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
    const std::vector<double> dm = vcube_derivative(mhat, gr, alphas[ai]);
    double l1a = 0.0;
    for (std::size_t j = 0; j < gr.nv_total; ++j)
      l1a += wv[j] * std::abs(dm[j]);
    l1a *= gr.cell_v();
    term += std::pow(std::abs(t), -3.0 - a) * l1a +
            std::pow(std::abs(t), -4.0 - a) * l1b[ai];
  }

  ProbeReport rep;
  rep.t = t;
  rep.a = a;
  rep.lhs = lhs;
  rep.rhs = smult * term;
  rep.ratio = rep.rhs > 0.0 ? rep.lhs / rep.rhs : 0.0;
  rep.truncation_order = truncation_order;
  return rep;
}

PhaseField bilinear_Bk(const PhaseField& f1, const PhaseField& f2, int k,
                       double t, const SymbolSpec& spec,
                       const TransportModel& model) {
  const PhaseGrid& gr = f2.grid;
  if (f1.grid.nx_total != gr.nx_total || f1.grid.nv_total != gr.nv_total)
    throw GridError("bilinear_Bk: grid mismatch");
  const int d = gr.d;
  const double mu = static_cast<double>(model.mu);
  const double dxi = kTwoPi / gr.Lx;

  // psi_k(|xi|) and per-axis xi decode tables over the x-spectral cube.
  std::vector<double> psik(gr.nx_total);
  std::vector<Vec3> xiv(gr.nx_total);
  for (std::size_t lin = 0; lin < gr.nx_total; ++lin) {
    std::size_t r = lin;
    Vec3 xi = {0.0, 0.0, 0.0};
    for (int ax = d - 1; ax >= 0; --ax) {
      const int m = static_cast<int>(r % static_cast<std::size_t>(gr.Nx));
      r /= static_cast<std::size_t>(gr.Nx);
      xi[ax] = gr.xi_x[m];
    }
    xiv[lin] = xi;
    psik[lin] =
        psi_k(k, std::sqrt(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]));
  }

  const std::size_t chunks = std::min<std::size_t>(16, gr.nv_total);
  std::vector<std::vector<cplx>> acc(chunks);
  parallel_chunks(gr.nv_total, chunks,
                  [&](std::size_t b, std::size_t e, std::size_t c) {
    acc[c].assign(gr.nx_total, cplx(0.0, 0.0));
    std::vector<cplx> spec_buf(gr.nx_total);
    Vec3 u;
    for (std::size_t j = b; j < e; ++j) {
      gr.v_coord(j, u);
      const double cu = spec.eval_c(u);
      if (cu == 0.0) continue;
      const Vec3 au = velocity_map(u, model);
      fourier_forward(f2.slice(j), spec_buf.data(), d, gr.Nx, gr.Lx);
      for (std::size_t lin = 0; lin < gr.nx_total; ++lin) {
        if (psik[lin] == 0.0) continue;
        double dot = 0.0;
        for (int ax = 0; ax < d; ++ax) dot += au[ax] * xiv[lin][ax];
        const double mval = spec.m ? spec.m(xiv[lin], u) : 1.0;
        acc[c][lin] += spec_buf[lin] * std::polar(cu * mval, -mu * t * dot);
      }
    }
  });
  std::vector<cplx> Ehat(gr.nx_total, cplx(0.0, 0.0));
  for (std::size_t c = 0; c < chunks; ++c)
    for (std::size_t i = 0; i < gr.nx_total; ++i) Ehat[i] += acc[c][i];
  const double measure = std::pow(dxi, d) * gr.cell_v();
  for (std::size_t i = 0; i < gr.nx_total; ++i)
    Ehat[i] *= psik[i] * measure;

  PhaseField out(gr);
  parallel_chunks(gr.nv_total, chunks,
                  [&](std::size_t b, std::size_t e, std::size_t) {
    std::vector<cplx> W(gr.nx_total);
    Vec3 v;
    MultiIndex mi;
    for (std::size_t j = b; j < e; ++j) {
      gr.v_coord(j, v);
      const Vec3 av = velocity_map(v, model);
      for (std::size_t lin = 0; lin < gr.nx_total; ++lin) {
        double dot = 0.0;
        for (int ax = 0; ax < d; ++ax) dot += av[ax] * xiv[lin][ax];
        // parity restores evaluation at nodes starting at -Lx/2
        std::size_t r = lin;
        int parity = 0;
        for (int ax = 0; ax < d; ++ax) {
          parity += static_cast<int>(r % static_cast<std::size_t>(gr.Nx));
          r /= static_cast<std::size_t>(gr.Nx);
        }
        const cplx ph = std::polar((parity & 1) ? -1.0 : 1.0, t * dot);
        W[lin] = Ehat[lin] * ph;
      }
      dft_cube(W.data(), d, gr.Nx, +1);
      const double* s1 = f1.slice(j);
      double* o = out.slice(j);
      for (std::size_t i = 0; i < gr.nx_total; ++i)
        o[i] = s1[i] * W[i].real();
    }
  });
  return out;
}

ProbeReport bilinear_probe(const PhaseField& f1, const PhaseField& f2,
                           const std::vector<Vec3>& f3, int k, double t,
                           const SymbolSpec& spec, const TransportModel& model,
                           int lemma, int truncation_order) {
  const PhaseGrid& gr = f2.grid;
  if (std::abs(t) < 1.0)
    throw std::invalid_argument("bilinear_probe: requires |t| >= 1");
  const double pk = std::ldexp(1.0, k);
  if (lemma == 2 && (pk > 1.0 || pk < 1.0 / std::abs(t)))
    throw std::invalid_argument(
        "bilinear_probe: lemma-2 form requires 1/|t| <= 2^k <= 1");

  const PhaseField bk = bilinear_Bk(f1, f2, k, t, spec, model);
  const double lhs = l2_norm(bk);

  auto w20 = [](const Vec3& x, const Vec3& v) {
    const double ax = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    const double av = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    return std::pow(1.0 + av + ax, 20);
  };

  const int dmax = std::min(5, truncation_order);
  double f1norm = 0.0;
  for_each_v_derivative(f1, derivative_set(gr.d, dmax),
                        [&](std::size_t, const PhaseField& df) {
                          f1norm += l2_norm(df, w20);
                        });
  const double cf2 = l2_norm(f2, [&](const Vec3& x, const Vec3& v) {
    return w20(x, v) * std::abs(spec.eval_c(v));
  });
  const double sm = symbol_norm(
      [&](const Vec3& xi) { return spec.eval_m(xi, {0.0, 0.0, 0.0}); }, k,
      truncation_order);

  double rhs = 0.0;
  if (lemma == 3) {
    rhs = std::min(std::pow(std::abs(t), -3.0), std::ldexp(1.0, 3 * k)) * sm *
          cf2 * f1norm;
  } else if (lemma == 2) {
    // grad_v m contribution to the symbol factor.
    double sm_dv = 0.0;
    if (spec.m) {
      const double hv = 1e-3;
      for (int c = 0; c < gr.d; ++c)
        sm_dv += symbol_norm(
            [&](const Vec3& xi) {
              Vec3 p = {0.0, 0.0, 0.0}, q = {0.0, 0.0, 0.0};
              p[c] += hv;
              q[c] -= hv;
              return (spec.m(xi, p) - spec.m(xi, q)) / (2.0 * hv);
            },
            k, truncation_order);
    }
    // ||(|c| + |grad c|) f3||_{L2_v} and ||c (f2_hat(0,.) - div_v f3)||_{L2_v}
    const double hv = 1e-4;
    double t1 = 0.0;
    std::vector<std::vector<double>> f3c(
        gr.d, std::vector<double>(gr.nv_total, 0.0));
    Vec3 v;
    for (std::size_t j = 0; j < gr.nv_total; ++j) {
      gr.v_coord(j, v);
      double cgrad = 0.0;
      for (int c = 0; c < gr.d; ++c) {
        Vec3 p = v, q = v;
        p[c] += hv;
        q[c] -= hv;
        const double dc = (spec.eval_c(p) - spec.eval_c(q)) / (2.0 * hv);
        cgrad += dc * dc;
        f3c[c][j] = f3.empty() ? 0.0 : f3[j][c];
      }
      const double cab = std::abs(spec.eval_c(v)) + std::sqrt(cgrad);
      double mag2 = 0.0;
      if (!f3.empty())
        for (int c = 0; c < gr.d; ++c) mag2 += f3[j][c] * f3[j][c];
      t1 += cab * cab * mag2;
    }
    t1 = std::sqrt(gr.cell_v() * t1);

    std::vector<double> div(gr.nv_total, 0.0);
    for (int c = 0; c < gr.d; ++c) {
      MultiIndex e = {0, 0, 0};
      e[c] = 1;
      const std::vector<double> dcv = vcube_derivative(f3c[c], gr, e);
      for (std::size_t j = 0; j < gr.nv_total; ++j) div[j] += dcv[j];
    }
    const std::vector<double> f2hat0 = zero_mode(f2);
    double t3 = 0.0;
    for (std::size_t j = 0; j < gr.nv_total; ++j) {
      gr.v_coord(j, v);
      const double val = spec.eval_c(v) * (f2hat0[j] - div[j]);
      t3 += val * val;
    }
    t3 = std::sqrt(gr.cell_v() * t3);

    const double it = std::abs(t);
    rhs = (sm + sm_dv) * f1norm *
          (std::pow(it, -2.0) * pk * t1 + std::pow(it, -3.0) * pk * cf2 +
           std::pow(it, -3.0) * t3);
  } else {
    throw std::invalid_argument("bilinear_probe: lemma must be 2 or 3");
  }

  ProbeReport rep;
  rep.t = t;
  rep.k = k;
  rep.a = spec.a;
  rep.lhs = lhs;
  rep.rhs = rhs;
  rep.ratio = rhs > 0.0 ? lhs / rhs : 0.0;
  rep.truncation_order = truncation_order;
  return rep;
}

}  // namespace vpk
