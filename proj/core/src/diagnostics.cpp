#include "vpk/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vpk/fft.hpp"
#include "vpk/parallel.hpp"
#include "vpk/reconstruct.hpp"

namespace vpk {

std::vector<double> vcube_derivative(const std::vector<double>& m,
                                     const PhaseGrid& g,
                                     const MultiIndex& alpha) {
  std::vector<cplx> spec(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) spec[i] = m[i];
  dft_cube(spec.data(), g.d, g.Nv, -1);
  for (std::size_t j = 0; j < g.nv_total; ++j) {
    std::size_t r = j;
    cplx mult(1.0, 0.0);
    for (int ax = g.d - 1; ax >= 0; --ax) {
      const int mm = static_cast<int>(r % static_cast<std::size_t>(g.Nv));
      r /= static_cast<std::size_t>(g.Nv);
      for (int p = 0; p < alpha[ax]; ++p) mult *= cplx(0.0, g.xi_v[mm]);
    }
    spec[j] *= mult;
  }
  dft_cube(spec.data(), g.d, g.Nv, +1);
  std::vector<double> out(m.size());
  const double scale = 1.0 / static_cast<double>(g.nv_total);
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = spec[i].real() * scale;
  return out;
}

namespace {

std::vector<double> abs_x_table(const PhaseGrid& g) {
  std::vector<double> absx(g.nx_total);
  Vec3 x;
  for (std::size_t i = 0; i < g.nx_total; ++i) {
    g.x_coord(i, x);
    absx[i] = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
  }
  return absx;
}

double abs_v_of(const PhaseGrid& g, std::size_t j) {
  Vec3 v;
  g.v_coord(j, v);
  return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

}  // namespace

std::vector<double> zero_mode(const PhaseField& g) {
  const PhaseGrid& gr = g.grid;
  std::vector<double> m(gr.nv_total);
  const double cell = gr.cell_x();
  for (std::size_t j = 0; j < gr.nv_total; ++j)
    m[j] = cell * pairwise_sum(g.slice(j), gr.nx_total);
  return m;
}

std::pair<double, double> energy_high(const PhaseField& g,
                                      const WeightConfig& w) {
  const PhaseGrid& gr = g.grid;
  const int d = gr.d;
  const auto betas = derivative_set(d, w.N0);
  const std::vector<double> absx = abs_x_table(gr);

  double e1 = 0.0, e2 = 0.0;
  for_each_v_derivative(g, betas, [&](std::size_t bi, const PhaseField& gb) {
    const int bo = mi_order(betas[bi]);
    const auto alphas = derivative_set(d, w.N0 - bo);
    const std::size_t na = alphas.size();
    const std::size_t chunks = std::min<std::size_t>(32, gr.nv_total);
    std::vector<std::vector<double>> partial(chunks,
                                             std::vector<double>(na, 0.0));
    parallel_chunks(gr.nv_total, chunks,
                    [&](std::size_t b, std::size_t e, std::size_t c) {
      std::vector<cplx> spec(gr.nx_total), work(gr.nx_total);
      const double scale = 1.0 / static_cast<double>(gr.nx_total);
      for (std::size_t j = b; j < e; ++j) {
        const double* s = gb.slice(j);
        for (std::size_t i = 0; i < gr.nx_total; ++i) spec[i] = s[i];
        dft_cube(spec.data(), d, gr.Nx, -1);
        const double av = abs_v_of(gr, j);
        for (std::size_t ai = 0; ai < na; ++ai) {
          const MultiIndex& alpha = alphas[ai];
          for (std::size_t lin = 0; lin < gr.nx_total; ++lin) {
            std::size_t r = lin;
            cplx mult(1.0, 0.0);
            for (int ax = d - 1; ax >= 0; --ax) {
              const int mm =
                  static_cast<int>(r % static_cast<std::size_t>(gr.Nx));
              r /= static_cast<std::size_t>(gr.Nx);
              for (int p = 0; p < alpha[ax]; ++p) mult *= cplx(0.0, gr.xi_x[mm]);
            }
            work[lin] = spec[lin] * mult;
          }
          dft_cube(work.data(), d, gr.Nx, +1);
          const int expo = w.exponent_high(mi_order(alpha) + bo);
          double acc = 0.0;
          for (std::size_t i = 0; i < gr.nx_total; ++i) {
            const double u = work[i].real() * scale;
            const double weight = std::pow(1.0 + av + absx[i], expo);
            acc += weight * weight * u * u;
          }
          partial[c][ai] += acc;
        }
      }
    });
    const double cell = gr.cell_x() * gr.cell_v();
    for (std::size_t ai = 0; ai < na; ++ai) {
      double sum = 0.0;
      for (std::size_t c = 0; c < chunks; ++c) sum += partial[c][ai];
      const double norm = std::sqrt(cell * sum);
      if (mi_order(alphas[ai]) + bo == w.N0)
        e1 += norm;
      else
        e2 += norm;
    }
  });
  return {e1, e2};
}

CorrectionAccumulator make_correction_accumulator(const PhaseGrid& g,
                                                  const WeightConfig& w) {
  CorrectionAccumulator acc;
  for (const MultiIndex& a : derivative_set(g.d, w.N0))
    if (mi_order(a) == w.N0) acc.alphas.push_back(a);
  acc.g_alpha.assign(acc.alphas.size(),
                     std::vector<double>(g.d * g.nv_total, 0.0));
  return acc;
}

void accumulate_correction(CorrectionAccumulator& acc, const PhaseField& g,
                           double t, const ShiftedForceFn& force) {
  const PhaseGrid& gr = g.grid;
  const std::size_t na = acc.alphas.size();
  const std::size_t nv = gr.nv_total;
  const int d = gr.d;

  std::vector<PhaseField> dg(na);
  for_each_v_derivative(g, acc.alphas, [&](std::size_t ai, const PhaseField& f) {
    dg[ai] = f;
  });

  std::vector<std::vector<double>> cur(
      na, std::vector<double>(static_cast<std::size_t>(d) * nv, 0.0));
  const std::size_t chunks = std::min<std::size_t>(32, nv);
  parallel_chunks(nv, chunks, [&](std::size_t b, std::size_t e, std::size_t) {
    std::vector<Vec3> F(gr.nx_total);
    for (std::size_t j = b; j < e; ++j) {
      force(j, F.data());
      for (std::size_t ai = 0; ai < na; ++ai) {
        const double* s = dg[ai].slice(j);
        double dot[3] = {0.0, 0.0, 0.0};
        for (std::size_t i = 0; i < gr.nx_total; ++i)
          for (int c = 0; c < d; ++c) dot[c] += F[i][c] * s[i];
        for (int c = 0; c < d; ++c)
          cur[ai][static_cast<std::size_t>(c) * nv + j] = dot[c] * gr.cell_x();
      }
    }
  });

  if (acc.has_prev) {
    const double half = 0.5 * (t - acc.prev_t);
    for (std::size_t ai = 0; ai < na; ++ai)
      for (std::size_t i = 0; i < cur[ai].size(); ++i)
        acc.g_alpha[ai][i] += half * (acc.prev[ai][i] + cur[ai][i]);
  }
  acc.prev = std::move(cur);
  acc.prev_t = t;
  acc.has_prev = true;
}

double correction_norm(const CorrectionAccumulator& acc, const PhaseGrid& g,
                       const WeightConfig& w) {
  double total = 0.0;
  const int expo = w.exponent_low(w.N0);
  for (const auto& ga : acc.g_alpha) {
    double sum = 0.0;
    for (std::size_t j = 0; j < g.nv_total; ++j) {
      const double weight = std::pow(1.0 + abs_v_of(g, j), expo);
      double mag2 = 0.0;
      for (int c = 0; c < g.d; ++c) {
        const double u = ga[static_cast<std::size_t>(c) * g.nv_total + j];
        mag2 += u * u;
      }
      sum += weight * weight * mag2;
    }
    total += std::sqrt(g.cell_v() * sum);
  }
  return total;
}

double energy_low(const PhaseField& g, const CorrectionAccumulator& corr,
                  const WeightConfig& w) {
  const PhaseGrid& gr = g.grid;
  const std::vector<double> m = zero_mode(g);
  const auto alphas = derivative_set(gr.d, w.N0);
  double total = 0.0;
  for (const MultiIndex& alpha : alphas) {
    std::vector<double> dm = vcube_derivative(m, gr, alpha);
    if (mi_order(alpha) == w.N0) {
      // Subtract div_v g_alpha for this alpha.
      std::size_t ai = 0;
      while (ai < corr.alphas.size() && corr.alphas[ai] != alpha) ++ai;
      if (ai < corr.alphas.size()) {
        for (int c = 0; c < gr.d; ++c) {
          MultiIndex e = {0, 0, 0};
          e[c] = 1;
          std::vector<double> comp(gr.nv_total);
          for (std::size_t j = 0; j < gr.nv_total; ++j)
            comp[j] =
                corr.g_alpha[ai][static_cast<std::size_t>(c) * gr.nv_total + j];
          const std::vector<double> dc = vcube_derivative(comp, gr, e);
          for (std::size_t j = 0; j < gr.nv_total; ++j) dm[j] -= dc[j];
        }
      }
    }
    const int expo = w.exponent_low(mi_order(alpha));
    double sum = 0.0;
    for (std::size_t j = 0; j < gr.nv_total; ++j) {
      const double weight = std::pow(1.0 + abs_v_of(gr, j), expo);
      sum += weight * weight * dm[j] * dm[j];
    }
    total += std::sqrt(gr.cell_v() * sum);
  }
  return total;
}

double scattering_gap(const std::vector<double>& ma,
                      const std::vector<double>& mb, const PhaseGrid& g,
                      const WeightConfig& w) {
  if (ma.size() != g.nv_total || mb.size() != g.nv_total)
    throw std::invalid_argument("scattering_gap: size mismatch");
  const int expo = w.exponent_low(0);
  double sum = 0.0;
  for (std::size_t j = 0; j < g.nv_total; ++j) {
    const double weight = std::pow(1.0 + abs_v_of(g, j), expo);
    const double diff = ma[j] - mb[j];
    sum += weight * weight * diff * diff;
  }
  return std::sqrt(g.cell_v() * sum);
}

FitResult fit_power_law(const std::vector<std::pair<double, double>>& series,
                        double t_lo, double t_hi) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& [t, y] : series) {
    if (t < t_lo || t > t_hi) continue;
    if (!(y > 0.0) || !(t > 0.0))
      throw std::invalid_argument(
          "fit_power_law: nonpositive sample in the fit window");
    pts.emplace_back(std::log(t), std::log(y));
  }
  if (pts.size() < 4)
    throw std::invalid_argument("fit_power_law: need at least 4 samples");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(pts.size());
  const double denom = n * sxx - sx * sx;
  FitResult r;
  r.slope = (n * sxy - sx * sy) / denom;
  r.intercept = (sy - r.slope * sx) / n;
  r.n_used = static_cast<int>(pts.size());
  for (const auto& [x, y] : pts)
    r.max_residual =
        std::max(r.max_residual, std::abs(y - (r.slope * x + r.intercept)));
  return r;
}

namespace {

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double fa, double fm, double fb, double tol,
                        int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
  // Pre-subdivide so narrow spikes (the large-t radial integrand collapses
  // to a thin shell near r = 0) cannot slip between the initial nodes.
  constexpr int panels = 128;
  const double h = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h, hi = lo + h;
    const double m = 0.5 * (lo + hi);
    total += adaptive_simpson(f, lo, hi, f(lo), f(m), f(hi), tol / panels, 32);
  }
  return total;
}

}  // namespace

double free_stream_oracle(const GaussianSpec& spec, double t, const Vec3& x,
                          int d, const TransportModel& model) {
  const double sx2 = spec.sigma_x * spec.sigma_x;
  const double sv2 = spec.sigma_v * spec.sigma_v;
  if (model.law == TransportLaw::nonrelativistic) {
    const double s2 = sx2 + t * t * sv2;
    double r2 = 0.0;
    for (int ax = 0; ax < d; ++ax) r2 += x[ax] * x[ax];
    return spec.amplitude *
           std::pow(2.0 * std::numbers::pi * sx2 * sv2 / s2, 0.5 * d) *
           std::exp(-r2 / (2.0 * s2));
  }
  if (d != 3)
    throw std::invalid_argument(
        "free_stream_oracle: relativistic law implemented for d = 3 only");
  const double R = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
  // rho = 2 pi A  int r^2 e^{-r^2/2sv^2}
  //        [e^{-(R-tau)^2/2sx^2} - e^{-(R+tau)^2/2sx^2}] sx^2/(R tau) dr,
  // tau = t r/sqrt(1+r^2); the bracket/(R tau) is replaced by its series for
  // small R tau.
  auto integrand = [&](double r) {
    const double tau = t * r / std::sqrt(1.0 + r * r);
    const double radial = r * r * std::exp(-r * r / (2.0 * sv2));
    const double b = R * tau / sx2;
    double ang;
    if (std::abs(b) < 1e-6) {
      ang = 2.0 * std::exp(-(R * R + tau * tau) / (2.0 * sx2)) *
            (1.0 + b * b / 6.0);
    } else {
      ang = (std::exp(-(R - tau) * (R - tau) / (2.0 * sx2)) -
             std::exp(-(R + tau) * (R + tau) / (2.0 * sx2))) /
            b;
    }
    return radial * ang;
  };
  const double rmax = 12.0 * spec.sigma_v;
  const double peak =
      spec.amplitude * std::pow(2.0 * std::numbers::pi, 1.5) * sv2 *
      spec.sigma_v;
  const double val =
      integrate(integrand, 0.0, rmax, 1e-10 * std::max(peak, 1e-300));
  return 2.0 * std::numbers::pi * spec.amplitude * val;
}

}  // namespace vpk
