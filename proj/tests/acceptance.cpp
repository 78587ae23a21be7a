// Acceptance gates, one criterion per invocation: `acceptance <1..12>`.
// Prints exactly one "criterion N: PASS|FAIL" line (plus measured details)
// and exits 0 on pass, 1 on fail. Long runs are cached under
// acceptance_cache/ in the working directory so dependent criteria reuse
// them instead of re-integrating.
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vpk/diagnostics.hpp"
#include "vpk/io.hpp"
#include "vpk/lp.hpp"
#include "vpk/parallel.hpp"
#include "vpk/profile_solver.hpp"
#include "vpk/run.hpp"
#include "vpk/torus_solver.hpp"

using namespace vpk;
namespace fs = std::filesystem;

namespace {

struct Gate {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    detail << "  [" << (ok ? "ok" : "VIOLATED") << "] " << what << '\n';
  }
};

const std::string kCache = "acceptance_cache";

RunConfig criterion4_config() {
  RunConfig cfg;
  cfg.backend = "profile";
  cfg.model.law = TransportLaw::relativistic;
  cfg.model.mu = +1;
  cfg.d = 3;
  cfg.Nx = 16;
  cfg.Nv = 16;
  cfg.Lx = 16.0;
  cfg.Vmax = 7.0;
  cfg.sigma_x = 1.0;
  cfg.sigma_v = 0.9;
  cfg.epsilon0 = 1e-3;
  cfg.dt = 0.5;
  cfg.T = 32.0;
  cfg.sample_cadence = 1.0;
  cfg.fit_lo = 10.0;
  cfg.fit_hi = 32.5;
  return cfg;
}

// Runs (or reuses) the criterion-4 integration in <cache>/<tag>, recording
// the final-state gap ||g(T) - g(0)||_L2 alongside the standard outputs.
nlohmann::json ensure_run(const RunConfig& cfg, const std::string& tag) {
  const std::string dir = kCache + "/" + tag;
  const std::string marker = dir + "/gap.txt";
  if (!fs::exists(marker)) {
    RunConfig local = cfg;
    local.output_dir = dir;
    const RunOutput out = run_simulation(local);
    PhaseField diff = build_initial_data(local);
    for (std::size_t i = 0; i < diff.values.size(); ++i)
      diff.values[i] = out.final_state.values[i] - diff.values[i];
    std::ofstream gap(marker, std::ios::trunc);
    gap << format_science(l2_norm(diff)) << '\n';
  }
  std::ifstream js(dir + "/summary.json");
  nlohmann::json summary;
  js >> summary;
  std::ifstream gp(marker);
  double gap = 0.0;
  gp >> gap;
  summary["final_gap_l2"] = gap;
  return summary;
}

PhaseField gaussian_on(const PhaseGrid& g, double eps, double sx, double sv) {
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

// ---- criteria ------------------------------------------------------------

void criterion_1(Gate& g) {
  const PhaseGrid grid = build_grid(3, 16, 32, 16.0, 6.0);
  GaussianSliceSource src(grid, 1.0, 1.0, 1.0);
  DensityReconstructor rec(src, TransportModel{});
  const std::vector<double> ts = {0.0, 0.5, 1.0, 2.0,  4.0,  7.0,  10.0, 13.0,
                                  16.0, 20.0, 24.0, 28.0, 32.0, 36.0, 40.0};
  std::vector<SampleRequest> reqs;
  for (double t : ts) {
    SampleRequest r;
    r.t = t;
    r.targets.push_back({0, 0, 0});
    reqs.push_back(r);
  }
  const std::vector<SampleResult> res = rec.evaluate_batch(reqs);
  double worst = 0.0, worst_t = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double expect = std::pow(2.0 * std::numbers::pi, 1.5) *
                          std::pow(1.0 + ts[i] * ts[i], -1.5);
    const double err = std::abs(res[i].values[0][0] - expect) / expect;
    if (err > worst) {
      worst = err;
      worst_t = ts[i];
    }
  }
  std::ostringstream what;
  what << "max relative density error " << worst << " (at t = " << worst_t
       << ") <= 1e-4 on t in [0, 40]";
  g.require(worst <= 1e-4, what.str());
}

void fit_sup_slopes(Gate& g, const TransportModel& model, int kmax,
                    const std::vector<double>& tols) {
  const PhaseGrid grid = build_grid(3, 16, 32, 16.0, 6.0);
  GaussianSliceSource src(grid, 1.0, 1.0, 1.0);
  PhaseField f(grid);
  for (std::size_t j = 0; j < grid.nv_total; ++j) src.load_slice(j, f.slice(j));
  const std::vector<double> ts = {10.0, 12.5, 16.0, 20.0, 25.0, 32.0, 40.0};
  for (int k = 0; k <= kmax; ++k) {
    std::vector<std::pair<double, double>> series;
    for (double t : ts)
      series.emplace_back(t, sup_density_derivative(f, t, model, k));
    const FitResult fit = fit_power_law(series, 10.0, 40.0);
    const double target = -(3.0 + k);
    std::ostringstream what;
    what << "sup |grad^" << k << " rho| slope " << fit.slope << " = " << target
         << " +/- " << tols[k];
    g.require(std::abs(fit.slope - target) <= tols[k], what.str());
  }
}

void criterion_2(Gate& g) {
  fit_sup_slopes(g, TransportModel{}, 2, {0.05, 0.10, 0.15});
}

void criterion_3(Gate& g) {
  // Relativistic free streaming has no closed-form density; the quadrature
  // oracle (adaptive radial quadrature over velocity, gridless) is the
  // measurement. Fit the decay of rho(t, 0) it reports.
  TransportModel rel;
  rel.law = TransportLaw::relativistic;
  const std::vector<double> ts = {10.0, 12.5, 16.0, 20.0, 25.0, 32.0, 40.0};
  std::vector<std::pair<double, double>> series;
  for (double t : ts)
    series.emplace_back(t,
                        free_stream_oracle({1.0, 1.0, 1.0}, t, {0, 0, 0}, 3, rel));
  const FitResult fit = fit_power_law(series, 10.0, 40.0);
  std::ostringstream what;
  what << "relativistic rho(t, 0) decay slope " << fit.slope
       << " = -3 +/- 0.10";
  g.require(std::abs(fit.slope + 3.0) <= 0.10, what.str());
}

void criterion_4(Gate& g) {
  const nlohmann::json s = ensure_run(criterion4_config(), "c4_threads1");
  const double slope = s["fit_sup_rho"].contains("slope")
                           ? s["fit_sup_rho"]["slope"].get<double>()
                           : std::nan("");
  {
    std::ostringstream what;
    what << "density decay slope " << slope << " in [-3.3, -2.7]";
    g.require(slope >= -3.3 && slope <= -2.7, what.str());
  }
  const double elow = s["e_low_drift_rel"].get<double>();
  {
    std::ostringstream what;
    what << "low-order energy relative drift " << elow << " <= 0.01";
    g.require(elow <= 0.01, what.str());
  }
  const double growth = s["e_high_growth_exponent"].is_number()
                            ? s["e_high_growth_exponent"].get<double>()
                            : std::nan("");
  {
    std::ostringstream what;
    what << "top-order energy growth exponent " << growth << " <= 0.05";
    g.require(growth <= 0.05, what.str());
  }
  const double late = s["g_alpha_late_increment_rel"].get<double>();
  {
    std::ostringstream what;
    what << "correction-norm increment after t = 20 is " << late
         << " <= 1e-4 of the total";
    g.require(late <= 1e-4, what.str());
  }
}

void criterion_5(Gate& g) {
  const nlohmann::json full = ensure_run(criterion4_config(), "c4_threads1");
  RunConfig half_cfg = criterion4_config();
  half_cfg.epsilon0 = 0.5e-3;
  const nlohmann::json half = ensure_run(half_cfg, "c5_halved");
  const double ratio = full["final_gap_l2"].get<double>() /
                       half["final_gap_l2"].get<double>();
  std::ostringstream what;
  what << "||g(T) - g(0)|| ratio under epsilon halving = " << ratio
       << " in [3.2, 4.8]";
  g.require(ratio >= 3.2 && ratio <= 4.8, what.str());
}

void criterion_6(Gate& g) {
  const PhaseGrid grid = build_grid(3, 16, 16, 16.0, 4.0);
  TransportModel rel;
  rel.law = TransportLaw::relativistic;
  rel.mu = +1;
  const PhaseField f0 = gaussian_on(grid, 1e-2, 0.7, 0.45);
  const double dt = 0.125;
  const double T = 3.5;
  const double t_wrap = wrap_time(grid, rel, 4.3);

  SimState torus;
  torus.t = 0.0;
  torus.f = f0;
  torus.model = rel;
  ProfileOptions opt;
  ProfileState prof = make_profile_state(f0, rel, opt);
  const int steps = static_cast<int>(std::lround(T / dt));
  for (int k = 0; k < steps; ++k) {
    torus = step_strang(std::move(torus), dt);
    step_profile(prof, dt);
  }
  PhaseField back = from_profile(prof.g, prof.t, rel);
  for (std::size_t i = 0; i < back.values.size(); ++i)
    back.values[i] -= torus.f.values[i];
  const double rel_l2 = l2_norm(back) / l2_norm(torus.f);
  std::ostringstream what;
  what << "backend disagreement " << rel_l2 << " <= 1e-2 relative L2 at t = "
       << prof.t << " (wrap horizon " << t_wrap << ")";
  g.require(prof.t <= t_wrap, "comparison time is inside the wrap horizon");
  g.require(rel_l2 <= 1e-2, what.str());
}

void criterion_7(Gate& g) {
  // Conservation and reversibility hold to rounding only on data whose
  // spectrum stays resolved: band-limited low modes in x (the nonlinear
  // harmonic cascade cannot reach the Nyquist modes at this amplitude within
  // 100 steps) and a dv = 0.5 Gaussian in v.
  const PhaseGrid grid = build_grid(3, 16, 16, 16.0, 4.0);
  TransportModel m;
  SimState s;
  s.t = 0.0;
  s.f = PhaseField(grid);
  {
    const double k1 = 2.0 * std::numbers::pi / grid.Lx;
    Vec3 x, v;
    for (std::size_t j = 0; j < grid.nv_total; ++j) {
      grid.v_coord(j, v);
      const double fv =
          std::exp(-(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) / (2 * 0.64));
      double* sl = s.f.slice(j);
      for (std::size_t i = 0; i < grid.nx_total; ++i) {
        grid.x_coord(i, x);
        sl[i] = 1e-3 * fv *
                (1.0 + 0.5 * std::cos(k1 * x[0]) +
                 0.3 * std::cos(k1 * x[1]) * std::cos(k1 * x[2]));
      }
    }
  }
  s.model = m;
  const PhaseField f0 = s.f;
  const double mass0 = pairwise_sum(f0.values.data(), f0.values.size());
  const double l20 = l2_norm(f0);
  const double dt = default_dt(grid, m);
  double mass_drift = 0.0, l2_drift = 0.0;
  for (int k = 0; k < 100; ++k) {
    s = step_strang(std::move(s), dt);
    const double mass = pairwise_sum(s.f.values.data(), s.f.values.size());
    mass_drift = std::max(mass_drift, std::abs(mass - mass0) / std::abs(mass0));
    l2_drift = std::max(l2_drift, std::abs(l2_norm(s.f) - l20) / l20);
  }
  {
    std::ostringstream what;
    what << "mass drift " << mass_drift << " <= 1e-12 over 100 steps";
    g.require(mass_drift <= 1e-12, what.str());
  }
  {
    std::ostringstream what;
    what << "L2 drift " << l2_drift << " <= 1e-8 over 100 steps";
    g.require(l2_drift <= 1e-8, what.str());
  }
  for (int k = 0; k < 100; ++k) s = step_strang(std::move(s), -dt);
  double rev = 0.0;
  for (std::size_t i = 0; i < f0.values.size(); ++i)
    rev = std::max(rev, std::abs(s.f.values[i] - f0.values[i]));
  std::ostringstream what;
  what << "time-reversal residual " << rev << " <= 1e-8 sup";
  g.require(rev <= 1e-8, what.str());
}

void criterion_8(Gate& g) {
  double worst = 0.0;
  for (int n = 0; n < 10000; ++n) {
    const double x = std::pow(10.0, -3.0 + 6.0 * n / 9999.0);
    double sum = 0.0;
    for (int k = -24; k <= 24; ++k) sum += psi_k(k, x);
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  {
    std::ostringstream what;
    what << "partition-of-unity residual " << worst
         << " <= 1e-12 over 1e4 sample points";
    g.require(worst <= 1e-12, what.str());
  }

  const PhaseGrid grid = build_grid(3, 32, 4, 16.0, 2.0);
  SpatialField u(grid);
  std::size_t seed = 99;
  for (double& x : u.values) {
    seed = seed * 6364136223846793005ull + 1442695040888963407ull;
    x = static_cast<double>(seed >> 11) / 9007199254740992.0 - 0.5;
  }
  double ortho = 0.0;
  for (auto [k, j] : {std::pair{-1, 1}, {0, 2}, {-1, 2}})
    ortho = std::max(ortho, sup_norm(project_k(project_k(u, k), j)));
  {
    std::ostringstream what;
    what << "P_k P_j residual " << ortho << " = 0 (<= 1e-12) for |k-j| >= 2";
    g.require(ortho <= 1e-12, what.str());
  }

  double lo = 1e300, hi = 0.0;
  for (int k : {-6, -3, 0, 3, 6}) {
    const double nk = symbol_norm([](const Vec3&) { return 1.0; }, k, 2);
    lo = std::min(lo, nk);
    hi = std::max(hi, nk);
  }
  std::ostringstream what;
  what << "trivial-symbol shell norm spread " << (hi / lo - 1.0)
       << " <= 1% across k in {-6,...,6}";
  g.require(hi / lo - 1.0 <= 0.01, what.str());
}

void criterion_9(Gate& g) {
  const PhaseGrid grid = build_grid(3, 16, 16, 16.0, 5.0);
  const PhaseField f = gaussian_on(grid, 1.0, 1.0, 0.9);
  SymbolSpec spec;
  double rmin = 1e300, rmax = 0.0;
  for (int law = 0; law < 2; ++law) {
    TransportModel m;
    m.law = law ? TransportLaw::relativistic : TransportLaw::nonrelativistic;
    for (double a : {0.0, 1.0})
      for (double t : {2.0, 4.0, 8.0, 16.0, 32.0, 64.0}) {
        const ProbeReport r = decay_probe(f, t, a, spec, m, {0, 0, 0}, 2);
        g.detail << "  (info) law=" << law << " a=" << a << " t=" << t
                 << " lhs=" << r.lhs << " rhs=" << r.rhs
                 << " ratio=" << r.ratio << '\n';
        rmin = std::min(rmin, r.ratio);
        rmax = std::max(rmax, r.ratio);
      }
  }
  std::ostringstream what;
  what << "decay-inequality ratio spread max/min = " << rmax / rmin
       << " <= 4 over 24 probes";
  g.require(rmin > 0.0 && rmax / rmin <= 4.0, what.str());
}

void criterion_10(Gate& g) {
  const PhaseGrid grid = build_grid(3, 16, 16, 16.0, 5.0);
  const PhaseField f = gaussian_on(grid, 1.0, 1.0, 0.9);
  SymbolSpec spec;
  TransportModel m;
  std::vector<Vec3> f3(grid.nv_total, {0, 0, 0});
  {
    const std::vector<double> mv = zero_mode(f);
    Vec3 v;
    for (std::size_t j = 0; j < grid.nv_total; ++j) {
      grid.v_coord(j, v);
      for (int c = 0; c < 3; ++c) f3[j][c] = mv[j] * v[c];
    }
  }
  double rmin3 = 1e300, rmax3 = 0.0;
  for (int k = -6; k <= 4; ++k)
    for (double t : {2.0, 8.0, 32.0}) {
      const ProbeReport r = bilinear_probe(f, f, f3, k, t, spec, m, 3, 2);
      g.detail << "  (info) lemma3 k=" << k << " t=" << t << " lhs=" << r.lhs
               << " rhs=" << r.rhs << " ratio=" << r.ratio << '\n';
      rmin3 = std::min(rmin3, r.ratio);
      rmax3 = std::max(rmax3, r.ratio);
    }
  {
    std::ostringstream what;
    what << "shell-estimate (cubic form) ratio spread max/min = "
         << (rmin3 > 0.0 ? rmax3 / rmin3
                         : std::numeric_limits<double>::infinity())
         << " <= 10 over k in {-6..4}, t in {2, 8, 32}";
    g.require(rmin3 > 0.0 && rmax3 / rmin3 <= 10.0, what.str());
  }
  double rmin2 = 1e300, rmax2 = 0.0;
  int admissible = 0;
  for (double t : {2.0, 8.0, 32.0})
    for (int k = -6; k <= 0; ++k) {
      if (std::ldexp(1.0, k) < 1.0 / t) continue;  // outside the lemma range
      const ProbeReport r = bilinear_probe(f, f, f3, k, t, spec, m, 2, 2);
      ++admissible;
      g.detail << "  (info) lemma2 k=" << k << " t=" << t << " lhs=" << r.lhs
               << " rhs=" << r.rhs << " ratio=" << r.ratio << '\n';
      rmin2 = std::min(rmin2, r.ratio);
      rmax2 = std::max(rmax2, r.ratio);
    }
  std::ostringstream what;
  what << "shell-estimate (commuted form) ratio spread max/min = "
       << (rmin2 > 0.0 ? rmax2 / rmin2
                       : std::numeric_limits<double>::infinity())
       << " <= 10 over " << admissible << " admissible (k, t) probes";
  g.require(rmin2 > 0.0 && rmax2 / rmin2 <= 10.0, what.str());
}

void criterion_11(Gate& g) {
  const nlohmann::json s = ensure_run(criterion4_config(), "c4_threads1");
  if (!s.contains("scattering_gap_ratio")) {
    g.require(false, "scattering gaps missing from the cached run summary");
    return;
  }
  const double ratio = s["scattering_gap_ratio"].get<double>();
  std::ostringstream what;
  what << "gap(16,32)/gap(8,16) = " << ratio << " in [0.35, 0.65]";
  g.require(ratio >= 0.35 && ratio <= 0.65, what.str());
}

void criterion_12(Gate& g) {
  ensure_run(criterion4_config(), "c4_threads1");  // threads = 1 (default)
  set_thread_count(2);
  ensure_run(criterion4_config(), "c4_threads2");
  set_thread_count(1);
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string a = slurp(kCache + "/c4_threads1/series.csv");
  const std::string b = slurp(kCache + "/c4_threads2/series.csv");
  std::ostringstream what;
  what << "series.csv byte-identical across --threads 1 and 2 ("
       << a.size() << " bytes)";
  g.require(!a.empty() && a == b, what.str());
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <criterion 1..12>\n";
    return 2;
  }
  const int n = std::atoi(argv[1]);
  fs::create_directories(kCache);
  set_thread_count(1);
  Gate gate;
  try {
    switch (n) {
      case 1: criterion_1(gate); break;
      case 2: criterion_2(gate); break;
      case 3: criterion_3(gate); break;
      case 4: criterion_4(gate); break;
      case 5: criterion_5(gate); break;
      case 6: criterion_6(gate); break;
      case 7: criterion_7(gate); break;
      case 8: criterion_8(gate); break;
      case 9: criterion_9(gate); break;
      case 10: criterion_10(gate); break;
      case 11: criterion_11(gate); break;
      case 12: criterion_12(gate); break;
      default:
        std::cerr << "no such criterion: " << n << '\n';
        return 2;
    }
  } catch (const std::exception& e) {
    gate.pass = false;
    gate.detail << "  [VIOLATED] aborted: " << e.what() << '\n';
  }
  std::cout << "criterion " << n << ": " << (gate.pass ? "PASS" : "FAIL")
            << '\n'
            << gate.detail.str();
  return gate.pass ? 0 : 1;
}
