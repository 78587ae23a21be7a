#include "vpk/run.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "vpk/fft.hpp"
#include "vpk/profile_solver.hpp"
#include "vpk/torus_solver.hpp"

namespace vpk {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool is_pow2(long v) { return v > 0 && (v & (v - 1)) == 0; }

struct Parser {
  ParseResult& res;
  int line = 0;

  void err(const std::string& msg) {
    res.errors.push_back("line " + std::to_string(line) + ": " + msg);
  }

  bool to_double(const std::string& key, const std::string& v, double& out) {
    try {
      std::size_t used = 0;
      out = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument("");
      return true;
    } catch (const std::exception&) {
      err(key + " expects a number, got '" + v + "'");
      return false;
    }
  }

  bool to_long(const std::string& key, const std::string& v, long& out) {
    try {
      std::size_t used = 0;
      out = std::stol(v, &used);
      if (used != v.size()) throw std::invalid_argument("");
      return true;
    } catch (const std::exception&) {
      err(key + " expects an integer, got '" + v + "'");
      return false;
    }
  }

  bool to_bool(const std::string& key, const std::string& v, bool& out) {
    if (v == "true" || v == "1") {
      out = true;
      return true;
    }
    if (v == "false" || v == "0") {
      out = false;
      return true;
    }
    err(key + " expects true/false, got '" + v + "'");
    return false;
  }

  bool positive(const std::string& key, double v) {
    if (v > 0.0) return true;
    err(key + " must be positive (got " + format_science(v) + ")");
    return false;
  }
};

}  // namespace

ParseResult parse_config(const std::string& text) {
  ParseResult res;
  RunConfig& c = res.config;
  Parser p{res};

  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++p.line;
    std::string line = raw;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      p.err("expected 'key = value', got '" + trim(raw) + "'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    double d;
    long l;
    bool b;
    if (key == "backend") {
      if (val == "torus" || val == "profile")
        c.backend = val;
      else
        p.err("backend must be torus or profile, got '" + val + "'");
    } else if (key == "law") {
      if (val == "nonrelativistic")
        c.model.law = TransportLaw::nonrelativistic;
      else if (val == "relativistic")
        c.model.law = TransportLaw::relativistic;
      else
        p.err("law must be nonrelativistic or relativistic, got '" + val + "'");
    } else if (key == "mu") {
      if (p.to_long(key, val, l)) {
        if (l == 1 || l == -1)
          c.model.mu = static_cast<int>(l);
        else
          p.err("mu must be 1 or -1, got '" + val + "'");
      }
    } else if (key == "d") {
      if (p.to_long(key, val, l)) {
        if (l >= 1 && l <= 3)
          c.d = static_cast<int>(l);
        else
          p.err("d must be 1, 2 or 3, got '" + val + "'");
      }
    } else if (key == "Nx" || key == "Nv") {
      if (p.to_long(key, val, l)) {
        if (!is_pow2(l))
          p.err(key + " must be a power of two (got " + val + ")");
        else
          (key == "Nx" ? c.Nx : c.Nv) = static_cast<int>(l);
      }
    } else if (key == "Lx") {
      if (p.to_double(key, val, d) && p.positive(key, d)) c.Lx = d;
    } else if (key == "Vmax") {
      if (p.to_double(key, val, d) && p.positive(key, d)) c.Vmax = d;
    } else if (key == "initial") {
      if (val == "gaussian" || val == "two-bump" || val == "file")
        c.initial = val;
      else
        p.err("initial must be gaussian, two-bump or file, got '" + val + "'");
    } else if (key == "amplitude") {
      if (p.to_double(key, val, d) && p.positive(key, d)) c.amplitude = d;
    } else if (key == "sigma_x") {
      if (p.to_double(key, val, d) && p.positive(key, d)) c.sigma_x = d;
    } else if (key == "sigma_v") {
      if (p.to_double(key, val, d) && p.positive(key, d)) c.sigma_v = d;
    } else if (key == "initial_file") {
      c.initial_file = val;
    } else if (key == "epsilon0") {
      if (p.to_double(key, val, d) && p.positive(key, d)) c.epsilon0 = d;
    } else if (key == "dt") {
      if (p.to_double(key, val, d)) {
        if (d < 0.0)
          p.err("dt must be >= 0 (0 selects the default)");
        else
          c.dt = d;
      }
    } else if (key == "T") {
      if (p.to_double(key, val, d) && p.positive(key, d)) c.T = d;
    } else if (key == "sample_cadence") {
      if (p.to_double(key, val, d) && p.positive(key, d)) c.sample_cadence = d;
    } else if (key == "N0") {
      if (p.to_long(key, val, l)) {
        if (l >= 1 && l <= 4)
          c.weights.N0 = static_cast<int>(l);
        else
          p.err("N0 must be in [1, 4] at desk scale, got '" + val + "'");
      }
    } else if (key == "delta") {
      if (p.to_double(key, val, d) && p.positive(key, d)) c.weights.delta = d;
    } else if (key == "derivative_max") {
      if (p.to_long(key, val, l)) {
        if (l >= 0 && l <= 4)
          c.derivative_max = static_cast<int>(l);
        else
          p.err("derivative_max must be in [0, 4], got '" + val + "'");
      }
    } else if (key == "output_dir") {
      if (val.empty())
        p.err("output_dir must be non-empty");
      else
        c.output_dir = val;
    } else if (key == "rng_seed") {
      try {
        std::size_t used = 0;
        c.rng_seed = std::stoull(val, &used);
        if (used != val.size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        p.err("rng_seed expects an unsigned integer, got '" + val + "'");
      }
    } else if (key == "zero_field") {
      if (p.to_bool(key, val, b)) c.zero_field = b;
    } else if (key == "snapshot_times") {
      c.snapshot_times.clear();
      std::stringstream ss(val);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        if (p.to_double(key, tok, d)) c.snapshot_times.push_back(d);
      }
    } else if (key == "fit_lo") {
      if (p.to_double(key, val, d) && p.positive(key, d)) c.fit_lo = d;
    } else if (key == "fit_hi") {
      if (p.to_double(key, val, d) && p.positive(key, d)) c.fit_hi = d;
    } else {
      p.err("unknown key '" + key + "'");
    }
  }
  if (c.initial == "file" && c.initial_file.empty())
    res.errors.push_back("line 0: initial = file requires initial_file");
  if (c.fit_lo >= c.fit_hi)
    res.errors.push_back("line 0: fit_lo must be below fit_hi");
  return res;
}

std::string render_config(const RunConfig& c) {
  std::ostringstream out;
  out << "backend = " << c.backend << '\n';
  out << "law = "
      << (c.model.law == TransportLaw::relativistic ? "relativistic"
                                                    : "nonrelativistic")
      << '\n';
  out << "mu = " << c.model.mu << '\n';
  out << "d = " << c.d << '\n';
  out << "Nx = " << c.Nx << '\n';
  out << "Nv = " << c.Nv << '\n';
  out << "Lx = " << format_science(c.Lx) << '\n';
  out << "Vmax = " << format_science(c.Vmax) << '\n';
  out << "initial = " << c.initial << '\n';
  out << "amplitude = " << format_science(c.amplitude) << '\n';
  out << "sigma_x = " << format_science(c.sigma_x) << '\n';
  out << "sigma_v = " << format_science(c.sigma_v) << '\n';
  if (!c.initial_file.empty()) out << "initial_file = " << c.initial_file << '\n';
  out << "epsilon0 = " << format_science(c.epsilon0) << '\n';
  out << "dt = " << format_science(c.dt) << '\n';
  out << "T = " << format_science(c.T) << '\n';
  out << "sample_cadence = " << format_science(c.sample_cadence) << '\n';
  out << "N0 = " << c.weights.N0 << '\n';
  out << "delta = " << format_science(c.weights.delta) << '\n';
  out << "derivative_max = " << c.derivative_max << '\n';
  out << "output_dir = " << c.output_dir << '\n';
  out << "rng_seed = " << c.rng_seed << '\n';
  out << "zero_field = " << (c.zero_field ? "true" : "false") << '\n';
  if (!c.snapshot_times.empty()) {
    out << "snapshot_times = ";
    for (std::size_t i = 0; i < c.snapshot_times.size(); ++i) {
      if (i) out << ',';
      out << format_science(c.snapshot_times[i]);
    }
    out << '\n';
  }
  out << "fit_lo = " << format_science(c.fit_lo) << '\n';
  out << "fit_hi = " << format_science(c.fit_hi) << '\n';
  return out.str();
}

PhaseField build_initial_data(const RunConfig& cfg) {
  const PhaseGrid grid = build_grid(cfg.d, cfg.Nx, cfg.Nv, cfg.Lx, cfg.Vmax);
  PhaseField f(grid);
  if (cfg.initial == "file") {
    PhaseField loaded = read_snapshot(cfg.initial_file);
    if (loaded.grid.d != cfg.d || loaded.grid.Nx != cfg.Nx ||
        loaded.grid.Nv != cfg.Nv || loaded.grid.Lx != cfg.Lx ||
        loaded.grid.Vmax != cfg.Vmax)
      throw GridError("initial_file grid does not match the configured grid");
    f = std::move(loaded);
    for (double& v : f.values) v *= cfg.epsilon0;
    return f;
  }
  const double sx2 = 2.0 * cfg.sigma_x * cfg.sigma_x;
  const double sv2 = 2.0 * cfg.sigma_v * cfg.sigma_v;
  const double scale = cfg.epsilon0 * cfg.amplitude;
  const bool two_bump = cfg.initial == "two-bump";
  const double v0 = 0.5 * cfg.Vmax;
  Vec3 x, v;
  for (std::size_t j = 0; j < grid.nv_total; ++j) {
    grid.v_coord(j, v);
    double vpart = 0.0;
    if (two_bump) {
      const double r2m = (v[0] - v0) * (v[0] - v0) + v[1] * v[1] + v[2] * v[2];
      const double r2p = (v[0] + v0) * (v[0] + v0) + v[1] * v[1] + v[2] * v[2];
      vpart = std::exp(-r2m / sv2) + std::exp(-r2p / sv2);
    } else {
      vpart = std::exp(-(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) / sv2);
    }
    double* s = f.slice(j);
    for (std::size_t i = 0; i < grid.nx_total; ++i) {
      grid.x_coord(i, x);
      s[i] = scale * vpart *
             std::exp(-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / sx2);
    }
  }
  return f;
}

namespace {

// Sup over grid nodes of the largest |grad_x^k rho| component (torus
// backend: periodic box, spectral differentiation).
double torus_sup_deriv(const SpatialField& rho, int k) {
  const PhaseGrid& g = rho.grid;
  if (k == 0) return sup_norm(rho);
  std::vector<cplx> base(g.nx_total);
  for (std::size_t i = 0; i < g.nx_total; ++i) base[i] = rho.values[i];
  dft_cube(base.data(), g.d, g.Nx, -1);
  double best = 0.0;
  std::vector<cplx> work(g.nx_total);
  for (const MultiIndex& alpha : derivative_set(g.d, k)) {
    if (mi_order(alpha) != k) continue;
    for (std::size_t lin = 0; lin < g.nx_total; ++lin) {
      std::size_t r = lin;
      cplx mult(1.0, 0.0);
      for (int ax = g.d - 1; ax >= 0; --ax) {
        const int m = static_cast<int>(r % static_cast<std::size_t>(g.Nx));
        r /= static_cast<std::size_t>(g.Nx);
        for (int q = 0; q < alpha[ax]; ++q) mult *= cplx(0.0, g.xi_x[m]);
      }
      work[lin] = base[lin] * mult;
    }
    dft_cube(work.data(), g.d, g.Nx, +1);
    const double scale = 1.0 / static_cast<double>(g.nx_total);
    for (const cplx& v : work) best = std::max(best, std::abs(v.real()) * scale);
  }
  return best;
}

double field_mass(const PhaseField& f) {
  return f.grid.cell_x() * f.grid.cell_v() *
         pairwise_sum(f.values.data(), f.values.size());
}

}  // namespace

RunOutput run_simulation(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);

  PhaseField f0 = build_initial_data(cfg);
  const PhaseGrid grid = f0.grid;  // copy: f0 is moved into the state below
  const double dt = cfg.dt > 0.0 ? cfg.dt : default_dt(grid, cfg.model);
  const long n_steps = std::lround(std::ceil(cfg.T / dt - 1e-9));
  const long stride = std::max(1L, std::lround(cfg.sample_cadence / dt));
  const int kmax = std::min(2, cfg.derivative_max);

  RunOutput out;
  out.dt_used = dt;
  out.series.columns = {"t",     "mass",       "l2",          "E_high1",
                        "E_high2", "E_low",    "g_alpha_norm", "sup_rho",
                        "sup_grad_rho", "sup_hess_rho", "wrapped"};

  // Wrap horizon for the torus backend: data radius from the initial
  // x-marginal support (tail below the support tolerance).
  double data_radius = 0.0;
  {
    Vec3 x;
    for (std::size_t j = 0; j < grid.nv_total; ++j) {
      const double* s = f0.slice(j);
      for (std::size_t i = 0; i < grid.nx_total; ++i) {
        if (std::abs(s[i]) <= 1e-10) continue;
        grid.x_coord(i, x);
        data_radius = std::max(
            data_radius,
            std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]));
      }
    }
  }
  const double t_wrap = wrap_time(grid, cfg.model, data_radius);

  const bool torus = cfg.backend == "torus";
  std::vector<std::pair<double, std::vector<double>>> zero_modes;
  std::vector<char> snap_done(cfg.snapshot_times.size(), 0);

  SimState st;
  ProfileState ps;
  if (torus) {
    st.t = 0.0;
    st.f = std::move(f0);
    st.model = cfg.model;
  } else {
    ProfileOptions opt;
    opt.zero_field = cfg.zero_field;
    opt.weights = cfg.weights;
    ps = make_profile_state(std::move(f0), cfg.model, opt);
  }
  CorrectionAccumulator torus_corr = make_correction_accumulator(grid, cfg.weights);

  auto sample = [&](double t, const PhaseField& field, bool wrapped) {
    const PhaseField* gp = &field;
    PhaseField gbuf;
    if (torus && t != 0.0) {
      gbuf = to_profile(field, t, cfg.model);
      gp = &gbuf;
    }
    const PhaseField& g = *gp;
    const auto [e1, e2] = energy_high(g, cfg.weights);
    const CorrectionAccumulator& corr = torus ? torus_corr : ps.corrections;
    const double elow = energy_low(g, corr, cfg.weights);
    const double gnorm = correction_norm(corr, grid, cfg.weights);
    double sup[3] = {0.0, 0.0, 0.0};
    if (torus) {
      const SpatialField rho = density(field);
      for (int k = 0; k <= kmax; ++k) sup[k] = torus_sup_deriv(rho, k);
    } else {
      for (int k = 0; k <= kmax; ++k)
        sup[k] = sup_density_derivative(g, t, cfg.model, k);
    }
    out.series.rows.push_back({t, field_mass(field), l2_norm(field), e1, e2,
                               elow, gnorm, sup[0], sup[1], sup[2],
                               wrapped ? 1.0 : 0.0});
    zero_modes.emplace_back(t, zero_mode(g));
  };

  auto maybe_snapshot = [&](double t, const PhaseField& field) {
    for (std::size_t i = 0; i < cfg.snapshot_times.size(); ++i) {
      if (snap_done[i] || t < cfg.snapshot_times[i] - 0.5 * dt) continue;
      snap_done[i] = 1;
      write_snapshot(cfg.output_dir + "/snapshot_" + std::to_string(i) + ".vpf",
                     field);
    }
  };

  sample(0.0, torus ? st.f : ps.g, false);
  maybe_snapshot(0.0, torus ? st.f : ps.g);
  bool any_wrapped = false;
  for (long step = 1; step <= n_steps; ++step) {
    if (torus) {
      st = step_strang(std::move(st), dt);
    } else {
      step_profile(ps, dt);
    }
    const double t = torus ? st.t : ps.t;
    const PhaseField& field = torus ? st.f : ps.g;
    const bool wrapped = torus && t > t_wrap;
    any_wrapped = any_wrapped || wrapped;
    if (step % stride == 0 || step == n_steps) sample(t, field, wrapped);
    maybe_snapshot(t, field);
  }
  out.wrapped = any_wrapped;
  out.final_t = torus ? st.t : ps.t;
  out.final_state = torus ? std::move(st.f) : std::move(ps.g);

  write_csv(cfg.output_dir + "/series.csv", out.series);

  // Summary: slope fits, drift percentages, full config echo.
  nlohmann::json summary;
  summary["version"] = kVersion;
  summary["dt_used"] = dt;
  summary["steps"] = n_steps;
  summary["wrapped"] = any_wrapped;
  summary["config"] = render_config(cfg);

  auto column = [&](const char* name) {
    std::vector<std::pair<double, double>> series;
    std::size_t ci = 0;
    while (out.series.columns[ci] != name) ++ci;
    for (const auto& row : out.series.rows) series.emplace_back(row[0], row[ci]);
    return series;
  };
  auto put_fit = [&](const char* key, const char* col, double lo, double hi) {
    try {
      const FitResult fit = fit_power_law(column(col), lo, hi);
      summary[key] = {{"slope", fit.slope},
                      {"intercept", fit.intercept},
                      {"max_residual", fit.max_residual},
                      {"n_used", fit.n_used}};
    } catch (const std::exception& e) {
      summary[key] = {{"error", e.what()}};
    }
  };
  put_fit("fit_sup_rho", "sup_rho", cfg.fit_lo, cfg.fit_hi);
  put_fit("fit_sup_grad_rho", "sup_grad_rho", cfg.fit_lo, cfg.fit_hi);
  put_fit("fit_sup_hess_rho", "sup_hess_rho", cfg.fit_lo, cfg.fit_hi);

  auto rel_drift = [&](const char* col) {
    const auto s = column(col);
    const double base = s.front().second;
    if (base == 0.0) return 0.0;
    double worst = 0.0;
    for (const auto& [t, y] : s) worst = std::max(worst, std::abs(y - base));
    return worst / std::abs(base);
  };
  summary["mass_drift_rel"] = rel_drift("mass");
  summary["l2_drift_rel"] = rel_drift("l2");
  summary["e_low_drift_rel"] = rel_drift("E_low");

  // Growth exponent of the top-order energy: slope of log E vs log t, t >= 1.
  {
    auto s1 = column("E_high1");
    try {
      summary["e_high_growth_exponent"] =
          fit_power_law(s1, 1.0, cfg.T + 1.0).slope;
    } catch (const std::exception& e) {
      summary["e_high_growth_exponent"] = nullptr;
      summary["e_high_growth_error"] = e.what();
    }
  }
  // Late correction increment relative to the total.
  {
    const auto s = column("g_alpha_norm");
    const double total = s.back().second;
    double at20 = total;
    for (const auto& [t, y] : s)
      if (t >= 20.0) {
        at20 = y;
        break;
      }
    summary["g_alpha_late_increment_rel"] =
        total > 0.0 ? (total - at20) / total : 0.0;
  }
  // Cauchy gaps of the zero mode for the scattering check.
  {
    auto find = [&](double t) -> const std::vector<double>* {
      for (const auto& [s, m] : zero_modes)
        if (std::abs(s - t) <= 0.5 * dt) return &m;
      return nullptr;
    };
    const std::vector<double>* m8 = find(8.0);
    const std::vector<double>* m16 = find(16.0);
    const std::vector<double>* m32 = find(32.0);
    if (m8 && m16 && m32) {
      const double g816 = scattering_gap(*m8, *m16, grid, cfg.weights);
      const double g1632 = scattering_gap(*m16, *m32, grid, cfg.weights);
      summary["scattering_gap_8_16"] = g816;
      summary["scattering_gap_16_32"] = g1632;
      summary["scattering_gap_ratio"] = g816 > 0.0 ? g1632 / g816 : 0.0;
    }
  }

  out.summary_json = summary.dump(2);
  std::ofstream js(cfg.output_dir + "/summary.json", std::ios::trunc);
  js << out.summary_json << '\n';
  if (!js) throw IoError("write failed: " + cfg.output_dir + "/summary.json");
  return out;
}

}  // namespace vpk
