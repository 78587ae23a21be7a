// Command-line front end: simulate | probe-decay | probe-bilinear | fit |
// oracle. Exit codes: 0 success, 1 error, 2 check-gate violation (--check).
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vpk/diagnostics.hpp"
#include "vpk/io.hpp"
#include "vpk/lp.hpp"
#include "vpk/parallel.hpp"
#include "vpk/profile_solver.hpp"
#include "vpk/run.hpp"

namespace {

vpk::RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw vpk::IoError("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const vpk::ParseResult res = vpk::parse_config(ss.str());
  if (!res.ok()) {
    std::ostringstream msg;
    msg << "invalid config " << path << ":";
    for (const auto& e : res.errors) msg << "\n  " << e;
    throw std::runtime_error(msg.str());
  }
  return res.config;
}

void write_abort_manifest(const std::string& dir, const std::string& what) {
  try {
    nlohmann::json j;
    j["version"] = vpk::kVersion;
    j["status"] = "aborted";
    j["error"] = what;
    std::ofstream out(dir + "/abort.json", std::ios::trunc);
    out << j.dump(2) << '\n';
  } catch (...) {
  }
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

int cmd_simulate(const std::string& config_path, bool check) {
  const vpk::RunConfig cfg = load_config(config_path);
  vpk::RunOutput out;
  try {
    out = vpk::run_simulation(cfg);
  } catch (const std::exception& e) {
    write_abort_manifest(cfg.output_dir, e.what());
    throw;
  }
  std::cout << "series: " << cfg.output_dir << "/series.csv\n"
            << "summary: " << cfg.output_dir << "/summary.json\n";
  if (!check) return 0;
  const nlohmann::json summary = nlohmann::json::parse(out.summary_json);
  bool ok = true;
  auto gate = [&](const char* name, bool pass) {
    std::cout << (pass ? "pass" : "FAIL") << "  " << name << '\n';
    ok = ok && pass;
  };
  gate("mass drift <= 1e-6 relative",
       summary["mass_drift_rel"].get<double>() <= 1e-6 * std::max(1.0, cfg.T));
  if (cfg.backend == "profile") {
    gate("low-order energy drift <= 1%",
         summary["e_low_drift_rel"].get<double>() <= 0.01);
    if (cfg.d == 3 && summary["fit_sup_rho"].contains("slope"))
      gate("density sup-norm decay slope in [-3.3, -2.7]",
           std::abs(summary["fit_sup_rho"]["slope"].get<double>() + 3.0) <= 0.3);
  }
  return ok ? 0 : 2;
}

int cmd_probe_decay(const std::string& config_path, const std::string& t_list,
                    const std::string& a_list, int truncation, bool check) {
  const vpk::RunConfig cfg = load_config(config_path);
  const vpk::PhaseField g = vpk::build_initial_data(cfg);
  const std::vector<double> ts =
      t_list.empty() ? std::vector<double>{2, 4, 8, 16, 32, 64}
                     : parse_list(t_list);
  const std::vector<double> as =
      a_list.empty() ? std::vector<double>{0.0, 1.0} : parse_list(a_list);
  vpk::SymbolSpec spec;
  vpk::CsvTable table;
  table.columns = {"lemma", "k",   "t",   "a",    "model",
                   "lhs",   "rhs", "ratio", "truncation_order"};
  double rmin = 1e300, rmax = 0.0;
  const double model_tag =
      cfg.model.law == vpk::TransportLaw::relativistic ? 1.0 : 0.0;
  for (double a : as)
    for (double t : ts) {
      const vpk::ProbeReport r =
          vpk::decay_probe(g, t, a, spec, cfg.model, {0, 0, 0}, truncation);
      table.rows.push_back({1.0, 0.0, r.t, r.a, model_tag, r.lhs, r.rhs,
                            r.ratio, static_cast<double>(r.truncation_order)});
      rmin = std::min(rmin, r.ratio);
      rmax = std::max(rmax, r.ratio);
    }
  vpk::write_csv(cfg.output_dir + "/probe_decay.csv", table);
  std::cout << "ratio range [" << rmin << ", " << rmax << "] -> "
            << cfg.output_dir << "/probe_decay.csv\n";
  if (check && (rmin <= 0.0 || rmax / rmin > 4.0)) return 2;
  return 0;
}

int cmd_probe_bilinear(const std::string& config_path, int lemma,
                       const std::string& k_list, const std::string& t_list,
                       int truncation, bool check) {
  const vpk::RunConfig cfg = load_config(config_path);
  const vpk::PhaseField f = vpk::build_initial_data(cfg);
  const vpk::PhaseGrid& grid = f.grid;
  const std::vector<double> ts =
      t_list.empty() ? std::vector<double>{2, 8, 32} : parse_list(t_list);
  std::vector<double> ks;
  if (k_list.empty())
    for (int k = -6; k <= 4; ++k) ks.push_back(k);
  else
    ks = parse_list(k_list);
  vpk::SymbolSpec spec;
  // f3 = the velocity average of x f1 per node: a smooth compact d-vector
  // with a nontrivial divergence for the lemma-2 right side.
  std::vector<vpk::Vec3> f3(grid.nv_total, {0.0, 0.0, 0.0});
  {
    const std::vector<double> m = vpk::zero_mode(f);
    vpk::Vec3 v;
    for (std::size_t j = 0; j < grid.nv_total; ++j) {
      grid.v_coord(j, v);
      for (int c = 0; c < grid.d; ++c) f3[j][c] = m[j] * v[c];
    }
  }
  vpk::CsvTable table;
  table.columns = {"lemma", "k",   "t",   "a",    "model",
                   "lhs",   "rhs", "ratio", "truncation_order"};
  const double model_tag =
      cfg.model.law == vpk::TransportLaw::relativistic ? 1.0 : 0.0;
  double rmin = 1e300, rmax = 0.0;
  int skipped = 0;
  for (double kd : ks)
    for (double t : ts) {
      const int k = static_cast<int>(std::lround(kd));
      try {
        const vpk::ProbeReport r = vpk::bilinear_probe(
            f, f, f3, k, t, spec, cfg.model, lemma, truncation);
        table.rows.push_back({static_cast<double>(lemma),
                              static_cast<double>(k), r.t, r.a, model_tag,
                              r.lhs, r.rhs, r.ratio,
                              static_cast<double>(r.truncation_order)});
        if (r.ratio > 0.0) {
          rmin = std::min(rmin, r.ratio);
          rmax = std::max(rmax, r.ratio);
        }
      } catch (const std::invalid_argument&) {
        ++skipped;  // outside the lemma's admissible (k, t) range
      }
    }
  const std::string path =
      cfg.output_dir + "/probe_bilinear_lemma" + std::to_string(lemma) + ".csv";
  vpk::write_csv(path, table);
  std::cout << "ratio range [" << rmin << ", " << rmax << "], "
            << table.rows.size() << " probes (" << skipped
            << " inadmissible) -> " << path << '\n';
  if (check && (table.rows.empty() || rmax / rmin > 10.0)) return 2;
  return 0;
}

int cmd_fit(const std::string& series_path, const std::string& column,
            double lo, double hi) {
  const vpk::CsvTable table = vpk::read_csv(series_path);
  std::size_t ci = 0;
  while (ci < table.columns.size() && table.columns[ci] != column) ++ci;
  if (ci == table.columns.size())
    throw std::runtime_error("no column '" + column + "' in " + series_path);
  std::vector<std::pair<double, double>> series;
  for (const auto& row : table.rows) series.emplace_back(row[0], row[ci]);
  const vpk::FitResult fit = vpk::fit_power_law(series, lo, hi);
  std::cout << "slope " << vpk::format_science(fit.slope) << "\nintercept "
            << vpk::format_science(fit.intercept) << "\nmax_residual "
            << vpk::format_science(fit.max_residual) << "\nn_used "
            << fit.n_used << '\n';
  return 0;
}

int cmd_oracle(double A, double sx, double sv, double t,
               const std::string& x_list, int d, bool relativistic) {
  vpk::GaussianSpec spec{A, sx, sv};
  vpk::TransportModel model;
  model.law = relativistic ? vpk::TransportLaw::relativistic
                           : vpk::TransportLaw::nonrelativistic;
  vpk::Vec3 x = {0.0, 0.0, 0.0};
  const std::vector<double> xs = parse_list(x_list);
  for (std::size_t i = 0; i < xs.size() && i < 3; ++i) x[i] = xs[i];
  std::cout << vpk::format_science(
                   vpk::free_stream_oracle(spec, t, x, d, model))
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetic transport simulator and dispersive-decay toolkit"};
  app.require_subcommand(1);
  int threads = 1;
  bool check = false;
  app.add_option("--threads", threads, "Worker thread cap")->capture_default_str();
  app.add_flag("--check", check, "Exit 2 when an acceptance gate fails");

  std::string config_path, t_list, a_list, k_list;
  std::string series_path, column = "sup_rho";
  int truncation = 2, lemma = 3, d = 3;
  double lo = 10.0, hi = 40.0;
  double A = 1.0, sx = 1.0, sv = 1.0, t = 0.0;
  std::string x_list;
  bool relativistic = false;

  auto* sim = app.add_subcommand("simulate", "Run a configured integration");
  sim->add_option("--config", config_path, "key = value config file")->required();

  auto* pd = app.add_subcommand("probe-decay", "Dispersive-decay inequality sweep");
  pd->add_option("--config", config_path)->required();
  pd->add_option("--t", t_list, "comma list of times");
  pd->add_option("--a", a_list, "comma list of derivative weights a");
  pd->add_option("--truncation", truncation, "v-derivative truncation order");

  auto* pb = app.add_subcommand("probe-bilinear", "Bilinear shell-estimate sweep");
  pb->add_option("--config", config_path)->required();
  pb->add_option("--lemma", lemma, "2 or 3")->check(CLI::IsMember({2, 3}));
  pb->add_option("--k", k_list, "comma list of dyadic shells");
  pb->add_option("--t", t_list, "comma list of times");
  pb->add_option("--truncation", truncation);

  auto* ft = app.add_subcommand("fit", "Refit a power law on an existing series");
  ft->add_option("--series", series_path, "series.csv path")->required();
  ft->add_option("--column", column)->capture_default_str();
  ft->add_option("--lo", lo)->capture_default_str();
  ft->add_option("--hi", hi)->capture_default_str();

  auto* oc = app.add_subcommand("oracle", "Closed-form free-streaming density");
  oc->add_option("--A", A)->capture_default_str();
  oc->add_option("--sigma-x", sx)->capture_default_str();
  oc->add_option("--sigma-v", sv)->capture_default_str();
  oc->add_option("--t", t)->capture_default_str();
  oc->add_option("--x", x_list, "comma list, e.g. 0,0,1");
  oc->add_option("--d", d)->capture_default_str();
  oc->add_flag("--relativistic", relativistic);

  CLI11_PARSE(app, argc, argv);
  vpk::set_thread_count(threads);
  try {
    if (sim->parsed()) return cmd_simulate(config_path, check);
    if (pd->parsed())
      return cmd_probe_decay(config_path, t_list, a_list, truncation, check);
    if (pb->parsed())
      return cmd_probe_bilinear(config_path, lemma, k_list, t_list, truncation,
                                check);
    if (ft->parsed()) return cmd_fit(series_path, column, lo, hi);
    if (oc->parsed()) return cmd_oracle(A, sx, sv, t, x_list, d, relativistic);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
