#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpk/diagnostics.hpp"
#include "vpk/io.hpp"
#include "vpk/transport.hpp"

namespace vpk {

inline constexpr const char* kVersion = "1.0.0";

struct RunConfig {
  std::string backend = "profile";  // torus | profile
  TransportModel model;
  int d = 3;
  int Nx = 16;
  int Nv = 16;
  double Lx = 16.0;
  double Vmax = 6.0;
  std::string initial = "gaussian";  // gaussian | two-bump | file
  double amplitude = 1.0;
  double sigma_x = 1.0;
  double sigma_v = 1.0;
  std::string initial_file;
  double epsilon0 = 1.0;
  double dt = 0.0;  // 0 selects the stability default
  double T = 10.0;
  double sample_cadence = 1.0;
  WeightConfig weights;
  int derivative_max = 2;
  std::string output_dir = ".";
  std::uint64_t rng_seed = 0;
  bool zero_field = false;  // free-transport mode
  std::vector<double> snapshot_times;
  double fit_lo = 10.0;
  double fit_hi = 40.0;
};

struct ParseResult {
  RunConfig config;
  std::vector<std::string> errors;  // all violations, each with a line number
  bool ok() const { return errors.empty(); }
};

// Line-oriented "key = value" text, '#' comments. Reports every violation.
ParseResult parse_config(const std::string& text);

// Canonical key=value rendering; parse_config(render_config(c)) round-trips
// every field bit-exactly.
std::string render_config(const RunConfig& cfg);

// Initial distribution f(0) = g(0) on the configured grid, scaled by epsilon0.
PhaseField build_initial_data(const RunConfig& cfg);

struct RunOutput {
  CsvTable series;           // also written to <output_dir>/series.csv
  std::string summary_json;  // also written to <output_dir>/summary.json
  double dt_used = 0.0;
  bool wrapped = false;      // torus backend ran past its wrap horizon
  PhaseField final_state;    // f (torus) or g (profile) at the final time
  double final_t = 0.0;
};

// Fixed-dt integration with diagnostics at the sample cadence; deterministic
// for a given config regardless of thread count.
RunOutput run_simulation(const RunConfig& cfg);

}  // namespace vpk
