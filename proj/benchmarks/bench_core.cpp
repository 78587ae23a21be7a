#include <benchmark/benchmark.h>

#include <cmath>

#include "vpk/diagnostics.hpp"
#include "vpk/field_solver.hpp"
#include "vpk/profile_solver.hpp"
#include "vpk/reconstruct.hpp"
#include "vpk/torus_solver.hpp"

using namespace vpk;

namespace {

PhaseField gaussian_on(const PhaseGrid& g, double eps) {
  PhaseField f(g);
  Vec3 x, v;
  for (std::size_t j = 0; j < g.nv_total; ++j) {
    g.v_coord(j, v);
    const double fv =
        std::exp(-(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) / 1.28);
    double* s = f.slice(j);
    for (std::size_t i = 0; i < g.nx_total; ++i) {
      g.x_coord(i, x);
      s[i] = eps * fv *
             std::exp(-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0);
    }
  }
  return f;
}

void BM_strang_step(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const PhaseGrid g = build_grid(3, n, n, 16.0, 4.0);
  TransportModel m;
  SimState s;
  s.f = gaussian_on(g, 1e-2);
  s.model = m;
  const double dt = default_dt(g, m);
  for (auto _ : state) {
    s = step_strang(std::move(s), dt);
    benchmark::DoNotOptimize(s.f.values.data());
  }
}
BENCHMARK(BM_strang_step)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_profile_step(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const PhaseGrid g = build_grid(3, n, n, 16.0, 4.0);
  TransportModel m;
  ProfileState s = make_profile_state(gaussian_on(g, 1e-3), m, {});
  for (auto _ : state) {
    step_profile(s, 0.25);
    benchmark::DoNotOptimize(s.g.values.data());
  }
}
BENCHMARK(BM_profile_step)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_density_reconstruction(benchmark::State& state) {
  const PhaseGrid g = build_grid(3, 16, 16, 16.0, 5.0);
  GaussianSliceSource src(g, 1.0, 1.0, 0.9);
  DensityReconstructor rec(src, TransportModel{});
  SampleRequest req;
  req.t = static_cast<double>(state.range(0));
  req.targets.push_back({0, 0, 0});
  for (auto _ : state) {
    const SampleResult r = rec.evaluate(req);
    benchmark::DoNotOptimize(r.values[0][0]);
  }
}
BENCHMARK(BM_density_reconstruction)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_energy_high(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const PhaseGrid g = build_grid(3, n, n, 16.0, 4.0);
  const PhaseField f = gaussian_on(g, 1e-3);
  WeightConfig w;
  for (auto _ : state) {
    auto e = energy_high(f, w);
    benchmark::DoNotOptimize(e.first);
  }
}
BENCHMARK(BM_energy_high)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
