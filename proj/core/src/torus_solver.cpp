#include "vpk/torus_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vpk/fft.hpp"
#include "vpk/parallel.hpp"

namespace vpk {

PhaseField advect_x(const PhaseField& f, double dt,
                    const TransportModel& model) {
  const PhaseGrid& g = f.grid;
  PhaseField out(g);
  const std::size_t chunks = std::min<std::size_t>(64, g.nv_total);
  parallel_chunks(g.nv_total, chunks,
                  [&](std::size_t b, std::size_t e, std::size_t) {
    std::vector<cplx> spec(g.nx_total);
    std::vector<cplx> phase(static_cast<std::size_t>(g.d) * g.Nx);
    Vec3 v;
    for (std::size_t j = b; j < e; ++j) {
      g.v_coord(j, v);
      const Vec3 a = velocity_map(v, model);
      const double* src = f.slice(j);
      for (std::size_t i = 0; i < g.nx_total; ++i) spec[i] = src[i];
      dft_cube(spec.data(), g.d, g.Nx, -1);
      // f_new(x) = f(x - a dt): multiplier e^{-i xi . (a dt)}.
      for (int ax = 0; ax < g.d; ++ax)
        for (int m = 0; m < g.Nx; ++m)
          phase[static_cast<std::size_t>(ax) * g.Nx + m] =
              std::polar(1.0, -g.xi_x[m] * a[ax] * dt);
      for (std::size_t lin = 0; lin < g.nx_total; ++lin) {
        std::size_t r = lin;
        cplx mult(1.0, 0.0);
        for (int ax = g.d - 1; ax >= 0; --ax) {
          const int m = static_cast<int>(r % static_cast<std::size_t>(g.Nx));
          r /= static_cast<std::size_t>(g.Nx);
          mult *= phase[static_cast<std::size_t>(ax) * g.Nx + m];
        }
        spec[lin] *= mult;
      }
      dft_cube(spec.data(), g.d, g.Nx, +1);
      double* dst = out.slice(j);
      const double scale = 1.0 / static_cast<double>(g.nx_total);
      for (std::size_t i = 0; i < g.nx_total; ++i)
        dst[i] = spec[i].real() * scale;
    }
  });
  return out;
}

PhaseField advect_v(const PhaseField& f, double dt,
                    const std::vector<SpatialField>& grad_phi,
                    const TransportModel& model) {
  const PhaseGrid& g = f.grid;
  if (static_cast<int>(grad_phi.size()) != g.d)
    throw GridError("advect_v: need d force components");
  const double mu = static_cast<double>(model.mu);
  double max_shift = 0.0;
  for (int ax = 0; ax < g.d; ++ax)
    for (double v : grad_phi[ax].values)
      max_shift = std::max(max_shift, std::abs(mu * v * dt));
  if (max_shift > g.Vmax / 4.0)
    throw GridError("advect_v: velocity shift exceeds Vmax/4");

  std::vector<cplx> spec(f.values.size());
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = f.values[i];
  dft_vcube_many(spec.data(), g.d, g.Nv, g.nx_total, -1);

  // f_new(x,v) = f(x, v - mu grad_phi(x) dt): multiply by e^{-i xi_v . s(x)}.
  const std::size_t chunks = std::min<std::size_t>(64, g.nv_total);
  parallel_chunks(g.nv_total, chunks,
                  [&](std::size_t b, std::size_t e, std::size_t) {
    MultiIndex mv;
    for (std::size_t j = b; j < e; ++j) {
      g.decode_v(j, mv);
      double xi[3] = {0.0, 0.0, 0.0};
      for (int ax = 0; ax < g.d; ++ax) xi[ax] = g.xi_v[mv[ax]];
      cplx* row = spec.data() + j * g.nx_total;
      for (std::size_t i = 0; i < g.nx_total; ++i) {
        double dot = 0.0;
        for (int ax = 0; ax < g.d; ++ax)
          dot += xi[ax] * mu * grad_phi[ax].values[i] * dt;
        row[i] *= std::polar(1.0, -dot);
      }
    }
  });

  dft_vcube_many(spec.data(), g.d, g.Nv, g.nx_total, +1);
  PhaseField out(g);
  const double scale = 1.0 / static_cast<double>(g.nv_total);
  for (std::size_t i = 0; i < spec.size(); ++i)
    out.values[i] = spec[i].real() * scale;
  return out;
}

SimState step_strang(SimState s, double dt) {
  s.f = advect_x(s.f, 0.5 * dt, s.model);
  const SpatialField rho = density(s.f);
  const FieldSolveResult field = solve_poisson_torus(rho);
  s.f = advect_v(s.f, dt, field.grad_phi, s.model);
  s.f = advect_x(s.f, 0.5 * dt, s.model);
  s.t += dt;
  validate_finite(s.f, "step_strang");
  return s;
}

double default_dt(const PhaseGrid& g, const TransportModel& model) {
  const double amax = max_speed(g, model);
  if (amax <= 0.0) return 0.1;
  return std::min(0.1, g.dx / (2.0 * amax));
}

double wrap_time(const PhaseGrid& g, const TransportModel& model,
                 double data_radius) {
  const double amax = max_speed(g, model);
  if (amax <= 0.0) return std::numeric_limits<double>::infinity();
  return (0.5 * g.Lx - data_radius) / amax;
}

}  // namespace vpk
