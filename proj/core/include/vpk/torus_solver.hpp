#pragma once

#include <vector>

#include "vpk/field_solver.hpp"
#include "vpk/grid.hpp"
#include "vpk/transport.hpp"

namespace vpk {

// Periodic-box backend: Strang-split semi-Lagrangian spectral integrator.
struct SimState {
  double t = 0.0;
  PhaseField f;
  TransportModel model;
};

// Per velocity node, translate f in x by -a(v) dt (exact Fourier shift).
PhaseField advect_x(const PhaseField& f, double dt, const TransportModel& model);

// Per position node, translate f in v by -mu grad_phi(x) dt (periodic v box).
// Throws GridError if any |mu grad_phi dt| component exceeds Vmax/4.
PhaseField advect_v(const PhaseField& f, double dt,
                    const std::vector<SpatialField>& grad_phi,
                    const TransportModel& model);

// Second-order splitting x(dt/2) -> Poisson + v(dt) -> x(dt/2). The field is
// solved on the half-advected density (temporal midpoint).
SimState step_strang(SimState s, double dt);

// Default step: min(0.1, dx / (2 max|a|)).
double default_dt(const PhaseGrid& g, const TransportModel& model);

// Time horizon before wrap contamination: (Lx/2 - data_radius) / max|a|.
double wrap_time(const PhaseGrid& g, const TransportModel& model,
                 double data_radius);

}  // namespace vpk
