#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vpk/fft.hpp"
#include "vpk/grid.hpp"
#include "vpk/transport.hpp"

namespace vpk {

// Streaming access to velocity slices of a phase-space function, so large
// grids never have to be materialized at once.
class SliceSource {
 public:
  virtual ~SliceSource() = default;
  virtual const PhaseGrid& grid() const = 0;
  // Fill out[0..Nx^d) with the x-slice at velocity node v_lin.
  virtual void load_slice(std::size_t v_lin, double* out) const = 0;
};

class FieldSliceSource final : public SliceSource {
 public:
  explicit FieldSliceSource(const PhaseField& f) : f_(&f) {}
  const PhaseGrid& grid() const override { return f_->grid; }
  void load_slice(std::size_t v_lin, double* out) const override;

 private:
  const PhaseField* f_;
};

// Separable Gaussian A e^{-|x|^2/(2 sx^2)} e^{-|v|^2/(2 sv^2)} generated on
// the fly from per-axis tables.
class GaussianSliceSource final : public SliceSource {
 public:
  GaussianSliceSource(const PhaseGrid& g, double amplitude, double sigma_x,
                      double sigma_v);
  const PhaseGrid& grid() const override { return g_; }
  void load_slice(std::size_t v_lin, double* out) const override;

 private:
  PhaseGrid g_;
  double amplitude_;
  std::vector<double> ex_;  // per-axis x factor
  std::vector<double> ev_;  // per-axis v factor
};

class FuncSliceSource final : public SliceSource {
 public:
  FuncSliceSource(const PhaseGrid& g,
                  std::function<double(const Vec3&, const Vec3&)> fn)
      : g_(g), fn_(std::move(fn)) {}
  const PhaseGrid& grid() const override { return g_; }
  void load_slice(std::size_t v_lin, double* out) const override;

 private:
  PhaseGrid g_;
  std::function<double(const Vec3&, const Vec3&)> fn_;
};

struct ReconstructOptions {
  // Node quadrature of the oscillatory v-sum is trusted while
  // t * |xi| * dv <= echo_gamma * 2 pi; beyond that frequencies are cut.
  double echo_gamma = 0.45;
  // Mass tolerance for slice pruning and effective support radii.
  double tail_tol = 1e-7;
};

// Multi-indices with |alpha| <= k for dimension d, graded order. The layout
// of all per-target derivative outputs.
std::vector<MultiIndex> derivative_set(int d, int k);

struct SampleRequest {
  double t = 0.0;
  std::vector<Vec3> targets;
  int deriv_order = 0;  // report all |alpha| <= deriv_order per target
  bool want_sup = false;
  int sup_order = 0;  // sup of the largest |alpha| = sup_order component
};

struct SampleResult {
  // values[target][alpha_ordinal], alphas = derivative_set(d, deriv_order)
  std::vector<std::vector<double>> values;
  double sup_value = 0.0;
  Vec3 sup_point = {0.0, 0.0, 0.0};
};

// Evaluates rho(t,x) = dv^d sum_v g(x - t a(v), v) and its x-derivatives for
// a profile g given by slices, with two quadratures:
//  - node route (small t): per-slice trigonometric interpolation at the
//    shifted targets; exact until velocity-node aliasing (echo) sets in;
//  - spectral route (large t): rho_hat assembled on a t-adapted frequency
//    lattice (extent capped by the echo bound, spacing set by the reachable
//    support), then summed against e^{i x.xi}.
class DensityReconstructor {
 public:
  DensityReconstructor(const SliceSource& src, const TransportModel& model,
                       ReconstructOptions opt = {});

  // One streaming pass over the source evaluating every request.
  std::vector<SampleResult> evaluate_batch(
      const std::vector<SampleRequest>& reqs) const;

  SampleResult evaluate(const SampleRequest& req) const;

  // Grid-node density by spectral accumulation of shifted slices (periodic;
  // valid while reach(t) stays inside the box and t <= node_route_limit()).
  SpatialField density_on_grid(double t) const;

  // Density on a regular d=3 lattice lo + h*(i,j,k), n nodes per axis.
  // Small t: oversampled zero-padded transform of the grid density (requires
  // h = dx/2^s and lattice nodes commensurate with the grid); the result is
  // zeroed outside the reachable support. Large t: spectral route.
  void density_on_lattice(double t, const Vec3& lo, double h, int n,
                          std::vector<double>& out) const;

  struct FineLattice;  // t-adapted frequency lattice (spectral route)

  double node_route_limit() const;       // echo horizon for full-band shifts
  double reach_radius(double t) const;   // support radius bound of rho(t,.)
  double data_radius_x() const { return rx_data_; }
  double max_transport_speed() const { return a_max_; }

 private:
  void build_fine(double t, double target_radius, FineLattice& lat) const;
  void stream_accumulate(const std::vector<const FineLattice*>& fine,
                         const std::vector<const SampleRequest*>& node_reqs,
                         std::vector<SampleResult*> node_results) const;

  const SliceSource* src_;
  TransportModel model_;
  ReconstructOptions opt_;
  std::vector<char> active_;     // slice pruning bitmap
  std::vector<Vec3> a_nodes_;    // a(v_j) per slice
  std::vector<double> mass_;     // abs slice masses
  double total_mass_ = 0.0;
  double rx_data_ = 0.0;         // abs-marginal support radius in x
  double a_max_ = 0.0;           // max |a| over active slices
};

}  // namespace vpk
