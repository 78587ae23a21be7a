#include "vpk/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "vpk/parallel.hpp"

namespace vpk {

void FieldSliceSource::load_slice(std::size_t v_lin, double* out) const {
  const double* s = f_->slice(v_lin);
  std::copy(s, s + f_->grid.nx_total, out);
}

GaussianSliceSource::GaussianSliceSource(const PhaseGrid& g, double amplitude,
                                         double sigma_x, double sigma_v)
    : g_(g), amplitude_(amplitude) {
  ex_.resize(g.Nx);
  for (int i = 0; i < g.Nx; ++i) {
    const double x = g.x_nodes[i];
    ex_[i] = std::exp(-x * x / (2.0 * sigma_x * sigma_x));
  }
  ev_.resize(g.Nv);
  for (int j = 0; j < g.Nv; ++j) {
    const double v = g.v_nodes[j];
    ev_[j] = std::exp(-v * v / (2.0 * sigma_v * sigma_v));
  }
}

void GaussianSliceSource::load_slice(std::size_t v_lin, double* out) const {
  MultiIndex jv;
  g_.decode_v(v_lin, jv);
  double amp = amplitude_;
  for (int ax = 0; ax < g_.d; ++ax) amp *= ev_[jv[ax]];
  const int N = g_.Nx;
  if (g_.d == 1) {
    for (int i = 0; i < N; ++i) out[i] = amp * ex_[i];
  } else if (g_.d == 2) {
    std::size_t p = 0;
    for (int i = 0; i < N; ++i) {
      const double a = amp * ex_[i];
      for (int j = 0; j < N; ++j) out[p++] = a * ex_[j];
    }
  } else {
    std::size_t p = 0;
    for (int i = 0; i < N; ++i) {
      const double a = amp * ex_[i];
      for (int j = 0; j < N; ++j) {
        const double b = a * ex_[j];
        for (int k = 0; k < N; ++k) out[p++] = b * ex_[k];
      }
    }
  }
}

void FuncSliceSource::load_slice(std::size_t v_lin, double* out) const {
  Vec3 v, x;
  g_.v_coord(v_lin, v);
  for (std::size_t i = 0; i < g_.nx_total; ++i) {
    g_.x_coord(i, x);
    out[i] = fn_(x, v);
  }
}

std::vector<MultiIndex> derivative_set(int d, int k) {
  std::vector<MultiIndex> out;
  for (int total = 0; total <= k; ++total)
    for (int a0 = total; a0 >= 0; --a0) {
      if (d == 1) {
        if (a0 == total) out.push_back({a0, 0, 0});
        continue;
      }
      for (int a1 = total - a0; a1 >= 0; --a1) {
        const int a2 = total - a0 - a1;
        if (d == 2 && a2 != 0) continue;
        out.push_back({a0, a1, d == 2 ? 0 : a2});
        if (d == 2) break;  // a2 must be 0; inner loop handled once
      }
    }
  return out;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

// ---------------------------------------------------------------------------
// Construction: one pass for slice masses, pruning, and support radii.

DensityReconstructor::DensityReconstructor(const SliceSource& src,
                                           const TransportModel& model,
                                           ReconstructOptions opt)
    : src_(&src), model_(model), opt_(opt) {
  const PhaseGrid& g = src.grid();
  const std::size_t nv = g.nv_total;
  const std::size_t nx = g.nx_total;
  mass_.assign(nv, 0.0);
  a_nodes_.resize(nv);
  active_.assign(nv, 1);

  const std::size_t chunks = std::min<std::size_t>(64, nv);
  std::vector<std::vector<double>> marg(chunks);  // per-chunk axis marginals
  const int N = g.Nx;
  parallel_chunks(nv, chunks, [&](std::size_t b, std::size_t e, std::size_t c) {
    std::vector<double> buf(nx);
    std::vector<double>& m = marg[c];
    m.assign(static_cast<std::size_t>(g.d) * N, 0.0);
    Vec3 v;
    for (std::size_t j = b; j < e; ++j) {
      g.v_coord(j, v);
      a_nodes_[j] = velocity_map(v, model_);
      src_->load_slice(j, buf.data());
      double s = 0.0;
      MultiIndex ix;
      for (std::size_t i = 0; i < nx; ++i) {
        const double a = std::abs(buf[i]);
        s += a;
        g.decode_x(i, ix);
        for (int ax = 0; ax < g.d; ++ax) m[ax * N + ix[ax]] += a;
      }
      mass_[j] = s * g.cell_x();
    }
  });

  std::vector<double> axis_marg(static_cast<std::size_t>(g.d) * N, 0.0);
  for (const auto& m : marg)
    for (std::size_t i = 0; i < axis_marg.size(); ++i) axis_marg[i] += m[i];
  total_mass_ = 0.0;
  for (double m : mass_) total_mass_ += m;

  // Support radius in x from the per-axis abs marginals.
  rx_data_ = 0.0;
  for (int ax = 0; ax < g.d; ++ax) {
    double tot = 0.0;
    for (int i = 0; i < N; ++i) tot += axis_marg[ax * N + i];
    if (tot <= 0.0) continue;
    const double cut = opt_.tail_tol * tot;
    double acc = 0.0;
    int lo = 0, hi = N - 1;
    while (lo < N && acc + axis_marg[ax * N + lo] <= cut)
      acc += axis_marg[ax * N + lo++];
    acc = 0.0;
    while (hi >= 0 && acc + axis_marg[ax * N + hi] <= cut)
      acc += axis_marg[ax * N + hi--];
    double r = 0.0;
    if (lo < N) r = std::max(std::abs(g.x_nodes[lo]), std::abs(g.x_nodes[hi]));
    rx_data_ = std::max(rx_data_, r + g.dx);
  }
  if (rx_data_ == 0.0) rx_data_ = g.dx;

  // Prune the lightest slices whose combined mass is below tail_tol.
  std::vector<std::size_t> order(nv);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return mass_[a] < mass_[b]; });
  double acc = 0.0;
  for (std::size_t j : order) {
    if (acc + mass_[j] > opt_.tail_tol * total_mass_) break;
    acc += mass_[j];
    active_[j] = 0;
  }
  a_max_ = 0.0;
  for (std::size_t j = 0; j < nv; ++j) {
    if (!active_[j]) continue;
    const Vec3& a = a_nodes_[j];
    a_max_ = std::max(a_max_, std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]));
  }
}

double DensityReconstructor::node_route_limit() const {
  const PhaseGrid& g = src_->grid();
  return 2.0 * opt_.echo_gamma * g.dx / g.dv;
}

double DensityReconstructor::reach_radius(double t) const {
  return rx_data_ + std::abs(t) * a_max_;
}

// ---------------------------------------------------------------------------
// Fine frequency lattice (spectral route).

struct DensityReconstructor::FineLattice {
  double t = 0.0;
  int m = 1;           // nodes per active axis (odd)
  double dxi = 0.0;    // spacing
  std::vector<double> xi;          // node values, size m
  std::vector<cplx> phase_x;       // e^{-i x_n xi_q} * dx, m x Nx
  std::vector<cplx> phi;           // m^d accumulated spectrum
  std::size_t total = 1;
  int mdim[3] = {1, 1, 1};
};

void DensityReconstructor::build_fine(double t, double target_radius,
                                      FineLattice& lat) const {
  const PhaseGrid& g = src_->grid();
  const double teff = std::max(std::abs(t), 1e-9);
  const double nyq = std::numbers::pi / g.dx;
  double Xi = std::min(nyq, opt_.echo_gamma * kTwoPi / (teff * g.dv));
  const double L_im = reach_radius(t) + target_radius + 4.0 * g.dx;
  double dxi = kTwoPi / L_im;
  int half = static_cast<int>(std::ceil(Xi / dxi));
  half = std::min(half, 128);
  lat.t = t;
  lat.m = 2 * half + 1;
  lat.dxi = dxi;
  lat.xi.resize(lat.m);
  for (int q = 0; q < lat.m; ++q) lat.xi[q] = (q - half) * dxi;
  lat.phase_x.resize(static_cast<std::size_t>(lat.m) * g.Nx);
  for (int q = 0; q < lat.m; ++q)
    for (int n = 0; n < g.Nx; ++n)
      lat.phase_x[static_cast<std::size_t>(q) * g.Nx + n] =
          std::polar(g.dx, -g.x_nodes[n] * lat.xi[q]);
  lat.total = 1;
  for (int ax = 0; ax < 3; ++ax) {
    lat.mdim[ax] = (ax < g.d) ? lat.m : 1;
    lat.total *= static_cast<std::size_t>(lat.mdim[ax]);
  }
  lat.phi.assign(lat.total, cplx(0.0, 0.0));
}

// ---------------------------------------------------------------------------
// The single streaming pass: per slice, serve the node-route requests by
// trigonometric interpolation and fold the slice into each fine lattice.

void DensityReconstructor::stream_accumulate(
    const std::vector<const FineLattice*>& fine,
    const std::vector<const SampleRequest*>& node_reqs,
    std::vector<SampleResult*> node_results) const {
  const PhaseGrid& g = src_->grid();
  const std::size_t nv = g.nv_total;
  const std::size_t nx = g.nx_total;
  const int N = g.Nx;
  const int d = g.d;

  std::vector<std::vector<MultiIndex>> node_alphas(node_reqs.size());
  for (std::size_t r = 0; r < node_reqs.size(); ++r)
    node_alphas[r] = derivative_set(d, node_reqs[r]->deriv_order);

  const std::size_t chunks = std::min<std::size_t>(16, nv);
  // Per-chunk accumulators, merged in chunk order below.
  std::vector<std::vector<std::vector<cplx>>> phi_acc(
      chunks);  // [chunk][lattice][node]
  std::vector<std::vector<std::vector<std::vector<double>>>> node_acc(
      chunks);  // [chunk][req][target][alpha]

  const bool need_node_fft = !node_reqs.empty();

  parallel_chunks(nv, chunks, [&](std::size_t b, std::size_t e, std::size_t c) {
    std::vector<double> slice(nx);
    std::vector<cplx> spec(need_node_fft ? nx : 0);
    // Contraction scratch, sized for the largest lattice.
    std::size_t scratch = 0;
    int m_max = 1;
    for (const FineLattice* l : fine) {
      m_max = std::max(m_max, l->m);
      // Stage k output has shape m^(k+1) x N^(d-1-k); cover every stage.
      for (int k = 0; k < d; ++k) {
        std::size_t s = 1;
        for (int ax = 0; ax <= k; ++ax) s *= static_cast<std::size_t>(l->m);
        for (int ax = k + 1; ax < d; ++ax) s *= static_cast<std::size_t>(N);
        scratch = std::max(scratch, s);
      }
    }
    std::vector<cplx> buf_a(scratch), buf_b(scratch);
    std::vector<cplx> aphase(static_cast<std::size_t>(3) * m_max);

    phi_acc[c].resize(fine.size());
    for (std::size_t l = 0; l < fine.size(); ++l)
      phi_acc[c][l].assign(fine[l]->total, cplx(0.0, 0.0));
    node_acc[c].resize(node_reqs.size());
    for (std::size_t r = 0; r < node_reqs.size(); ++r)
      node_acc[c][r].assign(
          node_reqs[r]->targets.size(),
          std::vector<double>(node_alphas[r].size(), 0.0));

    std::vector<double> vals;
    for (std::size_t j = b; j < e; ++j) {
      if (!active_[j]) continue;
      src_->load_slice(j, slice.data());
      const Vec3& a = a_nodes_[j];

      if (need_node_fft) {
        fourier_forward(slice.data(), spec.data(), d, N, g.Lx);
        for (std::size_t r = 0; r < node_reqs.size(); ++r) {
          const SampleRequest& rq = *node_reqs[r];
          for (std::size_t ti = 0; ti < rq.targets.size(); ++ti) {
            Vec3 y = {0.0, 0.0, 0.0};
            bool inside = true;
            for (int ax = 0; ax < d; ++ax) {
              y[ax] = rq.targets[ti][ax] - rq.t * a[ax];
              if (y[ax] < -0.5 * g.Lx || y[ax] >= 0.5 * g.Lx) inside = false;
            }
            if (!inside) continue;  // zero outside the box (compact support)
            vals.assign(node_alphas[r].size(), 0.0);
            trig_eval(spec.data(), g, y, node_alphas[r], vals.data());
            for (std::size_t ai = 0; ai < vals.size(); ++ai)
              node_acc[c][r][ti][ai] += vals[ai];
          }
        }
      }

      for (std::size_t l = 0; l < fine.size(); ++l) {
        const FineLattice& lat = *fine[l];
        const int m = lat.m;
        // Stage over axis 0: real slice -> complex, shape [m][N^(d-1)].
        std::size_t inner = 1;
        for (int ax = 1; ax < d; ++ax) inner *= static_cast<std::size_t>(N);
        {
          cplx* out = buf_a.data();
          for (int q = 0; q < m; ++q) {
            cplx* row = out + static_cast<std::size_t>(q) * inner;
            std::fill(row, row + inner, cplx(0.0, 0.0));
            const cplx* ph = lat.phase_x.data() + static_cast<std::size_t>(q) * N;
            for (int n = 0; n < N; ++n) {
              const double pr = ph[n].real(), pi = ph[n].imag();
              const double* src_row = slice.data() + static_cast<std::size_t>(n) * inner;
              double* dst = reinterpret_cast<double*>(row);
              for (std::size_t i = 0; i < inner; ++i) {
                const double v = src_row[i];
                dst[2 * i] += pr * v;
                dst[2 * i + 1] += pi * v;
              }
            }
          }
        }
        // Remaining axes: complex contractions.
        cplx* cur = buf_a.data();
        cplx* nxt = buf_b.data();
        std::size_t outer = static_cast<std::size_t>(m);
        for (int ax = 1; ax < d; ++ax) {
          inner /= static_cast<std::size_t>(N);
          // cur shape: [outer][N][inner] -> nxt: [outer][m][inner]
          for (std::size_t o = 0; o < outer; ++o) {
            const cplx* in_block = cur + o * static_cast<std::size_t>(N) * inner;
            cplx* out_block = nxt + o * static_cast<std::size_t>(m) * inner;
            for (int q = 0; q < m; ++q) {
              cplx* row = out_block + static_cast<std::size_t>(q) * inner;
              std::fill(row, row + inner, cplx(0.0, 0.0));
              const cplx* ph = lat.phase_x.data() + static_cast<std::size_t>(q) * N;
              for (int n = 0; n < N; ++n) {
                const cplx p = ph[n];
                const cplx* src_row = in_block + static_cast<std::size_t>(n) * inner;
                for (std::size_t i = 0; i < inner; ++i) row[i] += p * src_row[i];
              }
            }
          }
          outer *= static_cast<std::size_t>(m);
          std::swap(cur, nxt);
        }
        // cur now holds g_hat(xi, v_j) on the lattice; fold in the transport
        // phase e^{-i t a(v_j).xi} (separable) and accumulate.
        for (int ax = 0; ax < 3; ++ax)
          for (int q = 0; q < lat.mdim[ax]; ++q)
            aphase[static_cast<std::size_t>(ax) * m_max + q] =
                (ax < d) ? std::polar(1.0, -lat.t * a[ax] * lat.xi[q])
                         : cplx(1.0, 0.0);
        cplx* acc = phi_acc[c][l].data();
        std::size_t idx = 0;
        for (int q0 = 0; q0 < lat.mdim[0]; ++q0) {
          const cplx p0 = aphase[q0];
          for (int q1 = 0; q1 < lat.mdim[1]; ++q1) {
            const cplx p01 = p0 * aphase[m_max + q1];
            for (int q2 = 0; q2 < lat.mdim[2]; ++q2) {
              acc[idx] += p01 * aphase[2 * static_cast<std::size_t>(m_max) + q2] *
                          cur[idx];
              ++idx;
            }
          }
        }
      }
    }
  });

  // Deterministic merge in chunk order.
  const double wv = g.cell_v();
  for (std::size_t l = 0; l < fine.size(); ++l) {
    cplx* phi = const_cast<FineLattice*>(fine[l])->phi.data();
    for (std::size_t c = 0; c < chunks; ++c)
      for (std::size_t i = 0; i < fine[l]->total; ++i) phi[i] += phi_acc[c][l][i];
    for (std::size_t i = 0; i < fine[l]->total; ++i) phi[i] *= wv;
  }
  for (std::size_t r = 0; r < node_reqs.size(); ++r) {
    auto& res = *node_results[r];
    res.values.assign(node_reqs[r]->targets.size(),
                      std::vector<double>(node_alphas[r].size(), 0.0));
    for (std::size_t c = 0; c < chunks; ++c)
      for (std::size_t ti = 0; ti < res.values.size(); ++ti)
        for (std::size_t ai = 0; ai < res.values[ti].size(); ++ai)
          res.values[ti][ai] += node_acc[c][r][ti][ai];
    for (auto& row : res.values)
      for (double& v : row) v *= wv;
  }
}

// ---------------------------------------------------------------------------
// Evaluation against an assembled lattice.

struct FineEvalTables {
  // (i xi_q)^p per axis, p = 0..pmax
  std::vector<cplx> pow_table;  // [p][q]
  int pmax = 0;
  int m = 1;
  const cplx* pw(int p) const { return pow_table.data() + static_cast<std::size_t>(p) * m; }
};

namespace {

FineEvalTables make_tables(const DensityReconstructor::FineLattice& lat,
                           int pmax) {
  FineEvalTables tb;
  tb.pmax = pmax;
  tb.m = lat.m;
  tb.pow_table.assign(static_cast<std::size_t>(pmax + 1) * lat.m, cplx(1.0, 0.0));
  for (int p = 1; p <= pmax; ++p)
    for (int q = 0; q < lat.m; ++q)
      tb.pow_table[static_cast<std::size_t>(p) * lat.m + q] =
          tb.pow_table[static_cast<std::size_t>(p - 1) * lat.m + q] *
          cplx(0.0, lat.xi[q]);
  return tb;
}

void fine_eval_tb(const DensityReconstructor::FineLattice& lat,
                  const FineEvalTables& tb, int d, const Vec3& x,
                  const std::vector<MultiIndex>& alphas, double* out) {
  const int m = lat.m;
  std::vector<cplx> ph[3];
  for (int ax = 0; ax < 3; ++ax) {
    ph[ax].resize(lat.mdim[ax]);
    for (int q = 0; q < lat.mdim[ax]; ++q)
      ph[ax][q] = (ax < d) ? std::polar(1.0, x[ax] * lat.xi[q]) : cplx(1.0, 0.0);
  }
  const std::size_t na = alphas.size();
  std::vector<cplx> acc(na, cplx(0.0, 0.0));
  std::size_t idx = 0;
  for (int q0 = 0; q0 < lat.mdim[0]; ++q0) {
    for (int q1 = 0; q1 < lat.mdim[1]; ++q1) {
      const cplx p01 = ph[0][q0] * ph[1][q1];
      for (int q2 = 0; q2 < lat.mdim[2]; ++q2) {
        const cplx base = lat.phi[idx] * (p01 * ph[2][q2]);
        for (std::size_t ai = 0; ai < na; ++ai) {
          const MultiIndex& al = alphas[ai];
          cplx f = tb.pw(al[0])[q0];
          if (d > 1) f *= tb.pw(al[1])[q1];
          if (d > 2) f *= tb.pw(al[2])[q2];
          acc[ai] += base * f;
        }
        ++idx;
      }
    }
  }
  const double w = std::pow(lat.dxi / kTwoPi, d);
  for (std::size_t ai = 0; ai < na; ++ai) out[ai] = (acc[ai] * w).real();
}

}  // namespace

std::vector<SampleResult> DensityReconstructor::evaluate_batch(
    const std::vector<SampleRequest>& reqs) const {
  const PhaseGrid& g = src_->grid();
  const int d = g.d;
  const double t_node = node_route_limit();

  std::vector<SampleResult> results(reqs.size());
  std::vector<std::unique_ptr<FineLattice>> lats;
  std::vector<const FineLattice*> fine_ptrs;
  std::vector<std::size_t> fine_req;  // request index per lattice
  std::vector<const SampleRequest*> node_reqs;
  std::vector<SampleResult*> node_results;

  for (std::size_t r = 0; r < reqs.size(); ++r) {
    const SampleRequest& rq = reqs[r];
    const bool fine_route = rq.want_sup || std::abs(rq.t) > t_node;
    if (!fine_route) {
      node_reqs.push_back(&rq);
      node_results.push_back(&results[r]);
      continue;
    }
    double target_radius = 0.0;
    for (const Vec3& x : rq.targets)
      for (int ax = 0; ax < d; ++ax)
        target_radius = std::max(target_radius, std::abs(x[ax]));
    if (rq.want_sup)
      target_radius = std::max(target_radius, std::abs(rq.t) * a_max_ + g.dx);
    auto lat = std::make_unique<FineLattice>();
    build_fine(rq.t, target_radius, *lat);
    fine_ptrs.push_back(lat.get());
    fine_req.push_back(r);
    lats.push_back(std::move(lat));
  }

  stream_accumulate(fine_ptrs, node_reqs, node_results);

  for (std::size_t l = 0; l < fine_ptrs.size(); ++l) {
    const SampleRequest& rq = reqs[fine_req[l]];
    SampleResult& res = results[fine_req[l]];
    const FineLattice& lat = *fine_ptrs[l];
    const int pmax = std::max(rq.deriv_order, rq.sup_order + 1);
    FineEvalTables tb = make_tables(lat, pmax);

    const auto alphas = derivative_set(d, rq.deriv_order);
    res.values.assign(rq.targets.size(), std::vector<double>(alphas.size()));
    for (std::size_t ti = 0; ti < rq.targets.size(); ++ti)
      fine_eval_tb(lat, tb, d, rq.targets[ti], alphas,
                   res.values[ti].data());

    if (rq.want_sup) {
      // Candidates: transported velocity nodes (mass-ranked) plus a coarse
      // lattice over the reachable ball, refined by gradient ascent.
      const auto all_k = derivative_set(d, rq.sup_order);
      std::vector<MultiIndex> alphas_k;
      for (const auto& a : all_k)
        if (mi_order(a) == rq.sup_order) alphas_k.push_back(a);

      std::vector<std::size_t> order;
      order.reserve(g.nv_total);
      for (std::size_t j = 0; j < g.nv_total; ++j)
        if (active_[j]) order.push_back(j);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return mass_[a] > mass_[b];
      });
      if (order.size() > 2048) order.resize(2048);
      std::vector<Vec3> cands;
      cands.reserve(order.size() + 1000);
      for (std::size_t j : order) {
        Vec3 p = {0.0, 0.0, 0.0};
        for (int ax = 0; ax < d; ++ax) p[ax] = rq.t * a_nodes_[j][ax];
        cands.push_back(p);
      }
      const double R = reach_radius(rq.t);
      const int nl = 9;
      MultiIndex li = {0, 0, 0};
      std::size_t lat_total = 1;
      for (int ax = 0; ax < d; ++ax) lat_total *= nl;
      for (std::size_t lin = 0; lin < lat_total; ++lin) {
        std::size_t rr = lin;
        Vec3 p = {0.0, 0.0, 0.0};
        for (int ax = d - 1; ax >= 0; --ax) {
          li[ax] = static_cast<int>(rr % nl);
          rr /= nl;
          p[ax] = -R + 2.0 * R * li[ax] / (nl - 1);
        }
        cands.push_back(p);
      }

      std::vector<double> vk(alphas_k.size());
      auto objective = [&](const Vec3& p) {
        fine_eval_tb(lat, tb, d, p, alphas_k, vk.data());
        double m = 0.0;
        for (double v : vk) m = std::max(m, std::abs(v));
        return m;
      };
      std::vector<std::pair<double, Vec3>> scored;
      scored.reserve(cands.size());
      for (const Vec3& p : cands) scored.emplace_back(objective(p), p);
      std::sort(scored.begin(), scored.end(),
                [](const auto& a, const auto& b) { return a.first > b.first; });
      const std::size_t keep = std::min<std::size_t>(4, scored.size());

      double best = scored.empty() ? 0.0 : scored[0].first;
      Vec3 best_p = scored.empty() ? Vec3{0, 0, 0} : scored[0].second;
      const double step = g.dx / 4.0;
      std::vector<MultiIndex> grad_alphas(d);
      std::vector<double> gv(d);
      for (std::size_t s = 0; s < keep; ++s) {
        Vec3 p = scored[s].second;
        for (int it = 0; it < 8; ++it) {
          fine_eval_tb(lat, tb, d, p, alphas_k, vk.data());
          std::size_t besta = 0;
          for (std::size_t ai = 1; ai < vk.size(); ++ai)
            if (std::abs(vk[ai]) > std::abs(vk[besta])) besta = ai;
          const double sign = vk[besta] >= 0 ? 1.0 : -1.0;
          for (int ax = 0; ax < d; ++ax) {
            MultiIndex a2 = alphas_k[besta];
            a2[ax] += 1;
            grad_alphas[ax] = a2;
          }
          fine_eval_tb(lat, tb, d, p, grad_alphas, gv.data());
          double norm = 0.0;
          for (int ax = 0; ax < d; ++ax) norm += gv[ax] * gv[ax];
          norm = std::sqrt(norm);
          if (norm == 0.0) break;
          for (int ax = 0; ax < d; ++ax) p[ax] += step * sign * gv[ax] / norm;
          const double val = objective(p);
          if (val > best) {
            best = val;
            best_p = p;
          }
        }
      }
      res.sup_value = best;
      res.sup_point = best_p;
    }
  }

  // Node-route sup was redirected to the fine route above, so nothing else
  // to do for node requests.
  return results;
}

SampleResult DensityReconstructor::evaluate(const SampleRequest& req) const {
  return evaluate_batch({req})[0];
}

SpatialField DensityReconstructor::density_on_grid(double t) const {
  const PhaseGrid& g = src_->grid();
  if (std::abs(t) > node_route_limit() * (1.0 + 1e-12))
    throw GridError("density_on_grid: t beyond the node-quadrature horizon");
  if (reach_radius(t) > 0.5 * g.Lx + g.dx)
    throw GridError("density_on_grid: reachable support exceeds the box");

  const std::size_t nx = g.nx_total;
  const std::size_t nv = g.nv_total;
  const std::size_t chunks = std::min<std::size_t>(16, nv);
  std::vector<std::vector<cplx>> acc(chunks);
  parallel_chunks(nv, chunks, [&](std::size_t b, std::size_t e, std::size_t c) {
    std::vector<double> slice(nx);
    std::vector<cplx> spec(nx);
    acc[c].assign(nx, cplx(0.0, 0.0));
    std::vector<cplx> phase[3];
    for (std::size_t j = b; j < e; ++j) {
      if (!active_[j]) continue;
      src_->load_slice(j, slice.data());
      for (std::size_t i = 0; i < nx; ++i) spec[i] = slice[i];
      dft_cube(spec.data(), g.d, g.Nx, -1);
      const Vec3& a = a_nodes_[j];
      for (int ax = 0; ax < g.d; ++ax) {
        phase[ax].resize(g.Nx);
        for (int mm = 0; mm < g.Nx; ++mm)
          phase[ax][mm] = std::polar(1.0, -t * a[ax] * g.xi_x[mm]);
      }
      for (std::size_t lin = 0; lin < nx; ++lin) {
        std::size_t r = lin;
        cplx mult(1.0, 0.0);
        for (int ax = g.d - 1; ax >= 0; --ax) {
          const int mm = static_cast<int>(r % static_cast<std::size_t>(g.Nx));
          r /= static_cast<std::size_t>(g.Nx);
          mult *= phase[ax][mm];
        }
        acc[c][lin] += mult * spec[lin];
      }
    }
  });
  std::vector<cplx> spec(nx, cplx(0.0, 0.0));
  for (std::size_t c = 0; c < chunks; ++c)
    for (std::size_t i = 0; i < nx; ++i) spec[i] += acc[c][i];
  dft_cube(spec.data(), g.d, g.Nx, +1);
  SpatialField rho(g);
  const double scale = g.cell_v() / static_cast<double>(nx);
  for (std::size_t i = 0; i < nx; ++i) rho.values[i] = spec[i].real() * scale;
  return rho;
}

void DensityReconstructor::density_on_lattice(double t, const Vec3& lo,
                                              double h, int n,
                                              std::vector<double>& out) const {
  const PhaseGrid& g = src_->grid();
  if (g.d != 3) throw GridError("density_on_lattice: d = 3 only");
  const std::size_t n3 = static_cast<std::size_t>(n) * n * n;
  out.assign(n3, 0.0);

  if (std::abs(t) <= node_route_limit() &&
      reach_radius(t) <= 0.5 * g.Lx + g.dx) {
    // Oversampled transform of the periodic grid density.
    const double ratio = g.dx / h;
    const int s = static_cast<int>(std::lround(ratio));
    if (std::abs(ratio - s) > 1e-9 || s < 1 || (s & (s - 1)) != 0)
      throw GridError("density_on_lattice: h must be dx / 2^k");
    SpatialField rho = density_on_grid(t);
    const int P = g.Nx * s;
    const std::size_t p3 = static_cast<std::size_t>(P) * P * P;
    std::vector<cplx> spec(g.nx_total);
    for (std::size_t i = 0; i < g.nx_total; ++i) spec[i] = rho.values[i];
    dft_cube(spec.data(), 3, g.Nx, -1);
    std::vector<cplx> big(p3, cplx(0.0, 0.0));
    const int N = g.Nx;
    auto map_idx = [&](int m) {
      const int ms = (m < N / 2) ? m : m - N;  // signed frequency
      return (ms + P) % P;
    };
    for (int m0 = 0; m0 < N; ++m0)
      for (int m1 = 0; m1 < N; ++m1)
        for (int m2 = 0; m2 < N; ++m2) {
          // Split Nyquist planes symmetrically to keep the interpolant real.
          double w = 1.0;
          int i0[2] = {map_idx(m0), -1}, i1[2] = {map_idx(m1), -1},
              i2[2] = {map_idx(m2), -1};
          int c0 = 1, c1 = 1, c2 = 1;
          if (m0 == N / 2 && s > 1) { i0[1] = (P - N / 2) % P; c0 = 2; }
          if (m1 == N / 2 && s > 1) { i1[1] = (P - N / 2) % P; c1 = 2; }
          if (m2 == N / 2 && s > 1) { i2[1] = (P - N / 2) % P; c2 = 2; }
          w = 1.0 / (c0 * c1 * c2);
          const cplx val =
              spec[(static_cast<std::size_t>(m0) * N + m1) * N + m2] * w;
          for (int a0 = 0; a0 < c0; ++a0)
            for (int a1 = 0; a1 < c1; ++a1)
              for (int a2 = 0; a2 < c2; ++a2) {
                // Nyquist mirror flips sign of the (-1)^m node offset; for
                // even P and node alignment both mirrors carry equal weight.
                big[(static_cast<std::size_t>(i0[a0]) * P + i1[a1]) * P +
                    i2[a2]] += val;
              }
        }
    dft_cube(big.data(), 3, P, +1);
    const double scale = 1.0 / static_cast<double>(g.nx_total);
    const double R = reach_radius(t) + 2.0 * h;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          const Vec3 x = {lo[0] + i * h, lo[1] + j * h, lo[2] + k * h};
          if (std::abs(x[0]) > R || std::abs(x[1]) > R || std::abs(x[2]) > R)
            continue;
          int pi[3];
          for (int ax = 0; ax < 3; ++ax) {
            const double u = (x[ax] + 0.5 * g.Lx) / h;
            const int ui = static_cast<int>(std::lround(u));
            if (std::abs(u - ui) > 1e-6)
              throw GridError("density_on_lattice: node not grid-aligned");
            pi[ax] = ((ui % P) + P) % P;  // periodic wrap of edge spill
          }
          out[(static_cast<std::size_t>(i) * n + j) * n + k] =
              big[(static_cast<std::size_t>(pi[0]) * P + pi[1]) * P + pi[2]]
                  .real() *
              scale;
        }
    return;
  }

  // Spectral route: evaluate the fine-lattice interpolant on the regular
  // target lattice by separable contraction.
  double target_radius = 0.0;
  for (int ax = 0; ax < 3; ++ax)
    target_radius = std::max(
        {target_radius, std::abs(lo[ax]), std::abs(lo[ax] + (n - 1) * h)});
  FineLattice lat;
  build_fine(t, target_radius, lat);
  std::vector<const FineLattice*> fl = {&lat};
  stream_accumulate(fl, {}, {});

  const int m = lat.m;
  std::vector<cplx> B(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i)
    for (int q = 0; q < m; ++q)
      B[static_cast<std::size_t>(i) * m + q] =
          std::polar(1.0, (lo[0] + i * h) * lat.xi[q]);
  // lo is the same for all axes only if caller says so; rebuild per axis.
  std::vector<cplx> B1(static_cast<std::size_t>(n) * m),
      B2(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i)
    for (int q = 0; q < m; ++q) {
      B1[static_cast<std::size_t>(i) * m + q] =
          std::polar(1.0, (lo[1] + i * h) * lat.xi[q]);
      B2[static_cast<std::size_t>(i) * m + q] =
          std::polar(1.0, (lo[2] + i * h) * lat.xi[q]);
    }
  std::vector<cplx> s1(static_cast<std::size_t>(n) * m * m);
  for (int i = 0; i < n; ++i)
    for (int q1 = 0; q1 < m; ++q1)
      for (int q2 = 0; q2 < m; ++q2) {
        cplx acc(0.0, 0.0);
        const cplx* brow = B.data() + static_cast<std::size_t>(i) * m;
        for (int q0 = 0; q0 < m; ++q0)
          acc += brow[q0] *
                 lat.phi[(static_cast<std::size_t>(q0) * m + q1) * m + q2];
        s1[(static_cast<std::size_t>(i) * m + q1) * m + q2] = acc;
      }
  std::vector<cplx> s2(static_cast<std::size_t>(n) * n * m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int q2 = 0; q2 < m; ++q2) {
        cplx acc(0.0, 0.0);
        const cplx* brow = B1.data() + static_cast<std::size_t>(j) * m;
        for (int q1 = 0; q1 < m; ++q1)
          acc += brow[q1] *
                 s1[(static_cast<std::size_t>(i) * m + q1) * m + q2];
        s2[(static_cast<std::size_t>(i) * n + j) * m + q2] = acc;
      }
  const double w = std::pow(lat.dxi / kTwoPi, 3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        cplx acc(0.0, 0.0);
        const cplx* brow = B2.data() + static_cast<std::size_t>(k) * m;
        const cplx* srow = s2.data() + (static_cast<std::size_t>(i) * n + j) * m;
        for (int q2 = 0; q2 < m; ++q2) acc += brow[q2] * srow[q2];
        out[(static_cast<std::size_t>(i) * n + j) * n + k] = acc.real() * w;
      }
}

}  // namespace vpk
