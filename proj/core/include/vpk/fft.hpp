#pragma once

#include <complex>
#include <vector>

#include "vpk/grid.hpp"

namespace vpk {

using cplx = std::complex<double>;

enum class Space { position, velocity };

// In-place complex DFT on a d-dimensional cube of edge N (row-major).
// sign = -1: forward (e^{-i 2pi mn/N}), sign = +1: backward, unnormalized.
// Plans are cached (FFTW, estimate mode) and execution is thread-safe.
void dft_cube(cplx* data, int d, int N, int sign);

// In-place transform over the velocity cube of a phase-space array laid out
// with velocity outermost (element stride nx within each v-cube).
void dft_vcube_many(cplx* data, int d, int N, std::size_t nx, int sign);

// Convention used throughout: u_hat(xi) = integral e^{-i x.xi} u(x) dx with
// x-nodes starting at -L/2, xi in FFT index order. forward fills `out` with
// u_hat(xi_m) = cellvol * (-1)^(sum m) * DFT(u)_m; backward inverts exactly.
void fourier_forward(const double* u, cplx* out, int d, int N, double period);
void fourier_backward(const cplx* u_hat, double* out, int d, int N, double period);

// Maximum derivative order accepted by spectral_derivative (aliasing guard).
int max_derivative_order();
void set_max_derivative_order(int k);

SpatialField spectral_derivative(const SpatialField& u, const MultiIndex& alpha);

// Visit grad_v^beta f for each beta in `betas`, sharing one forward
// velocity transform; `fn` receives the index into `betas` and the field
// (reused buffer; copy if it must outlive the call).
void for_each_v_derivative(
    const PhaseField& f, const std::vector<MultiIndex>& betas,
    const std::function<void(std::size_t, const PhaseField&)>& fn);
PhaseField spectral_derivative(const PhaseField& f, const MultiIndex& alpha,
                               Space space);

// Translate u by `shift` (u(x) -> u(x + shift)) via Fourier phase shift.
SpatialField shift_spatial(const SpatialField& u, const Vec3& shift);

// For each velocity node v, f(x,v) -> f(x + offset(v), v).
PhaseField interpolate(const PhaseField& f,
                       const std::function<Vec3(const Vec3& v)>& offset);

// Evaluate the trigonometric interpolant of one spatial-grid function (its
// forward transform `u_hat`, FFT index order) at an arbitrary point, together
// with derivatives for every multi-index in `alphas`. Cost O(#alphas * N^d).
void trig_eval(const cplx* u_hat, const PhaseGrid& g, const Vec3& point,
               const std::vector<MultiIndex>& alphas, double* out);

}  // namespace vpk
