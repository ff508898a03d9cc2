#pragma once

#include "roadlearn/lti/types.hpp"

#include <functional>

namespace roadlearn::lti {

struct SimOptions {
    double overflow_guard = 1e12;
};

struct Trajectory {
    Signal x;
    Signal y;
};

// Fixed-step implicit trapezoidal integration of x' = Ax + Bu, y = Cx + Du with
// the input interpolated linearly between samples. This is the time-domain
// counterpart of evaluating G at the bilinear frequency used by apply_filter.
Trajectory simulate_trajectory(const StateSpace& sys, const Signal& u, const Vector& x0,
                               const SimOptions& opts = {});
Signal simulate(const StateSpace& sys, const Signal& u, const Vector& x0,
                const SimOptions& opts = {});

struct FilterOptions {
    double amplification_guard = 1e8;
    double pad_time_constants = 30.0;  // zero padding, in units of the slowest time constant
    double min_pad_time = 2.0;         // seconds
    double max_pad_time = 600.0;       // seconds
    double origin_tol = 1e-6;          // |p| below this is treated as a pole at s = 0
};

// Finite-horizon filtering in the frequency domain. The input is zero-padded,
// transformed, multiplied by G evaluated at s = (2/dt)(z-1)/(z+1) on the DFT
// grid, transformed back and truncated to the input length. Poles at the
// origin (up to order 3) are split off as a Laurent polynomial in 1/s and
// applied as nested causal trapezoidal accumulators, so integrating filters
// are handled without wrap-around.
Signal apply_filter(const TransferMatrix& G, const Signal& u, const FilterOptions& opts = {});

// Same machinery for a response given pointwise. reg(s) must return the rows x
// channels response without the R/s part; s = 0 and s = infinity are passed
// as Complex(0,0) and Complex(inf,0), for which reg must return limits.
using ResponseFunction = std::function<CMatrix(Complex s)>;
Signal apply_response(const ResponseFunction& reg, const Matrix& residue, const Signal& u,
                      double pad_time, const FilterOptions& opts = {});

// Smallest integer >= n whose only prime factors are 2, 3 and 5.
std::size_t fft_size(std::size_t n);

}  // namespace roadlearn::lti
