#pragma once

#include "roadlearn/lti/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace roadlearn::road {

using lti::Matrix;
using lti::Signal;
using lti::Vector;

// Jump-diffusion road velocity: w = d(eta)/dt + sigma_zeta d(zeta)/dt, with a
// compound Poisson eta (rate lambda, sizes N(mu_eta, sigma_eta)) and a
// standard Wiener zeta.
struct JdpParams {
    double lambda = 0.5;
    Vector mu_eta = Vector::Constant(2, -0.05);
    Matrix sigma_eta = Matrix::Identity(2, 2) * 0.0004;
    Matrix sigma_zeta = Matrix::Identity(2, 2) * 0.01;

    int channels() const { return static_cast<int>(mu_eta.size()); }
    void validate() const;

    // sigma_zeta sigma_zeta^T + lambda mu mu^T + lambda sigma_eta.
    Matrix sigma_bar() const;
};

struct Jump {
    int step = 0;
    Vector size;
};

struct RoadRealization {
    Signal w;
    std::uint64_t seed = 0;
    JdpParams params;
    std::vector<Jump> jumps;
};

// Samples t_k = k dt for k = 0 .. round(horizon / dt).
RoadRealization generate_road(const JdpParams& params, double horizon, double dt,
                              std::uint64_t seed);

// Cumulative trapezoidal integral of each channel, starting from zero.
Signal road_profile(const Signal& w);
inline Signal road_profile(const RoadRealization& r) { return road_profile(r.w); }

void write_csv(std::ostream& os, const RoadRealization& r);

}  // namespace roadlearn::road
