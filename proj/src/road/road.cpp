#include "roadlearn/road.hpp"

#include "roadlearn/seeding.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace roadlearn::road {

void JdpParams::validate() const {
    const int n = channels();
    if (n < 1) {
        throw std::invalid_argument("JdpParams: mu_eta must have at least one entry");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("JdpParams: lambda must be non-negative");
    }
    if (sigma_eta.rows() != n || sigma_eta.cols() != n || sigma_zeta.rows() != n ||
        sigma_zeta.cols() != n) {
        throw std::invalid_argument("JdpParams: covariance dimensions must match mu_eta");
    }
    if (!mu_eta.allFinite() || !sigma_eta.allFinite() || !sigma_zeta.allFinite()) {
        throw std::invalid_argument("JdpParams: entries must be finite");
    }
    if ((sigma_eta - sigma_eta.transpose()).norm() > 1e-12 * (1.0 + sigma_eta.norm())) {
        throw std::invalid_argument("JdpParams: sigma_eta must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma_eta);
    if (es.eigenvalues().minCoeff() < -1e-12 * (1.0 + sigma_eta.norm())) {
        throw std::invalid_argument("JdpParams: sigma_eta must be positive semi-definite");
    }
}

Matrix JdpParams::sigma_bar() const {
    return sigma_zeta * sigma_zeta.transpose() + lambda * mu_eta * mu_eta.transpose() +
           lambda * sigma_eta;
}

RoadRealization generate_road(const JdpParams& params, double horizon, double dt,
                              std::uint64_t seed) {
    params.validate();
    if (!(horizon > 0.0) || !(dt > 0.0)) {
        throw std::invalid_argument("generate_road: horizon and dt must be positive");
    }
    const int n = params.channels();
    const int N = static_cast<int>(std::llround(horizon / dt)) + 1;

    // Square root of the jump covariance (PSD, so via its eigen-decomposition).
    Eigen::SelfAdjointEigenSolver<Matrix> es(params.sigma_eta);
    const Matrix root =
        es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

    // Separate engines so the diffusion draws do not depend on the jump count.
    auto jump_rng = make_rng(derive_seed(seed, 1));
    auto diff_rng = make_rng(derive_seed(seed, 2));
    std::poisson_distribution<int> arrivals(params.lambda * dt);
    std::normal_distribution<double> nd(0.0, 1.0);

    RoadRealization out;
    out.seed = seed;
    out.params = params;
    Matrix w = Matrix::Zero(n, N);
    const double inv_sqrt_dt = 1.0 / std::sqrt(dt);
    Vector z(n);
    for (int k = 0; k < N; ++k) {
        const int count = params.lambda > 0.0 ? arrivals(jump_rng) : 0;
        for (int c = 0; c < count; ++c) {
            for (int i = 0; i < n; ++i) {
                z(i) = nd(jump_rng);
            }
            Jump j{k, params.mu_eta + root * z};
            w.col(k) += j.size / dt;
            out.jumps.push_back(std::move(j));
        }
        for (int i = 0; i < n; ++i) {
            z(i) = nd(diff_rng);
        }
        w.col(k) += params.sigma_zeta * z * inv_sqrt_dt;
    }
    out.w = Signal(std::move(w), dt);
    return out;
}

Signal road_profile(const Signal& w) {
    Matrix prof = Matrix::Zero(w.channels(), w.samples());
    const double h = 0.5 * w.dt();
    for (int k = 1; k < w.samples(); ++k) {
        prof.col(k) = prof.col(k - 1) + h * (w.data().col(k - 1) + w.data().col(k));
    }
    return Signal(std::move(prof), w.dt(), w.t0());
}

void write_csv(std::ostream& os, const RoadRealization& r) {
    os << "t";
    for (int i = 0; i < r.w.channels(); ++i) {
        os << (r.w.channels() == 2 ? (i == 0 ? ",w_l" : ",w_r") : ",w" + std::to_string(i));
    }
    os << '\n';
    char buf[64];
    for (int k = 0; k < r.w.samples(); ++k) {
        std::snprintf(buf, sizeof buf, "%.10e", r.w.time(k));
        os << buf;
        for (int i = 0; i < r.w.channels(); ++i) {
            std::snprintf(buf, sizeof buf, ",%.10e", r.w.data()(i, k));
            os << buf;
        }
        os << '\n';
    }
}

}  // namespace roadlearn::road
