#include "doctest.h"

#include "roadlearn/road.hpp"

#include <cmath>
#include <algorithm>
#include <sstream>

using namespace roadlearn::road;
using roadlearn::lti::Matrix;
using roadlearn::lti::Signal;
using roadlearn::lti::Vector;

namespace {

JdpParams diffusion_only(const Matrix& sigma) {
    JdpParams p;
    p.lambda = 0.0;
    p.sigma_zeta = sigma;
    return p;
}

}  // namespace

TEST_CASE("no jumps and no diffusion give an identically zero road") {
    JdpParams p = diffusion_only(Matrix::Zero(2, 2));
    const RoadRealization r = generate_road(p, 3.0, 1e-3, 9);
    CHECK(r.w.samples() == 3001);
    CHECK(r.w.channels() == 2);
    CHECK(r.w.data().cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.jumps.empty());
    CHECK(road_profile(r).data().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("same seed gives a bit-identical realization, different seeds differ") {
    const JdpParams p;
    const RoadRealization a = generate_road(p, 5.0, 1e-3, 42);
    const RoadRealization b = generate_road(p, 5.0, 1e-3, 42);
    const RoadRealization c = generate_road(p, 5.0, 1e-3, 43);
    CHECK((a.w.data() - b.w.data()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.jumps.size() == b.jumps.size());
    CHECK((a.w.data() - c.w.data()).norm() > 0.0);
}

TEST_CASE("pure diffusion: integrated displacement variance grows like t") {
    const JdpParams p = diffusion_only(Matrix::Identity(2, 2));
    const double dt = 1e-2;
    const int seeds = 10000;
    double s1 = 0.0, s2 = 0.0;
    for (int s = 0; s < seeds; ++s) {
        const Signal prof = road_profile(generate_road(p, 2.0, dt, static_cast<std::uint64_t>(s)));
        s1 += prof.data()(0, 100) * prof.data()(0, 100);
        s2 += prof.data()(1, 200) * prof.data()(1, 200);
    }
    CHECK(s1 / seeds == doctest::Approx(1.0).epsilon(0.10));
    CHECK(s2 / seeds == doctest::Approx(2.0).epsilon(0.10));
}

TEST_CASE("jump arrivals have Poisson mean rate lambda") {
    JdpParams p;
    p.lambda = 2.0;
    p.sigma_zeta = Matrix::Zero(2, 2);
    const double dt = 1e-2;
    const int seeds = 10000;
    double total = 0.0;
    for (int s = 0; s < seeds; ++s) {
        total += static_cast<double>(generate_road(p, 10.0, dt, static_cast<std::uint64_t>(s)).jumps.size());
    }
    // 1001 steps of Poisson(lambda dt).
    const double mean = total / seeds;
    CHECK(mean >= 19.5);
    CHECK(mean <= 20.5);
}

TEST_CASE("statistical: jump sizes and diffusion covariance match their parameters") {
    JdpParams p;
    p.lambda = 1.0;
    p.mu_eta = Vector::Constant(2, -0.05);
    p.sigma_eta = Matrix::Identity(2, 2) * 4e-4;
    Matrix sz(2, 2);
    sz << 0.2, 0.0, 0.1, 0.3;
    p.sigma_zeta = sz;
    const double dt = 1e-2;

    // Diffusion covariance from zero-jump steps: w_k sqrt(dt) ~ N(0, sz sz^T).
    Matrix cov = Matrix::Zero(2, 2);
    Vector jump_sum = Vector::Zero(2);
    int steps = 0, jumps = 0;
    for (int s = 0; s < 1000; ++s) {
        const RoadRealization r = generate_road(p, 5.0, dt, static_cast<std::uint64_t>(1000 + s));
        std::vector<bool> has_jump(static_cast<std::size_t>(r.w.samples()), false);
        for (const auto& j : r.jumps) {
            has_jump[static_cast<std::size_t>(j.step)] = true;
            jump_sum += j.size;
            ++jumps;
        }
        for (int k = 0; k < r.w.samples(); ++k) {
            if (!has_jump[static_cast<std::size_t>(k)]) {
                const Vector v = r.w.data().col(k) * std::sqrt(dt);
                cov += v * v.transpose();
                ++steps;
            }
        }
    }
    cov /= steps;
    const Matrix want = sz * sz.transpose();
    // Standard error of a sample second moment: sqrt((s_ii s_jj + s_ij^2) / n).
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double se = std::sqrt((want(i, i) * want(j, j) + want(i, j) * want(i, j)) / steps);
            CHECK(std::abs(cov(i, j) - want(i, j)) <= 3.0 * se);
        }
    }
    const Vector mean_jump = jump_sum / jumps;
    const double se = std::sqrt(4e-4 / jumps);
    CHECK(std::abs(mean_jump(0) + 0.05) <= 3.0 * se);
    CHECK(std::abs(mean_jump(1) + 0.05) <= 3.0 * se);
}

TEST_CASE("road_profile: constant rate and a single unit jump") {
    const Signal ones(Matrix::Constant(2, 2001, 1.0), 1e-3);
    const Signal prof = road_profile(ones);
    CHECK(prof.data()(0, 2000) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(prof.data()(1, 2000) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(prof.data()(0, 0) == 0.0);

    // A unit jump at t = 1 s is a pulse of height 1/dt in one sample.
    const double dt = 1e-3;
    Matrix pulse = Matrix::Zero(2, 2001);
    pulse(0, 1000) = 1.0 / dt;
    const Signal step = road_profile(Signal(pulse, dt));
    CHECK(step.data()(0, 999) == 0.0);
    CHECK(step.data()(0, 1001) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(step.data()(0, 2000) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(step.data().row(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sigma_bar matches its closed form") {
    JdpParams p;
    p.lambda = 0.7;
    p.mu_eta << -0.1, 0.02;
    p.sigma_eta << 3e-4, 1e-4, 1e-4, 5e-4;
    p.sigma_zeta << 0.02, 0.0, 0.01, 0.03;
    const Matrix s = p.sigma_bar();
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            double zz = 0.0;
            for (int k = 0; k < 2; ++k) zz += p.sigma_zeta(i, k) * p.sigma_zeta(j, k);
            const double want = zz + 0.7 * p.mu_eta(i) * p.mu_eta(j) + 0.7 * p.sigma_eta(i, j);
            CHECK(s(i, j) == doctest::Approx(want).epsilon(1e-14));
        }
    }
}

TEST_CASE("parameter and argument validation") {
    JdpParams p;
    p.lambda = -1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = JdpParams{};
    p.sigma_eta(0, 0) = -1e-3;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = JdpParams{};
    p.sigma_eta(0, 1) = 1e-4;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);  // not symmetric
    CHECK_THROWS_AS(generate_road(JdpParams{}, 0.0, 1e-3, 1), std::invalid_argument);
    CHECK_THROWS_AS(generate_road(JdpParams{}, 1.0, -1e-3, 1), std::invalid_argument);
}

TEST_CASE("write_csv: header plus one row per sample") {
    const RoadRealization r = generate_road(JdpParams{}, 0.01, 1e-3, 3);
    std::ostringstream os;
    write_csv(os, r);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,w_l,w_r");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 2);
    }
    CHECK(rows == r.w.samples());
}
