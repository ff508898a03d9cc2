#include "doctest.h"
#include "support.hpp"

#include "roadlearn/lti/algebra.hpp"
#include "roadlearn/lti/linalg.hpp"
#include "roadlearn/lti/reduction.hpp"
#include "roadlearn/lti/serialize.hpp"
#include "roadlearn/lti/simulate.hpp"

#include <cmath>

using namespace roadlearn::lti;
using testsupport::grid_mismatch;
using testsupport::uniform;

namespace {

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }

RationalEntry lag(double a) { return RationalEntry({}, {Complex(-a, 0)}, 1.0); }

Signal band_limited_noise(int channels, int N, double dt, std::mt19937_64& rng) {
    // White noise through a 2nd-order low pass at 20 rad/s, simulated exactly.
    std::normal_distribution<double> nd(0.0, 1.0);
    Matrix white(channels, N);
    for (int i = 0; i < white.size(); ++i) white.data()[i] = nd(rng);
    Matrix A(2, 2), B(2, 1), C(1, 2), D(1, 1);
    A << 0, 1, -400, -28;
    B << 0, 400;
    C << 1, 0;
    D << 0;
    const StateSpace lp(A, B, C, D);
    Matrix out(channels, N);
    for (int c = 0; c < channels; ++c) {
        const Signal y = simulate(lp, Signal(white.row(c), dt), Vector::Zero(2));
        out.row(c) = y.data();
    }
    return Signal(out, dt);
}

}  // namespace

TEST_CASE("ss_to_tf: first-order lag and pure feedthrough") {
    const TransferMatrix G = ss_to_tf(StateSpace(m1(-1), m1(1), m1(1), m1(0)));
    REQUIRE(G(0, 0).poles.size() == 1);
    CHECK(G(0, 0).poles[0].real() == doctest::Approx(-1.0));
    CHECK(G(0, 0).zeros.empty());
    CHECK(G(0, 0).gain == doctest::Approx(1.0));

    const TransferMatrix H = ss_to_tf(StateSpace(m1(-1), m1(1), m1(0), m1(1)));
    CHECK(H(0, 0).poles.empty());
    CHECK(H(0, 0).zeros.empty());
    CHECK(H(0, 0).gain == doctest::Approx(1.0));
}

TEST_CASE("ss_to_tf: random 4-state 2x2 matches the direct complex solve") {
    std::mt19937_64 rng(11);
    const auto grid = log_grid(1e-2, 1e3, 50);
    for (int trial = 0; trial < 10; ++trial) {
        const StateSpace sys = testsupport::random_stable_ss(4, 2, 2, rng);
        const TransferMatrix G = ss_to_tf(sys);
        const double err = grid_mismatch([&](Complex s) { return G.eval(s); },
                                         [&](Complex s) { return sys.eval(s); }, grid);
        CHECK(err <= 1e-8);
        for (const auto& e : G.entries()) {
            CHECK(e.zeros.size() <= e.poles.size());
            CHECK(e.poles.size() <= 4);
        }
    }
}

TEST_CASE("property: tf/ss round trip for random stable systems up to order 12") {
    std::mt19937_64 rng(12);
    const auto grid = log_grid(1e-2, 1e3, 50);
    for (int n = 1; n <= 12; ++n) {
        for (int rep = 0; rep < 3; ++rep) {
            const StateSpace sys = testsupport::random_stable_ss(n, 2, 2, rng);
            const TransferMatrix G = ss_to_tf(sys);
            const double d = grid_mismatch([&](Complex s) { return G.eval(s); },
                                           [&](Complex s) { return sys.eval(s); }, grid);
            CHECK_MESSAGE(d <= 1e-8, "order ", n, " mismatch ", d);
            // realize() must reproduce the same response.
            const StateSpace back = realize(G);
            CHECK(grid_mismatch([&](Complex s) { return back.eval(s); },
                                [&](Complex s) { return sys.eval(s); }, grid) <= 1e-8);
        }
    }
}

TEST_CASE("ss_to_tf: repeated modes from a chain of identical factors") {
    std::mt19937_64 rng(13);
    const auto grid = log_grid(1e-2, 1e3, 50);
    for (int rep = 0; rep < 5; ++rep) {
        const StateSpace g = testsupport::random_stable_ss(3, 2, 2, rng);
        const StateSpace chain = ss_series(ss_series(g, g), g);  // every pole three times
        const TransferMatrix G = ss_to_tf(chain);
        CHECK(grid_mismatch([&](Complex s) { return G.eval(s); }, [&](Complex s) { return chain.eval(s); },
                            grid) <= 1e-6);
    }
}

TEST_CASE("tf_multiply") {
    SUBCASE("identity on the left returns R") {
        std::mt19937_64 rng(3);
        const TransferMatrix R = testsupport::random_biproper_2x2(rng);
        const TransferMatrix P = tf_multiply(TransferMatrix::identity(2), R);
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                REQUIRE(P(i, j).poles.size() == R(i, j).poles.size());
                REQUIRE(P(i, j).zeros.size() == R(i, j).zeros.size());
                CHECK(P(i, j).gain == doctest::Approx(R(i, j).gain));
                for (std::size_t k = 0; k < R(i, j).poles.size(); ++k) {
                    CHECK(std::abs(P(i, j).poles[k] - R(i, j).poles[k]) < 1e-12);
                }
            }
        }
    }
    SUBCASE("exact cancellation 1/(s+1) * (s+1)/(s+2) = 1/(s+2)") {
        TransferMatrix a(1, 1), b(1, 1);
        a(0, 0) = lag(1.0);
        b(0, 0) = RationalEntry({Complex(-1, 0)}, {Complex(-2, 0)}, 1.0);
        const TransferMatrix c = tf_multiply(a, b);
        REQUIRE(c(0, 0).poles.size() == 1);
        CHECK(c(0, 0).zeros.empty());
        CHECK(c(0, 0).poles[0].real() == doctest::Approx(-2.0));
        CHECK(c(0, 0).gain == doctest::Approx(1.0));
    }
    SUBCASE("random stable 2x2 products match the pointwise product") {
        std::mt19937_64 rng(4);
        const auto grid = log_grid(1e-2, 1e3, 50);
        for (int trial = 0; trial < 10; ++trial) {
            const TransferMatrix L = ss_to_tf(testsupport::random_stable_ss(3, 2, 2, rng));
            const TransferMatrix R = ss_to_tf(testsupport::random_stable_ss(4, 2, 2, rng));
            const TransferMatrix P = tf_multiply(L, R);
            const double err = grid_mismatch([&](Complex s) { return P.eval(s); },
                                             [&](Complex s) { return CMatrix(L.eval(s) * R.eval(s)); },
                                             grid);
            CHECK(err <= 1e-7);
        }
    }
    SUBCASE("dimension mismatch throws") {
        CHECK_THROWS_AS(tf_multiply(TransferMatrix(2, 3), TransferMatrix(2, 2)),
                        std::invalid_argument);
    }
}

TEST_CASE("tf_inverse") {
    SUBCASE("scalar (s+2)/(s+1) -> (s+1)/(s+2)") {
        TransferMatrix g(1, 1);
        g(0, 0) = RationalEntry({Complex(-2, 0)}, {Complex(-1, 0)}, 1.0);
        const TransferMatrix h = tf_inverse(g);
        REQUIRE(h(0, 0).zeros.size() == 1);
        REQUIRE(h(0, 0).poles.size() == 1);
        CHECK(h(0, 0).zeros[0].real() == doctest::Approx(-1.0));
        CHECK(h(0, 0).poles[0].real() == doctest::Approx(-2.0));
        CHECK(h(0, 0).gain == doctest::Approx(1.0));
    }
    SUBCASE("diagonal 1/(s+1), 1/(s+3) -> s+1, s+3 (improper, flagged)") {
        TransferMatrix g(2, 2);
        g(0, 0) = lag(1.0);
        g(1, 1) = lag(3.0);
        const TransferMatrix h = tf_inverse(g);
        CHECK_FALSE(h.is_proper());
        CHECK(h(0, 0).poles.empty());
        REQUIRE(h(0, 0).zeros.size() == 1);
        CHECK(h(0, 0).zeros[0].real() == doctest::Approx(-1.0));
        REQUIRE(h(1, 1).zeros.size() == 1);
        CHECK(h(1, 1).zeros[0].real() == doctest::Approx(-3.0));
        CHECK(h(0, 1).is_zero());
    }
    SUBCASE("property: random biproper 2x2, G * inv(G) = I to 1e-6") {
        std::mt19937_64 rng(5);
        const auto& grid = analysis_grid();
        for (int trial = 0; trial < 20; ++trial) {
            const TransferMatrix G = testsupport::random_biproper_2x2(rng);
            const TransferMatrix Gi = tf_inverse(G);
            // Oracle: pointwise complex inversion.
            const double e1 = grid_mismatch([&](Complex s) { return Gi.eval(s); },
                                            [&](Complex s) { return CMatrix(G.eval(s).inverse()); },
                                            grid);
            CHECK(e1 <= 1e-6);
            CHECK(response_distance(tf_multiply(G, Gi), TransferMatrix::identity(2), grid) <= 1e-6);
        }
    }
    SUBCASE("singular determinant reports a frequency") {
        TransferMatrix g(2, 2);
        g(0, 0) = lag(1.0);
        g(0, 1) = lag(1.0);
        g(1, 0) = lag(1.0);
        g(1, 1) = lag(1.0);
        CHECK_THROWS_AS(tf_inverse(g), SingularityError);
        // A notch on the imaginary axis at w = 5 makes det vanish there.
        TransferMatrix n(1, 1);
        n(0, 0) = RationalEntry({Complex(0, 5), Complex(0, -5)}, {Complex(-1, 0), Complex(-2, 0)}, 1.0);
        std::vector<double> grid = {1.0, 4.0, 5.0, 6.0};
        InverseOptions opts;
        opts.grid = &grid;
        try {
            tf_inverse(n, opts);
            FAIL("expected SingularityError");
        } catch (const SingularityError& e) {
            CHECK(e.omega == doctest::Approx(5.0));
        }
    }
}

TEST_CASE("tf_poles") {
    TransferMatrix g(1, 1);
    g(0, 0) = lag(1.0);
    const Roots p = tf_poles(g);
    REQUIRE(p.size() == 1);
    CHECK(p[0].real() == doctest::Approx(-1.0));

    TransferMatrix h(1, 1);
    h(0, 0) = RationalEntry({}, {Complex(-1, 1), Complex(-1, -1)}, 1.0);
    const Roots q = tf_poles(h);
    REQUIRE(q.size() == 2);
    CHECK(std::abs(q[0] - Complex(-1, -1)) < 1e-14);
    CHECK(std::abs(q[1] - Complex(-1, 1)) < 1e-14);
}

TEST_CASE("is_hurwitz") {
    Matrix A(2, 2);
    A << -1, 0, 0, -2;
    CHECK(is_hurwitz(StateSpace(A, Matrix::Zero(2, 1), Matrix::Zero(1, 2), m1(0))));
    A << 0, 1, -1, 0;
    CHECK_FALSE(is_hurwitz(StateSpace(A, Matrix::Zero(2, 1), Matrix::Zero(1, 2), m1(0))));
}

TEST_CASE("simulate") {
    const StateSpace lag1(m1(-1), m1(1), m1(1), m1(0));
    const double dt = 1e-3;
    const int N = 5001;
    SUBCASE("zero input, zero state") {
        const Signal y = simulate(lag1, Signal::zeros(1, N, dt), Vector::Zero(1));
        CHECK(y.data().cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("unit step response of 1/(s+1)") {
        const Signal y = simulate(lag1, Signal(Matrix::Ones(1, N), dt), Vector::Zero(1));
        double err = 0.0;
        for (int k = 0; k < N; ++k) {
            err = std::max(err, std::abs(y.data()(0, k) - (1.0 - std::exp(-y.time(k)))));
        }
        CHECK(err <= 1e-4);
    }
    SUBCASE("property: superposition") {
        std::mt19937_64 rng(7);
        const StateSpace sys = testsupport::random_stable_ss(5, 2, 2, rng);
        const Signal u1 = band_limited_noise(2, 2000, dt, rng);
        const Signal u2 = band_limited_noise(2, 2000, dt, rng);
        const double a = 0.7, b = -1.3;
        const Signal lhs = simulate(sys, u1.scaled(a) + u2.scaled(b), Vector::Zero(5));
        const Signal rhs = simulate(sys, u1, Vector::Zero(5)).scaled(a) +
                           simulate(sys, u2, Vector::Zero(5)).scaled(b);
        CHECK(relative_l2(lhs, rhs) <= 1e-9);
    }
    SUBCASE("divergence guard") {
        const StateSpace unstable(m1(50.0), m1(1), m1(1), m1(0));
        CHECK_THROWS_AS(simulate(unstable, Signal(Matrix::Ones(1, 2000), 1e-2), Vector::Zero(1)),
                        DivergenceError);
    }
}

TEST_CASE("apply_filter") {
    std::mt19937_64 rng(8);
    const double dt = 1e-3;
    const Signal u = band_limited_noise(2, 4000, dt, rng);
    SUBCASE("identity and scalar gain") {
        CHECK(relative_l2(apply_filter(TransferMatrix::identity(2), u), u) <= 1e-13);
        TransferMatrix two(1, 1);
        two(0, 0) = RationalEntry::constant(2.0);
        const Signal u1(u.data().row(0), dt);
        CHECK(relative_l2(apply_filter(two, u1), u1.scaled(2.0)) <= 1e-13);
    }
    SUBCASE("stable 2x2 G matches state-space simulation") {
        const StateSpace sys = testsupport::random_stable_ss(4, 2, 2, rng);
        const TransferMatrix G = ss_to_tf(sys);
        double slow = 0.0;
        for (const auto& p : eigenvalues(sys.A())) slow = std::max(slow, -1.0 / p.real());
        const Signal a = apply_filter(G, u).tail_from(3 * slow);
        const Signal b = simulate(sys, u, Vector::Zero(4)).tail_from(3 * slow);
        CHECK(relative_l2(a, b) <= 1e-3);
        // The bilinear evaluation makes the two agree far beyond that.
        CHECK(relative_l2(a, b) <= 1e-8);
    }
    SUBCASE("integrator pole is applied as an exact causal accumulator") {
        TransferMatrix integ(1, 1);
        integ(0, 0) = RationalEntry({Complex(-2, 0)}, {Complex(0, 0), Complex(-3, 0)}, 1.5);
        // Oracle: realize 1.5 (s+2)/(s(s+3)) = 1/s + 0.5/(s+3) and simulate.
        Matrix A(2, 2), B(2, 1), C(1, 2), D(1, 1);
        A << 0, 0, 0, -3;
        B << 1, 1;
        C << 1.0, 0.5;
        D << 0;
        const Signal u1(u.data().row(0), dt);
        const Signal a = apply_filter(integ, u1);
        const Signal b = simulate(StateSpace(A, B, C, D), u1, Vector::Zero(2));
        CHECK(relative_l2(a, b) <= 1e-9);
    }
    SUBCASE("double pole at the origin uses nested accumulators") {
        TransferMatrix dbl(1, 1);
        dbl(0, 0) = RationalEntry({Complex(-1, 0), Complex(-4, 0)},
                                  {Complex(0, 0), Complex(0, 0), Complex(-2, 0)}, 2.0);
        // Oracle: 2 (s+1)(s+4) / (s^2 (s+2)) = 4/s^2 + 3/s - 1/(s+2).
        Matrix A = Matrix::Zero(3, 3), B(3, 1), C(1, 3), D(1, 1);
        A(0, 1) = 1.0;
        A(2, 2) = -2.0;
        B << 0, 1, 1;
        C << 4.0, 3.0, -1.0;
        D << 0;
        const Signal u1(u.data().row(0), dt);
        const Signal a = apply_filter(dbl, u1);
        const Signal b = simulate(StateSpace(A, B, C, D), u1, Vector::Zero(3));
        CHECK(relative_l2(a, b) <= 1e-9);
    }
    SUBCASE("property: linearity") {
        const StateSpace sys = testsupport::random_stable_ss(3, 2, 2, rng);
        const TransferMatrix G = ss_to_tf(sys);
        const Signal v = band_limited_noise(2, 4000, dt, rng);
        const Signal lhs = apply_filter(G, u.scaled(2.0) + v.scaled(-0.5));
        const Signal rhs = apply_filter(G, u).scaled(2.0) + apply_filter(G, v).scaled(-0.5);
        CHECK(relative_l2(lhs, rhs) <= 1e-12);
    }
    SUBCASE("amplification guard") {
        TransferMatrix loud(1, 1);
        loud(0, 0) = RationalEntry::constant(1e9);
        CHECK_THROWS_AS(apply_filter(loud, Signal(u.data().row(0), dt)), ConditioningError);
    }
    SUBCASE("improper filter: derivative of a smooth signal") {
        TransferMatrix deriv(1, 1);
        deriv(0, 0) = RationalEntry({Complex(0, 0)}, {}, 1.0);
        Matrix x(1, 3000);
        for (int k = 0; k < 3000; ++k) x(0, k) = std::pow(std::sin(M_PI * k / 2999.0), 4);
        const Signal y = apply_filter(deriv, Signal(x, dt));
        double err = 0.0;
        for (int k = 1; k < 2999; ++k) {
            const double t = k / 2999.0;
            const double exact = 4 * std::pow(std::sin(M_PI * t), 3) * std::cos(M_PI * t) * M_PI / 2.999;
            err = std::max(err, std::abs(y.data()(0, k) - exact));
        }
        CHECK(err < 1e-3);
    }
}

TEST_CASE("balanced_truncation") {
    const auto grid = log_grid(1e-3, 1e4, 400);
    auto hinf = [&](const StateSpace& a, const StateSpace& b) {
        double e = 0.0;
        for (double w : grid) {
            e = std::max(e, (a.eval(Complex(0, w)) - b.eval(Complex(0, w))).norm());
        }
        return e;
    };
    SUBCASE("r = n is response-identical") {
        std::mt19937_64 rng(9);
        const StateSpace sys = testsupport::random_stable_ss(6, 2, 2, rng);
        CHECK(hinf(sys, balanced_truncation(sys, 6)) <= 1e-8);
    }
    SUBCASE("known balanced form with Hankel values (1, 1e-9)") {
        // Symmetric balanced realisation: A_ij = -b_i b_j / (s_i + s_j), C = B^T.
        const double s1 = 1.0, s2 = 1e-9;
        const double b1 = 1.0, b2 = 1e-4;
        Matrix A(2, 2), B(2, 1), C(1, 2), D(1, 1);
        A << -b1 * b1 / (2 * s1), -b1 * b2 / (s1 + s2), -b2 * b1 / (s1 + s2), -b2 * b2 / (2 * s2);
        B << b1, b2;
        C << b1, b2;
        D << 0;
        const StateSpace sys(A, B, C, D);
        const Vector hsv = hankel_singular_values(sys);
        CHECK(hsv(0) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(hsv(1) == doctest::Approx(1e-9).epsilon(1e-6));
        CHECK(hinf(sys, balanced_truncation(sys, 1)) <= 2e-9 * (1 + 1e-6));
    }
    SUBCASE("property: twice-the-tail bound on random systems") {
        std::mt19937_64 rng(10);
        for (int trial = 0; trial < 20; ++trial) {
            const StateSpace sys = testsupport::random_stable_ss(8, 1 + trial % 2, 2, rng);
            const ReductionResult red = balanced_truncation_full(sys, 4);
            CHECK(red.reduced.n() == 4);
            CHECK(hinf(sys, red.reduced) <= red.error_bound * (1 + 1e-6) + 1e-12);
        }
    }
    SUBCASE("unstable input is rejected") {
        const StateSpace bad(m1(1.0), m1(1), m1(1), m1(0));
        CHECK_THROWS_AS(balanced_truncation(bad, 1), std::invalid_argument);
    }
}

TEST_CASE("stable/antistable split reproduces the response") {
    Matrix A(3, 3);
    A << -1, 2, 0, 0, 0.5, 1, 0, 0, -3;
    Matrix B(3, 1), C(1, 3), D(1, 1);
    B << 1, 1, 1;
    C << 1, -1, 2;
    D << 0.3;
    const StateSpace sys(A, B, C, D);
    const SpectralSplit sp = stable_antistable_split(sys);
    CHECK(sp.stable.n() == 2);
    CHECK(sp.antistable.n() == 1);
    for (double w : {0.1, 1.0, 10.0}) {
        const Complex s(0, w);
        CHECK(std::abs((sp.stable.eval(s) + sp.antistable.eval(s) - sys.eval(s))(0, 0)) < 1e-10);
    }
    CHECK(eigenvalues(sp.antistable.A())[0].real() == doctest::Approx(0.5));
}

TEST_CASE("response_distance") {
    TransferMatrix g(1, 1), h(1, 1);
    g(0, 0) = lag(1.0);
    h(0, 0) = lag(1.1);
    const auto grid = log_grid(1e-2, 100, 200);
    CHECK(response_distance(g, g, grid) == 0.0);
    // Direct evaluation: |1/(jw+1) - 1/(jw+1.1)| peaks near DC at 1 - 1/1.1.
    const double d = response_distance(g, h, grid);
    CHECK(d > 0.0);
    CHECK(d <= 0.1);
    CHECK(d == doctest::Approx(1.0 - 1.0 / 1.1).epsilon(1e-3));
    std::mt19937_64 rng(13);
    const TransferMatrix G = ss_to_tf(testsupport::random_stable_ss(4, 2, 2, rng));
    CHECK(response_distance(G, tf_multiply(G, TransferMatrix::identity(2)), grid) <= 1e-10);
}

TEST_CASE("Lyapunov and Riccati backends") {
    std::mt19937_64 rng(14);
    const StateSpace sys = testsupport::random_stable_ss(6, 2, 2, rng);
    const Matrix Q = sys.B() * sys.B().transpose();
    const Matrix X = solve_lyapunov(sys.A(), Q);
    CHECK((sys.A() * X + X * sys.A().transpose() + Q).norm() <= 1e-10 * Q.norm());
    // Scalar CARE: -2x + 1 - x^2 = 0 -> x = sqrt(2) - 1.
    const CareResult r = solve_care(m1(-1), m1(1), m1(1), 1e-14);
    CHECK(r.X(0, 0) == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));
}

TEST_CASE("JSON round trips") {
    std::mt19937_64 rng(15);
    const StateSpace sys = testsupport::random_stable_ss(3, 2, 2, rng);
    const StateSpace sys2 = state_space_from_json(to_json(sys));
    CHECK((sys2.A() - sys.A()).norm() == 0.0);
    CHECK((sys2.D() - sys.D()).norm() == 0.0);
    const StateSpace gain = StateSpace::gain(Matrix::Ones(2, 2));
    CHECK(state_space_from_json(to_json(gain)).n() == 0);

    const TransferMatrix G = testsupport::random_biproper_2x2(rng);
    const nlohmann::json doc = document("TransferMatrix", to_json(G));
    const TransferMatrix G2 = transfer_matrix_from_json(
        document_payload(nlohmann::json::parse(doc.dump()), "TransferMatrix"));
    CHECK(response_distance(G, G2, analysis_grid()) == 0.0);
    CHECK(doc["value"]["entries"][0][0]["poles"][0].is_array());
    CHECK(doc["value"]["entries"][0][0]["poles"][0].size() == 2);

    const Signal s = band_limited_noise(2, 100, 1e-3, rng);
    const Signal s2 = signal_from_json(nlohmann::json::parse(to_json(s).dump()));
    CHECK(relative_l2(s2, s) == 0.0);

    const FrequencyResponse fr = frequency_response(G, {0.1, 1.0});
    const FrequencyResponse fr2 = frequency_response_from_json(to_json(fr));
    CHECK((fr2.values[1] - fr.values[1]).norm() == 0.0);

    CHECK_THROWS_AS(document_payload(doc, "Signal"), std::invalid_argument);
}

TEST_CASE("RationalEntry invariants") {
    CHECK_THROWS_AS(RationalEntry({Complex(-1, 1)}, {}, 1.0), std::invalid_argument);
    const RationalEntry e({Complex(-1, 1), Complex(-1, -1)}, {Complex(-1, 1), Complex(-1, -1), Complex(-2, 0)}, 3.0);
    const RationalEntry s = e.simplified();
    CHECK(s.zeros.empty());
    REQUIRE(s.poles.size() == 1);
    CHECK(std::abs(s.eval(Complex(0.5, 0.2)) - e.eval(Complex(0.5, 0.2))) < 1e-14);
}
