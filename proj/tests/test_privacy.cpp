#include "doctest.h"
#include "support.hpp"

#include "roadlearn/collab.hpp"
#include "roadlearn/lti/algebra.hpp"
#include "roadlearn/lti/simulate.hpp"
#include "roadlearn/privacy/message.hpp"
#include "roadlearn/privacy/obfuscator.hpp"
#include "roadlearn/privacy/protocol.hpp"

#include <cmath>
#include <set>

using namespace roadlearn;
using namespace roadlearn::privacy;
using lti::CMatrix;
using lti::Complex;
using lti::Matrix;

namespace {

struct Fleet {
    std::vector<vehicle::VehicleInstance> vehicles;
    road::RoadRealization road;
    std::vector<std::uint64_t> noise;
};

Fleet small_fleet(int n, std::uint64_t seed, double horizon = 4.0) {
    Fleet f;
    for (int j = 0; j < n; ++j) {
        f.vehicles.push_back(vehicle::make_vehicle(j, {}, 0.1, 0.05, seed * 100 + static_cast<std::uint64_t>(j),
                                                   seed * 100 + 50 + static_cast<std::uint64_t>(j)));
        f.noise.push_back(seed * 7 + static_cast<std::uint64_t>(j));
    }
    f.road = road::generate_road(road::JdpParams{}, horizon, 1e-3, seed);
    return f;
}

collab::Sensitivities sensitivities(const vehicle::VehicleInstance& v) {
    return collab::build_sensitivities(v, estimator::solve_riccati(v.model, road::JdpParams{}));
}

bool roots_in_band(const lti::Roots& r, const RootBand& b) {
    for (const auto& z : r) {
        if (z == Complex(0.0, 0.0)) continue;  // exact origin roots are passed through
        if (z.real() < b.re_min - 1e-9 || z.real() > b.re_max + 1e-9 || std::abs(z.imag()) > b.im_max + 1e-9)
            return false;
    }
    return true;
}

double max_abs(const lti::Signal& s) { return s.data().cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("identity obfuscator leaves every field unchanged") {
    const auto v = vehicle::make_vehicle(0, {}, 0.1, 0.05, 1, 2);
    const auto sens = sensitivities(v);
    std::mt19937_64 rng(3);
    Matrix e(2, 500), w(2, 500);
    for (int i = 0; i < e.size(); ++i) {
        e.data()[i] = testsupport::uniform(rng, -1, 1);
        w.data()[i] = testsupport::uniform(rng, -1, 1);
    }
    const lti::Signal es(e, 1e-3), ws(w, 1e-3);
    const RelayMessage m = obfuscate(Obfuscator::identity(), sens.T, sens.S, es, ws, "x");
    CHECK(lti::response_distance(m.T_tilde, sens.T, lti::analysis_grid()) <= 1e-10);
    CHECK(lti::response_distance(m.S_tilde, sens.S, lti::analysis_grid()) <= 1e-10);
    CHECK((m.e_tilde.data() - e).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((m.w_f_tilde.data() - w).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(m.sender_id == "x");
}

TEST_CASE("generate_obfuscator: structure and determinism") {
    const Obfuscator a = generate_obfuscator(1, 1, 11);
    for (const auto* psi : {&a.psi_s1, &a.psi_s2}) {
        REQUIRE(psi->rows() == 2);
        REQUIRE(psi->cols() == 2);
        const lti::Roots shared = lti::normalize_roots((*psi)(0, 0).poles);
        for (const auto& e : psi->entries()) {
            CHECK(e.poles.size() == 1);
            CHECK(e.zeros.size() == 1);
            CHECK(lti::normalize_roots(e.poles) == shared);
        }
    }
    const Obfuscator b = generate_obfuscator(1, 1, 11);
    const Obfuscator c = generate_obfuscator(1, 1, 12);
    CHECK(lti::response_distance(a.psi_s1, b.psi_s1, lti::analysis_grid()) == 0.0);
    CHECK(lti::response_distance(a.psi_s1, c.psi_s1, lti::analysis_grid()) > 1e-3);
    CHECK(a.n1 == 1);
    CHECK(a.n2 == 1);
}

TEST_CASE("property: obfuscators are stable, inverse-stable, in band and well conditioned") {
    const ObfuscatorOptions opts;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const int n1 = 1 + static_cast<int>(s % 3), n2 = 1 + static_cast<int>((s / 3) % 3);
        const Obfuscator o = generate_obfuscator(n1, n2, 1000 + s, opts);
        for (const auto* psi : {&o.psi_s1, &o.psi_s2}) {
            CHECK(psi->is_stable());
            CHECK(psi->is_biproper());
            const lti::StateSpace inv = lti::ss_inverse(lti::minimal_realization(*psi));
            CHECK(lti::is_hurwitz(inv));
            double worst = 0.0;
            for (double w : lti::analysis_grid()) {
                Eigen::JacobiSVD<CMatrix> svd(psi->eval(Complex(0, w)));
                worst = std::max(worst, svd.singularValues()(0) / svd.singularValues()(1));
            }
            CHECK(worst <= opts.max_condition * (1 + 1e-9));
            for (const auto& e : psi->entries()) {
                CHECK(roots_in_band(e.poles, opts.pole_band));
                CHECK(roots_in_band(e.zeros, opts.zero_band));
            }
        }
    }
}

TEST_CASE("generate_obfuscator rejects bad orders and impossible bands") {
    CHECK_THROWS_AS(generate_obfuscator(0, 1, 1), std::invalid_argument);
    ObfuscatorOptions o;
    o.max_condition = 1.0;
    o.max_attempts = 3;
    CHECK_THROWS_AS(generate_obfuscator(2, 2, 1, o), ObfuscatorError);
}

TEST_CASE("obfuscate: formulas on the grid and e = 0 gives e~ = 0") {
    const auto v = vehicle::make_vehicle(0, {}, 0.1, 0.05, 21, 22);
    const auto sens = sensitivities(v);
    const Obfuscator o = generate_obfuscator(2, 2, 23);
    const lti::Signal z = lti::Signal::zeros(2, 1000, 1e-3);
    const RelayMessage m = obfuscate(o, sens.T, sens.S, z, z);
    CHECK(max_abs(m.e_tilde) == 0.0);
    CHECK(max_abs(m.w_f_tilde) == 0.0);
    const auto grid = lti::analysis_grid();
    CHECK(testsupport::grid_mismatch([&](Complex s) { return m.T_tilde.eval(s); },
                                     [&](Complex s) { return CMatrix(o.psi_s1.eval(s) * sens.T.eval(s)); },
                                     grid) <= 1e-8);
    CHECK(testsupport::grid_mismatch(
              [&](Complex s) { return m.S_tilde.eval(s); },
              [&](Complex s) { return CMatrix(o.psi_s1.eval(s) * sens.S.eval(s) * o.psi_s2.eval(s)); },
              grid) <= 1e-8);

    // Signals: e~ = Psi1 e and Psi2 w_f~ = w_f.
    std::mt19937_64 rng(24);
    Matrix e(2, 3000);
    for (int i = 0; i < e.size(); ++i) e.data()[i] = testsupport::uniform(rng, -1, 1);
    const lti::Signal es(e, 1e-3);
    const RelayMessage m2 = obfuscate(o, sens.T, sens.S, es, es);
    CHECK(lti::relative_l2(m2.e_tilde, lti::apply_filter(o.psi_s1, es)) <= 1e-9);
    CHECK(lti::relative_l2(lti::apply_filter(o.psi_s2, m2.w_f_tilde), es) <= 1e-6);
}

TEST_CASE("wire format round trip is exact and versioned") {
    const auto v = vehicle::make_vehicle(0, {}, 0.1, 0.05, 31, 32);
    const auto sens = sensitivities(v);
    const Obfuscator o = generate_obfuscator(2, 1, 33);
    lti::Signal e(Matrix::Random(2, 50), 1e-3);
    const RelayMessage m = obfuscate(o, sens.T, sens.S, e, e, sender_token(34));
    const RelayMessage r = deserialize(serialize(m));
    CHECK(lti::response_distance(r.T_tilde, m.T_tilde, lti::analysis_grid()) == 0.0);
    CHECK(lti::response_distance(r.S_tilde, m.S_tilde, lti::analysis_grid()) == 0.0);
    CHECK((r.e_tilde.data() - m.e_tilde.data()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.sender_id == m.sender_id);
    CHECK(serialize(r) == serialize(m));
    auto doc = to_wire(m);
    doc["type"] = "Something";
    CHECK_THROWS(from_wire(doc));
    CHECK_THROWS(deserialize("{not json"));
}

TEST_CASE("sender tokens are deterministic and distinct") {
    std::set<std::string> seen;
    for (std::uint64_t s = 0; s < 200; ++s) seen.insert(sender_token(s));
    CHECK(seen.size() == 200);
    CHECK(sender_token(5) == sender_token(5));
}

TEST_CASE("three-vehicle chain: obfuscation preserves accuracy") {
    const Fleet f = small_fleet(3, 41);
    std::vector<Obfuscator> obfs;
    for (std::uint64_t j = 0; j < 3; ++j) obfs.push_back(generate_obfuscator(2, 2, 4100 + j));
    const auto plain = collab::run_chain(f.vehicles, f.road, f.noise, {});
    const auto obf = collab::run_chain(f.vehicles, f.road, f.noise, {}, obfuscating_factory(obfs));
    const AccuracyReport rep = verify_accuracy_preservation(plain.sessions, obf.sessions, obfs, f.road.w);
    CHECK(rep.pass);
    REQUIRE(rep.vehicles.size() == 3);
    for (const auto& v : rep.vehicles) {
        CHECK(v.w_hat_distance <= 1e-4);
        CHECK(v.l1_identity <= 1e-6);
        CHECK(v.l2_identity <= 1e-6);
    }
    // The message itself differs from the plaintext one.
    CHECK(lti::relative_l2(obf.messages[0].e_tilde, plain.sessions[0].e) > 0.1);
}

TEST_CASE("alternative explanation: self case recovers the obfuscators, random case fits") {
    const auto v = vehicle::make_vehicle(0, {}, 0.1, 0.05, 51, 52);
    const auto sens = sensitivities(v);
    const Obfuscator o = generate_obfuscator(2, 2, 53);
    const lti::Signal z = lti::Signal::zeros(2, 10, 1e-3);
    const RelayMessage m = obfuscate(o, sens.T, sens.S, z, z);

    const auto [p1, p2] = construct_alternative_explanation(m, sens.T, sens.S);
    CHECK(lti::response_distance(p1, o.psi_s1, lti::analysis_grid()) <= 1e-6);
    CHECK(lti::response_distance(p2, o.psi_s2, lti::analysis_grid()) <= 1e-6);

    for (std::uint64_t k = 0; k < 5; ++k) {
        const auto other = vehicle::make_vehicle(1, {}, 0.1, 0.05, 60 + k, 70 + k);
        const auto alt = sensitivities(other);
        const auto [q1, q2] = construct_alternative_explanation(m, alt.T, alt.S);
        const ExplanationResiduals r = explanation_residuals(m, alt.T, alt.S, q1, q2);
        CHECK(r.T <= 1e-6);
        CHECK(r.S <= 1e-6);
    }
}

TEST_CASE("statistical: obfuscated error signals are far from the plaintext ones") {
    const auto v = vehicle::make_vehicle(0, {}, 0.1, 0.05, 81, 82);
    const auto sens = sensitivities(v);
    const auto rd = road::generate_road(road::JdpParams{}, 4.0, 1e-3, 83);
    const auto s = collab::run_vehicle_pass(v, rd, nullptr, 84);
    int far = 0;
    const int draws = 40;
    for (int k = 0; k < draws; ++k) {
        const Obfuscator o = generate_obfuscator(2, 2, 9000 + static_cast<std::uint64_t>(k));
        const RelayMessage m = obfuscate(o, sens.T, sens.S, s.e, s.w_f);
        far += lti::relative_l2(m.e_tilde, s.e) > 0.1 ? 1 : 0;
    }
    CHECK(far >= 38);  // at least 95%
}
