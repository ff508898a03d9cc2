// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
// The collaborative-gain experiment dominates the runtime (minutes on one
// core); ROADLEARN_WORKERS spreads its trials over more threads.

#include "support.hpp"

#include "roadlearn/attacker.hpp"
#include "roadlearn/cli/config.hpp"
#include "roadlearn/cli/experiment.hpp"
#include "roadlearn/collab.hpp"
#include "roadlearn/estimator.hpp"
#include "roadlearn/lti/algebra.hpp"
#include "roadlearn/lti/reduction.hpp"
#include "roadlearn/privacy/obfuscator.hpp"
#include "roadlearn/privacy/protocol.hpp"
#include "roadlearn/seeding.hpp"
#include "roadlearn/vehicle.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

using namespace roadlearn;
using lti::CMatrix;
using lti::Complex;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

bool hurwitz(const lti::Matrix& A) {
    for (const auto& l : lti::eigenvalues(A))
        if (!(l.real() < 0.0)) return false;
    return true;
}

collab::Sensitivities sensitivities(const vehicle::VehicleInstance& v) {
    return collab::build_sensitivities(v, estimator::solve_riccati(v.model, road::JdpParams{}));
}

vehicle::VehicleInstance random_vehicle(std::uint64_t master, std::uint64_t k) {
    return vehicle::make_vehicle(0, {}, 0.10, 0.05, derive_seed(master, Stream::fleet, k),
                                 derive_seed(master, Stream::model, k));
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("roadlearn-acceptance-" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Outcome riccati() {
    const auto t0 = std::chrono::steady_clock::now();
    const lti::StateSpace sys = vehicle::build_half_car({});
    const auto d = estimator::solve_riccati(sys, road::JdpParams{});
    const double res = estimator::riccati_residual(sys, d, d.Q);
    const double bound = 1e-8 * std::max(1.0, d.V1.norm());
    const bool stable = hurwitz(sys.A() + d.F * sys.C());

    road::JdpParams scalar;
    scalar.lambda = 0.0;
    scalar.mu_eta = lti::Vector::Zero(1);
    scalar.sigma_eta = lti::Matrix::Zero(1, 1);
    scalar.sigma_zeta = lti::Matrix::Identity(1, 1);
    const lti::Matrix one = lti::Matrix::Identity(1, 1);
    const auto ds = estimator::solve_riccati(lti::StateSpace(-one, one, one, lti::Matrix::Zero(1, 1)), scalar);
    const double qerr = std::abs(ds.Q(0, 0) - (std::sqrt(2.0) - 1.0));
    const double secs = seconds_since(t0);
    return {res <= bound && stable && qerr <= 1e-10 && secs < 1.0,
            fmt("residual %.2e (bound %.2e), Hurwitz %s, scalar |Q - (sqrt2-1)| %.1e, %.3f s", res, bound,
                stable ? "yes" : "no", qerr, secs)};
}

Outcome filter_optimality() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    int failures = 0;
    for (std::uint64_t k = 0; k < 50; ++k) {
        try {
            const auto a = sensitivities(random_vehicle(0xF1, 2 * k));
            const auto b = sensitivities(random_vehicle(0xF1, 2 * k + 1));
            const auto f = collab::build_filters(a.T, a.S, b.T, b.S);
            const auto r = collab::filter_residuals(f, a.T, a.S, b.T, b.S);
            worst = std::max({worst, r.tracking, r.learning});
        } catch (const std::exception&) {
            ++failures;
        }
    }
    const double secs = seconds_since(t0);
    return {failures == 0 && worst <= 1e-6 && secs < 30.0,
            fmt("50 pairs on %zu-point grid, worst residual %.2e, %d failures, %.1f s", lti::analysis_grid().size(),
                worst, failures, secs)};
}

Outcome collaborative_gain() {
    const auto t0 = std::chrono::steady_clock::now();
    cli::Config cfg;  // 10 vehicles, 100 trials, 10 s at dt = 1e-3, profile space
    cfg.privacy.enabled = false;
    cfg.attacker.enabled = false;
    cfg.run.seed = 2024;
    const fs::path dir = scratch("gain");
    const auto rep = cli::run_experiment(cfg, dir, cli::worker_count(), true);
    fs::remove_all(dir);

    const int nv = cfg.fleet.vehicles;
    std::vector<const cli::TrialResult*> ok;
    for (const auto& t : rep.trials)
        if (t.ok) ok.push_back(&t);
    const double n = static_cast<double>(ok.size());
    bool monotone = ok.size() >= 2;
    double worst_t = -1e300;
    for (int j = 0; j + 1 < nv && monotone; ++j) {
        // Paired difference of consecutive vehicles over the same trials.
        double s = 0.0, s2 = 0.0;
        for (const auto* t : ok) {
            const double d = t->mse[static_cast<std::size_t>(j + 1)] - t->mse[static_cast<std::size_t>(j)];
            s += d;
            s2 += d * d;
        }
        const double mean = s / n;
        const double se = std::sqrt(std::max(0.0, (s2 - n * mean * mean) / (n - 1.0)) / n);
        worst_t = std::max(worst_t, se > 0.0 ? mean / se : (mean > 0.0 ? 1e300 : -1e300));
        monotone = mean <= 3.0 * se;
    }
    const double m1 = rep.aggregate[0].mean, m3 = rep.aggregate[2].mean;
    const bool ratio = m3 <= 0.5 * m1;
    std::string means;
    for (const auto& r : rep.aggregate) means += fmt("%s%.2e", means.empty() ? "" : " ", r.mean);
    return {rep.ok && monotone && ratio,
            fmt("%d/%zu trials ok; mean MSE by vehicle [%s]; worst paired t %.2f (limit 3); "
                "MSE3/MSE1 = %.3f (limit 0.5); %.0f s",
                static_cast<int>(ok.size()), rep.trials.size(), means.c_str(), worst_t, m3 / m1,
                seconds_since(t0))};
}

Outcome accuracy_preservation() {
    const auto t0 = std::chrono::steady_clock::now();
    const cli::Config cfg;
    double worst_w = 0.0, worst_l = 0.0;
    int failures = 0, regularized = 0;
    for (int k = 0; k < 10; ++k) {
        try {
            const std::uint64_t s = cli::trial_seed(0xACC, k);
            const auto rd = road::generate_road(cfg.road.jdp, cfg.road.horizon, cfg.road.dt, derive_seed(s, Stream::road));
            std::vector<vehicle::VehicleInstance> fleet;
            std::vector<std::uint64_t> noise;
            std::vector<privacy::Obfuscator> obfs;
            for (int j = 0; j < cfg.fleet.vehicles; ++j) {
                const auto uj = static_cast<std::uint64_t>(j);
                fleet.push_back(vehicle::make_vehicle(j, cfg.fleet.nominal, cfg.fleet.rel_sigma_fleet,
                                                      cfg.fleet.rel_sigma_model, derive_seed(s, Stream::fleet, uj),
                                                      derive_seed(s, Stream::model, uj)));
                noise.push_back(derive_seed(s, Stream::noise, uj));
                obfs.push_back(privacy::generate_obfuscator(cfg.privacy.n1, cfg.privacy.n2,
                                                            derive_seed(s, Stream::obfuscator, uj),
                                                            cfg.privacy.obfuscator));
            }
            const collab::PassOptions po{cfg.estimator.gamma, cfg.estimator.noise_std, cfg.estimator.t_trim};
            const auto plain = collab::run_chain(fleet, rd, noise, po);
            const auto obf = collab::run_chain(fleet, rd, noise, po, privacy::obfuscating_factory(obfs));
            const auto rep = privacy::verify_accuracy_preservation(plain.sessions, obf.sessions, obfs, rd.w,
                                                                   cfg.estimator.t_trim);
            for (const auto& v : rep.vehicles) {
                worst_w = std::max(worst_w, v.w_hat_distance);
                worst_l = std::max({worst_l, v.l1_identity, v.l2_identity});
            }
            for (const auto& ses : obf.sessions) regularized += ses.regularized ? 1 : 0;
        } catch (const std::exception&) {
            ++failures;
        }
    }
    return {failures == 0 && worst_w <= 1e-4 && worst_l <= 1e-6,
            fmt("10 trials x 10 vehicles, worst w_hat rel L2 %.2e (limit 1e-4), worst filter identity %.2e "
                "(limit 1e-6), %d regularised sessions, %d failures, %.0f s",
                worst_w, worst_l, regularized, failures, seconds_since(t0))};
}

Outcome alternative_explanations() {
    const auto victim = random_vehicle(0xA17, 0);
    const auto sens = sensitivities(victim);
    const auto obf = privacy::generate_obfuscator(3, 3, derive_seed(0xA17, Stream::obfuscator));
    const lti::Signal z = lti::Signal::zeros(2, 10, 1e-3);
    const auto msg = privacy::obfuscate(obf, sens.T, sens.S, z, z);
    double worst = 0.0;
    int failures = 0;
    for (std::uint64_t k = 1; k <= 20; ++k) {
        try {
            const auto alt = sensitivities(random_vehicle(derive_seed(0xA17, Stream::alternative), k));
            const auto [p1, p2] = privacy::construct_alternative_explanation(msg, alt.T, alt.S);
            const auto r = privacy::explanation_residuals(msg, alt.T, alt.S, p1, p2);
            worst = std::max({worst, r.T, r.S});
        } catch (const std::exception&) {
            ++failures;
        }
    }
    return {failures == 0 && worst <= 1e-6,
            fmt("20 alternatives, worst residual %.2e (limit 1e-6), %d failures", worst, failures)};
}

Outcome attack_failure() {
    const cli::Config cfg;
    const lti::Signal z = lti::Signal::zeros(2, 10, 1e-3);
    double baseline = 0.0;
    int hidden = 0;
    double smallest = 1e300;
    for (std::uint64_t k = 0; k < 20; ++k) {
        const auto v = random_vehicle(0xA7, k);
        const auto sens = sensitivities(v);
        const auto truth = lti::normalize_roots(lti::eigenvalues(v.model.A()));
        const auto plain = privacy::obfuscate(privacy::Obfuscator::identity(), sens.T, sens.S, z, z);
        baseline = std::max(baseline, attacker::pole_matching_distance(
                                          attacker::infer_poles_from_wire(privacy::serialize(plain), 4), truth));
        const auto obf = privacy::generate_obfuscator(cfg.privacy.n1, cfg.privacy.n2,
                                                      derive_seed(0xA7, Stream::obfuscator, k), cfg.privacy.obfuscator);
        const auto msg = privacy::obfuscate(obf, sens.T, sens.S, z, z);
        const double d = attacker::pole_matching_distance(
            attacker::infer_poles_from_wire(privacy::serialize(msg), cfg.attacker.assumed_order), truth);
        smallest = std::min(smallest, d);
        hidden += d >= 0.5 ? 1 : 0;
    }
    return {baseline <= 1e-6 && hidden >= 18,
            fmt("identity baseline worst %.2e (limit 1e-6); obfuscated >= 0.5 in %d/20 (need 18), min %.3f",
                baseline, hidden, smallest)};
}

Outcome lti_oracles() {
    std::mt19937_64 rng(0x171);
    const auto grid = lti::analysis_grid();
    double rt = 0.0, inv = 0.0, hankel_excess = -1e300;
    int failures = 0;
    for (int k = 0; k < 50; ++k) {
        try {
            const int n = 2 + k % 9;
            const lti::StateSpace sys = testsupport::random_stable_ss(n, 2, 2, rng);
            const lti::TransferMatrix G = lti::ss_to_tf(sys);
            const lti::StateSpace back = lti::realize(G);
            rt = std::max(rt, testsupport::grid_mismatch([&](Complex s) { return back.eval(s); },
                                                         [&](Complex s) { return sys.eval(s); }, grid));

            const lti::TransferMatrix B = testsupport::random_biproper_2x2(rng, 1 + k % 3);
            const lti::TransferMatrix I = lti::tf_multiply(B, lti::tf_inverse(B));
            for (double w : grid)
                inv = std::max(inv, (I.eval(Complex(0, w)) - CMatrix::Identity(2, 2)).norm());

            const lti::StateSpace big = testsupport::random_stable_ss(8, 1 + k % 2, 2, rng);
            const auto red = lti::balanced_truncation_full(big, 4);
            double err = 0.0;
            for (double w : lti::log_grid(1e-3, 1e4, 400))
                err = std::max(err, (big.eval(Complex(0, w)) - red.reduced.eval(Complex(0, w))).norm());
            hankel_excess = std::max(hankel_excess, err - red.error_bound * (1 + 1e-6) - 1e-12);
        } catch (const std::exception&) {
            ++failures;
        }
    }
    return {failures == 0 && rt <= 1e-8 && inv <= 1e-6 && hankel_excess <= 0.0,
            fmt("50 systems: round trip %.2e (limit 1e-8), |G G^-1 - I| %.2e (limit 1e-6), "
                "Hankel bound %s, %d failures",
                rt, inv, hankel_excess <= 0.0 ? "holds" : "violated", failures)};
}

Outcome reproducibility() {
    cli::Config cfg;
    cfg.fleet.vehicles = 3;
    cfg.road.horizon = 3.0;
    cfg.privacy.compare = true;
    cfg.run.trials = 3;
    cfg.run.seed = 8;
    const fs::path a = scratch("repro-a"), b = scratch("repro-b");
    (void)cli::run_experiment(cfg, a, 1, true);
    (void)cli::run_experiment(cfg, b, cli::worker_count(), true);
    const std::string x = slurp(a / "aggregate.csv"), y = slurp(b / "aggregate.csv");
    fs::remove_all(a);
    fs::remove_all(b);
    return {!x.empty() && x == y, fmt("two runs, %zu bytes each, %s", x.size(), x == y ? "identical" : "differ")};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"Riccati correctness", riccati},
        {"filter optimality", filter_optimality},
        {"collaborative gain", collaborative_gain},
        {"accuracy preserved under obfuscation", accuracy_preservation},
        {"alternative explanations", alternative_explanations},
        {"attack failure", attack_failure},
        {"LTI core oracles", lti_oracles},
        {"reproducibility", reproducibility},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
