#include "roadlearn/cli/experiment.hpp"

#include "roadlearn/cli/figures.hpp"
#include "roadlearn/lti/algebra.hpp"
#include "roadlearn/lti/serialize.hpp"
#include "roadlearn/privacy/protocol.hpp"
#include "roadlearn/seeding.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace roadlearn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kTrialStream = 0x7472;  // "tr"

lti::Matrix downsample(const lti::Signal& s, int stride) {
    const int K = (s.samples() + stride - 1) / stride;
    lti::Matrix out(s.channels(), K);
    for (int k = 0; k < K; ++k) {
        out.col(k) = s.data().col(k * stride);
    }
    return out;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + p.string());
    }
    out << text;
    if (!out) {
        throw std::runtime_error("write failed for " + p.string());
    }
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + p.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string utc_stamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

fs::path fresh_run_dir(const fs::path& root) {
    const std::string base = "run-" + utc_stamp();
    fs::path p = root / base;
    for (int i = 2; fs::exists(p); ++i) {
        p = root / (base + "-" + std::to_string(i));
    }
    return p;
}

fs::path trial_dir(const fs::path& run, int k) { return run / ("trial-" + std::to_string(k)); }

json traces_to_json(const TrialTraces& t) {
    json est = json::array(), plain = json::array();
    for (const auto& M : t.estimates) est.push_back(lti::to_json(M));
    for (const auto& M : t.plain) plain.push_back(lti::to_json(M));
    return lti::document("TrialTraces", json{{"dt", t.dt},
                                             {"truth", lti::to_json(t.truth)},
                                             {"estimates", std::move(est)},
                                             {"plain", std::move(plain)}});
}

TrialTraces traces_from_json(const json& doc) {
    const json& v = lti::document_payload(doc, "TrialTraces");
    TrialTraces t;
    t.dt = v.at("dt").get<double>();
    t.truth = lti::matrix_from_json(v.at("truth"));
    for (const auto& M : v.at("estimates")) t.estimates.push_back(lti::matrix_from_json(M));
    for (const auto& M : v.at("plain")) t.plain.push_back(lti::matrix_from_json(M));
    return t;
}

json intercepted_to_json(const std::vector<InterceptedModels>& all) {
    json arr = json::array();
    for (const auto& m : all) {
        arr.push_back(json{{"vehicle", m.vehicle},
                           {"sender_id", m.sender_id},
                           {"T_tilde", lti::to_json(m.T_tilde)},
                           {"S_tilde", lti::to_json(m.S_tilde)},
                           {"true_poles", lti::to_json(m.true_poles)}});
    }
    return lti::document("InterceptedModels", json{{"messages", std::move(arr)}});
}

std::vector<InterceptedModels> intercepted_from_json(const json& doc) {
    std::vector<InterceptedModels> out;
    for (const auto& m : lti::document_payload(doc, "InterceptedModels").at("messages")) {
        out.push_back({m.at("vehicle").get<int>(), m.at("sender_id").get<std::string>(),
                       lti::transfer_matrix_from_json(m.at("T_tilde")),
                       lti::transfer_matrix_from_json(m.at("S_tilde")),
                       lti::roots_from_json(m.at("true_poles"))});
    }
    return out;
}

// The attack needs only the models, so the signal fields carry a one-sample
// placeholder.
std::string wire_bytes(const InterceptedModels& m) {
    const lti::Signal placeholder = lti::Signal::zeros(2, 1, 1.0);
    return privacy::serialize(
        privacy::RelayMessage{m.T_tilde, m.S_tilde, placeholder, placeholder, m.sender_id});
}

std::vector<double> column_stats(const std::vector<const std::vector<double>*>& rows, int j,
                                 double& mean) {
    std::vector<double> v;
    for (const auto* r : rows) {
        v.push_back((*r)[static_cast<std::size_t>(j)]);
    }
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    return v;
}

double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) {
        return 0.0;
    }
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t master, int k) {
    return derive_seed(master, kTrialStream, static_cast<std::uint64_t>(k));
}

TrialResult run_trial(const Config& cfg, int k) {
    TrialResult r;
    r.trial = k;
    r.seed = trial_seed(cfg.run.seed, k);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const std::uint64_t s = r.seed;
        const int nv = cfg.fleet.vehicles;
        const road::RoadRealization rd =
            road::generate_road(cfg.road.jdp, cfg.road.horizon, cfg.road.dt, derive_seed(s, Stream::road));

        std::vector<vehicle::VehicleInstance> fleet;
        std::vector<std::uint64_t> noise;
        std::vector<std::string> tokens;
        for (int j = 0; j < nv; ++j) {
            const auto uj = static_cast<std::uint64_t>(j);
            fleet.push_back(vehicle::make_vehicle(j, cfg.fleet.nominal, cfg.fleet.rel_sigma_fleet,
                                                  cfg.fleet.rel_sigma_model, derive_seed(s, Stream::fleet, uj),
                                                  derive_seed(s, Stream::model, uj)));
            noise.push_back(derive_seed(s, Stream::noise, uj));
            tokens.push_back(privacy::sender_token(derive_seed(s, Stream::token, uj)));
        }
        const collab::PassOptions po{cfg.estimator.gamma, cfg.estimator.noise_std, cfg.estimator.t_trim};
        const collab::MessageFactory plain_factory = [&tokens](std::size_t i, const collab::VehicleSession& vs) {
            return collab::plain_message(vs, tokens[i]);
        };

        collab::ChainResult chain;
        std::optional<collab::ChainResult> plain;
        if (cfg.privacy.enabled) {
            std::vector<privacy::Obfuscator> obfs;
            for (int j = 0; j < nv; ++j) {
                obfs.push_back(privacy::generate_obfuscator(
                    cfg.privacy.n1, cfg.privacy.n2,
                    derive_seed(s, Stream::obfuscator, static_cast<std::uint64_t>(j)), cfg.privacy.obfuscator));
            }
            chain = collab::run_chain(fleet, rd, noise, po, privacy::obfuscating_factory(obfs, tokens));
            if (cfg.privacy.compare) {
                plain = collab::run_chain(fleet, rd, noise, po, plain_factory);
            }
        } else {
            chain = collab::run_chain(fleet, rd, noise, po, plain_factory);
        }

        const double trim = cfg.estimator.t_trim;
        for (int j = 0; j < nv; ++j) {
            const auto& ses = chain.sessions[static_cast<std::size_t>(j)];
            r.mse_velocity.push_back(collab::mse(ses.w_hat, rd.w, collab::Space::velocity, trim));
            r.mse_profile.push_back(collab::mse(ses.w_hat, rd.w, collab::Space::profile, trim));
            r.regularized.push_back(ses.regularized);
            if (cfg.privacy.compare) {
                const auto& ref = plain ? plain->sessions[static_cast<std::size_t>(j)] : ses;
                r.mse_plain.push_back(collab::mse(ref.w_hat, rd.w, cfg.run.mse_space, trim));
                r.w_hat_distance.push_back(lti::relative_l2(ses.w_hat.tail_from(trim), ref.w_hat.tail_from(trim)));
            }
        }
        r.mse = cfg.run.mse_space == collab::Space::profile ? r.mse_profile : r.mse_velocity;

        for (int j = 0; j < nv; ++j) {
            const auto& msg = chain.messages[static_cast<std::size_t>(j)];
            InterceptedModels im{j, msg.sender_id, msg.T_tilde, msg.S_tilde,
                                 lti::normalize_roots(lti::eigenvalues(fleet[static_cast<std::size_t>(j)].model.A()))};
            if (cfg.attacker.enabled) {
                attacker::AttackRecord rec;
                rec.trial = k;
                rec.vehicle = j + 1;
                rec.true_poles = im.true_poles;
                rec.inferred_poles = attacker::infer_poles_from_wire(privacy::serialize(msg), cfg.attacker.assumed_order);
                rec.distance = attacker::pole_matching_distance(rec.inferred_poles, rec.true_poles);
                r.attacks.push_back(std::move(rec));
            }
            r.intercepted.push_back(std::move(im));
        }

        if (k < cfg.run.signal_trials) {
            const int stride = cfg.run.signal_stride;
            TrialTraces tr;
            tr.dt = cfg.road.dt * stride;
            tr.truth = downsample(road::road_profile(rd.w), stride);
            for (const auto& ses : chain.sessions) tr.estimates.push_back(downsample(road::road_profile(ses.w_hat), stride));
            if (plain) {
                for (const auto& ses : plain->sessions) tr.plain.push_back(downsample(road::road_profile(ses.w_hat), stride));
            }
            r.traces = std::move(tr);
        }
        r.ok = true;
    } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
        r.mse.clear();
        r.mse_velocity.clear();
        r.mse_profile.clear();
        r.mse_plain.clear();
        r.w_hat_distance.clear();
        r.regularized.clear();
        r.attacks.clear();
        r.intercepted.clear();
        r.traces.reset();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

int worker_count() {
    if (const char* env = std::getenv("ROADLEARN_WORKERS"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (*end != '\0' || n < 1 || n > 1024) {
            throw ConfigError(std::string("ROADLEARN_WORKERS: expected an integer in [1, 1024], got '") + env + "'");
        }
        return static_cast<int>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<AggregateRow> aggregate(const std::vector<TrialResult>& trials, int vehicles, bool with_plain) {
    std::vector<const std::vector<double>*> mse, plain;
    for (const auto& t : trials) {
        if (t.ok) {
            mse.push_back(&t.mse);
            plain.push_back(&t.mse_plain);
        }
    }
    std::vector<AggregateRow> rows;
    if (mse.empty()) {
        return rows;
    }
    for (int j = 0; j < vehicles; ++j) {
        AggregateRow row;
        row.vehicle = j + 1;
        const auto v = column_stats(mse, j, row.mean);
        row.std = sample_std(v, row.mean);
        if (with_plain) {
            const auto p = column_stats(plain, j, row.mean_plain);
            row.std_plain = sample_std(p, row.mean_plain);
        }
        rows.push_back(row);
    }
    return rows;
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows, bool with_plain) {
    std::string out = with_plain ? "vehicle,mean_mse,std_mse,mean_mse_plain,std_mse_plain\n"
                                 : "vehicle,mean_mse,std_mse\n";
    char buf[160];
    for (const auto& r : rows) {
        if (with_plain) {
            std::snprintf(buf, sizeof buf, "%d,%.10e,%.10e,%.10e,%.10e\n", r.vehicle, r.mean, r.std,
                          r.mean_plain, r.std_plain);
        } else {
            std::snprintf(buf, sizeof buf, "%d,%.10e,%.10e\n", r.vehicle, r.mean, r.std);
        }
        out += buf;
    }
    return out;
}

json trial_to_json(const TrialResult& r) {
    json attacks = json::array();
    for (const auto& a : r.attacks) {
        attacks.push_back(json{{"vehicle", a.vehicle},
                               {"true_poles", lti::to_json(a.true_poles)},
                               {"inferred_poles", lti::to_json(a.inferred_poles)},
                               {"distance", a.distance}});
    }
    return lti::document("TrialResult", json{{"trial", r.trial},
                                             {"seed", r.seed},
                                             {"ok", r.ok},
                                             {"error", r.error},
                                             {"mse", r.mse},
                                             {"mse_velocity", r.mse_velocity},
                                             {"mse_profile", r.mse_profile},
                                             {"mse_plain", r.mse_plain},
                                             {"w_hat_distance", r.w_hat_distance},
                                             {"regularized", r.regularized},
                                             {"attacks", std::move(attacks)}});
}

TrialResult trial_from_json(const json& doc) {
    const json& v = lti::document_payload(doc, "TrialResult");
    TrialResult r;
    r.trial = v.at("trial").get<int>();
    r.seed = v.at("seed").get<std::uint64_t>();
    r.ok = v.at("ok").get<bool>();
    r.error = v.at("error").get<std::string>();
    r.mse = v.at("mse").get<std::vector<double>>();
    r.mse_velocity = v.at("mse_velocity").get<std::vector<double>>();
    r.mse_profile = v.at("mse_profile").get<std::vector<double>>();
    r.mse_plain = v.at("mse_plain").get<std::vector<double>>();
    r.w_hat_distance = v.at("w_hat_distance").get<std::vector<double>>();
    r.regularized = v.at("regularized").get<std::vector<bool>>();
    for (const auto& a : v.at("attacks")) {
        attacker::AttackRecord rec;
        rec.trial = r.trial;
        rec.vehicle = a.at("vehicle").get<int>();
        rec.true_poles = lti::roots_from_json(a.at("true_poles"));
        rec.inferred_poles = lti::roots_from_json(a.at("inferred_poles"));
        rec.distance = a.at("distance").get<double>();
        r.attacks.push_back(std::move(rec));
    }
    return r;
}

ExperimentReport run_experiment(const Config& cfg, std::optional<fs::path> run_dir, int workers, bool quiet) {
    validate(cfg);
    ExperimentReport rep;
    rep.config = cfg;
    rep.run_dir = run_dir ? *run_dir : fresh_run_dir(cfg.run.output_dir);
    const int n = cfg.run.trials;
    workers = std::clamp(workers > 0 ? workers : worker_count(), 1, n);

    rep.trials.resize(static_cast<std::size_t>(n));
    std::atomic<int> next{0};
    std::atomic<int> done{0};
    std::mutex log_mutex;
    auto work = [&] {
        for (int k; (k = next++) < n;) {
            rep.trials[static_cast<std::size_t>(k)] = run_trial(cfg, k);
            const int d = ++done;
            if (!quiet) {
                const auto& t = rep.trials[static_cast<std::size_t>(k)];
                std::lock_guard<std::mutex> lock(log_mutex);
                std::fprintf(stderr, "[%d/%d] trial %d %s (%.1fs)%s%s\n", d, n, k, t.ok ? "ok" : "FAILED",
                             t.seconds, t.ok ? "" : ": ", t.error.c_str());
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) {
        pool.emplace_back(work);
    }
    work();
    for (auto& t : pool) {
        t.join();
    }

    for (const auto& t : rep.trials) {
        rep.failed += t.ok ? 0 : 1;
    }
    rep.failure_rate = static_cast<double>(rep.failed) / static_cast<double>(n);
    rep.ok = rep.failure_rate <= 0.10;
    rep.aggregate = aggregate(rep.trials, cfg.fleet.vehicles, cfg.privacy.compare);
    write_run(rep);
    return rep;
}

ExperimentReport run_experiment(const std::string& config_path) {
    return run_experiment(load_config(config_path));
}

void write_run(const ExperimentReport& rep) {
    fs::create_directories(rep.run_dir);
    write_file(rep.run_dir / "config.toml", to_text(rep.config));
    for (const auto& t : rep.trials) {
        const fs::path dir = trial_dir(rep.run_dir, t.trial);
        fs::create_directories(dir);
        write_file(dir / "trial.json", trial_to_json(t).dump(1) + "\n");
        if (t.ok) {
            write_file(dir / "messages.json", intercepted_to_json(t.intercepted).dump() + "\n");
        }
        if (t.traces) {
            write_file(dir / "signals.json", traces_to_json(*t.traces).dump() + "\n");
        }
    }
    write_summaries(rep);
}

void write_summaries(const ExperimentReport& rep) {
    const bool with_plain = rep.config.privacy.compare;
    write_file(rep.run_dir / "aggregate.csv", aggregate_csv(rep.aggregate, with_plain));

    bool any_attack = false;
    std::ostringstream attack;
    attacker::write_csv_header(attack);
    for (const auto& t : rep.trials) {
        for (const auto& a : t.attacks) {
            attacker::write_csv_row(attack, a);
            any_attack = true;
        }
    }
    if (any_attack) {
        write_file(rep.run_dir / "attack.csv", attack.str());
    }

    const fs::path fig = rep.run_dir / "figures";
    fs::create_directories(fig);
    const char* space = rep.config.run.mse_space == collab::Space::profile ? "profile" : "velocity";
    if (!rep.aggregate.empty()) {
        write_file(fig / "mse_bars.svg", mse_bar_chart(rep.aggregate, with_plain, space));
    }
    for (const auto& t : rep.trials) {
        if (t.traces) {
            write_file(fig / "road_overlay.svg", road_overlay(*t.traces, t.trial));
            break;
        }
    }
    for (const auto& t : rep.trials) {
        if (!t.attacks.empty()) {
            write_file(fig / "pole_scatter.svg",
                       pole_scatter(t.attacks, rep.config.privacy.enabled, rep.config.attacker.threshold));
            break;
        }
    }
}

ExperimentReport load_run(const fs::path& run_dir) {
    if (!fs::is_regular_file(run_dir / "config.toml")) {
        throw std::runtime_error(run_dir.string() + ": not a run directory (config.toml missing)");
    }
    ExperimentReport rep;
    rep.run_dir = run_dir;
    rep.config = parse_config(read_file(run_dir / "config.toml"));
    for (int k = 0; k < rep.config.run.trials; ++k) {
        const fs::path dir = trial_dir(run_dir, k);
        TrialResult t = trial_from_json(json::parse(read_file(dir / "trial.json")));
        if (fs::is_regular_file(dir / "signals.json")) {
            t.traces = traces_from_json(json::parse(read_file(dir / "signals.json")));
        }
        rep.trials.push_back(std::move(t));
        rep.failed += rep.trials.back().ok ? 0 : 1;
    }
    rep.failure_rate = static_cast<double>(rep.failed) / static_cast<double>(rep.config.run.trials);
    rep.ok = rep.failure_rate <= 0.10;
    rep.aggregate = aggregate(rep.trials, rep.config.fleet.vehicles, rep.config.privacy.compare);
    return rep;
}

std::vector<attacker::AttackRecord> attack_run(const fs::path& run_dir, std::optional<int> assumed_order) {
    const Config cfg = parse_config(read_file(run_dir / "config.toml"));
    const int order = assumed_order.value_or(cfg.attacker.assumed_order);
    std::vector<attacker::AttackRecord> out;
    for (int k = 0; k < cfg.run.trials; ++k) {
        const fs::path p = trial_dir(run_dir, k) / "messages.json";
        if (!fs::is_regular_file(p)) {
            continue;  // failed trial
        }
        for (const auto& m : intercepted_from_json(json::parse(read_file(p)))) {
            attacker::AttackRecord rec;
            rec.trial = k;
            rec.vehicle = m.vehicle + 1;
            rec.true_poles = m.true_poles;
            rec.inferred_poles = attacker::infer_poles_from_wire(wire_bytes(m), order);
            rec.distance = attacker::pole_matching_distance(rec.inferred_poles, rec.true_poles);
            out.push_back(std::move(rec));
        }
    }
    return out;
}

}  // namespace roadlearn::cli
