// roadlearn: experiment harness for collaborative road-profile estimation.
//
//   roadlearn run <config> [--out DIR] [--quiet]
//   roadlearn validate <config>
//   roadlearn attack <run-dir> [--order N]
//   roadlearn report <run-dir>
//
// Exit codes: 0 ok, 1 configuration or usage error, 2 run failure.
// ROADLEARN_WORKERS sets the number of trial workers.

#include "roadlearn/cli/config.hpp"
#include "roadlearn/cli/experiment.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

using namespace roadlearn;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRunFailure = 2;

void print_aggregate(const cli::ExperimentReport& rep) {
    const bool plain = rep.config.privacy.compare;
    std::printf("%-8s %-14s %-14s%s\n", "vehicle", "mean_mse", "std_mse", plain ? " mean_mse_plain" : "");
    for (const auto& r : rep.aggregate) {
        std::printf("%-8d %-14.6e %-14.6e", r.vehicle, r.mean, r.std);
        if (plain) {
            std::printf(" %-14.6e", r.mean_plain);
        }
        std::printf("\n");
    }
    std::printf("trials: %zu, failed: %d (%.1f%%)\n", rep.trials.size(), rep.failed, 100.0 * rep.failure_rate);
}

void print_attack_summary(const std::vector<attacker::AttackRecord>& recs, double threshold) {
    if (recs.empty()) {
        std::printf("no attack records\n");
        return;
    }
    std::vector<double> d;
    for (const auto& r : recs) {
        d.push_back(r.distance);
    }
    std::sort(d.begin(), d.end());
    const auto above = std::count_if(d.begin(), d.end(), [&](double x) { return x >= threshold; });
    std::printf("attack: %zu messages, median distance %.4g, min %.4g, %ld (%.1f%%) at or above %.4g\n",
                d.size(), d[d.size() / 2], d.front(), static_cast<long>(above),
                100.0 * static_cast<double>(above) / static_cast<double>(d.size()), threshold);
}

int cmd_validate(const std::string& path) {
    const cli::Config c = cli::load_config(path);
    std::cout << cli::to_text(c);
    return kOk;
}

int cmd_run(const std::string& path, const std::string& out, bool quiet) {
    const cli::Config c = cli::load_config(path);
    std::optional<std::filesystem::path> dir;
    if (!out.empty()) {
        dir = out;
    }
    const int workers = cli::worker_count();
    const auto rep = cli::run_experiment(c, dir, workers, quiet);
    std::printf("run directory: %s\n", rep.run_dir.string().c_str());
    print_aggregate(rep);
    std::vector<attacker::AttackRecord> recs;
    for (const auto& t : rep.trials) {
        recs.insert(recs.end(), t.attacks.begin(), t.attacks.end());
    }
    if (c.attacker.enabled) {
        print_attack_summary(recs, c.attacker.threshold);
    }
    if (!rep.ok) {
        std::fprintf(stderr, "run failed: %.1f%% of trials failed (limit 10%%)\n", 100.0 * rep.failure_rate);
        return kRunFailure;
    }
    return kOk;
}

int cmd_attack(const std::string& run_dir, int order) {
    const auto rep = cli::load_run(run_dir);
    const auto recs = cli::attack_run(run_dir, order > 0 ? std::optional<int>(order) : std::nullopt);
    std::ofstream out(std::filesystem::path(run_dir) / "attack.csv", std::ios::binary);
    attacker::write_csv_header(out);
    for (const auto& r : recs) {
        attacker::write_csv_row(out, r);
    }
    if (!out) {
        throw std::runtime_error("cannot write attack.csv");
    }
    print_attack_summary(recs, rep.config.attacker.threshold);
    return kOk;
}

int cmd_report(const std::string& run_dir) {
    const auto rep = cli::load_run(run_dir);
    cli::write_summaries(rep);
    print_aggregate(rep);
    return rep.ok ? kOk : kRunFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Collaborative road-profile estimation with obfuscated relay messages"};
    app.require_subcommand(1);

    std::string config_path, run_dir, out_dir;
    bool quiet = false;
    int order = 0;

    auto* run = app.add_subcommand("run", "run a Monte-Carlo experiment");
    run->add_option("config", config_path, "experiment config file")->required();
    run->add_option("--out", out_dir, "run directory (default: <run.output_dir>/run-<timestamp>)");
    run->add_flag("--quiet", quiet, "no per-trial progress");

    auto* val = app.add_subcommand("validate", "print the fully defaulted config or the first error");
    val->add_option("config", config_path, "experiment config file")->required();

    auto* att = app.add_subcommand("attack", "re-run the pole-inference attack on a run directory");
    att->add_option("run_dir", run_dir, "run directory")->required();
    att->add_option("--order", order, "assumed model order (default: attacker.assumed_order)");

    auto* rep = app.add_subcommand("report", "rebuild aggregate.csv, attack.csv and figures");
    rep->add_option("run_dir", run_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*run) return cmd_run(config_path, out_dir, quiet);
        if (*val) return cmd_validate(config_path);
        if (*att) return cmd_attack(run_dir, order);
        if (*rep) return cmd_report(run_dir);
    } catch (const cli::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRunFailure;
    }
    return kConfigError;
}
