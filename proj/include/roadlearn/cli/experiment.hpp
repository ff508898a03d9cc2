#pragma once

#include "roadlearn/attacker.hpp"
#include "roadlearn/cli/config.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace roadlearn::cli {

// Downsampled traces of one trial, for the road overlay figure.
struct TrialTraces {
    double dt = 0.0;                       // spacing of the stored samples
    lti::Matrix truth;                     // 2 x K road profile
    std::vector<lti::Matrix> estimates;    // per vehicle, privacy setting of the run
    std::vector<lti::Matrix> plain;        // per vehicle, plaintext chain (compare only)
};

// Outgoing models of one vehicle, as an eavesdropper would see them, plus the
// poles the attack is scored against.
struct InterceptedModels {
    int vehicle = 0;
    std::string sender_id;
    lti::TransferMatrix T_tilde;
    lti::TransferMatrix S_tilde;
    lti::Roots true_poles;
};

struct TrialResult {
    int trial = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::vector<double> mse;           // per vehicle, configured space
    std::vector<double> mse_velocity;
    std::vector<double> mse_profile;
    std::vector<double> mse_plain;     // per vehicle, plaintext chain (compare only)
    std::vector<double> w_hat_distance;  // relative L2, privacy on vs off (compare only)
    std::vector<bool> regularized;
    std::vector<attacker::AttackRecord> attacks;
    std::vector<InterceptedModels> intercepted;
    std::optional<TrialTraces> traces;
    double seconds = 0.0;
};

struct AggregateRow {
    int vehicle = 0;  // 1-based
    double mean = 0.0;
    double std = 0.0;
    double mean_plain = 0.0;
    double std_plain = 0.0;
};

struct ExperimentReport {
    std::filesystem::path run_dir;
    Config config;
    std::vector<TrialResult> trials;  // ordered by trial index
    std::vector<AggregateRow> aggregate;
    int failed = 0;
    double failure_rate = 0.0;
    bool ok = false;  // failure rate at most 10%
};

// Seed of trial k. Only depends on (master, k), so adding trials leaves the
// earlier ones unchanged.
std::uint64_t trial_seed(std::uint64_t master, int k);

// One Monte-Carlo trial: road, fleet, chain (obfuscated and/or plain), and
// the attack on every outgoing message. Never throws; failures are recorded.
TrialResult run_trial(const Config& cfg, int k);

// Worker count from ROADLEARN_WORKERS, else the hardware concurrency. Throws
// ConfigError on a malformed value.
int worker_count();

// Runs every trial on a worker pool and writes the run directory (see
// write_run). run_dir defaults to <output_dir>/run-<UTC timestamp>.
ExperimentReport run_experiment(const Config& cfg, std::optional<std::filesystem::path> run_dir = {},
                                int workers = 0, bool quiet = false);
ExperimentReport run_experiment(const std::string& config_path);

// Mean and sample standard deviation per vehicle over successful trials.
std::vector<AggregateRow> aggregate(const std::vector<TrialResult>& trials, int vehicles,
                                    bool with_plain);

// Layout:
//   config.toml                 normalized configuration
//   trial-<k>/trial.json        MSEs, flags, attack records or the failure
//   trial-<k>/messages.json     intercepted models with their true poles
//   trial-<k>/signals.json      traces (first run.signal_trials trials)
//   aggregate.csv, attack.csv, figures/*.svg
void write_run(const ExperimentReport& rep);

// aggregate.csv body: vehicle,mean_mse,std_mse[,mean_mse_plain,std_mse_plain],
// numbers in %.10e.
std::string aggregate_csv(const std::vector<AggregateRow>& rows, bool with_plain);

nlohmann::json trial_to_json(const TrialResult& r);
TrialResult trial_from_json(const nlohmann::json& j);

// Rebuilds the report of an existing run directory from its files.
ExperimentReport load_run(const std::filesystem::path& run_dir);

// Writes aggregate.csv, attack.csv and the figures from the report.
void write_summaries(const ExperimentReport& rep);

// Re-runs the attack on every stored message of a run directory and returns
// the records, ordered by (trial, vehicle).
std::vector<attacker::AttackRecord> attack_run(const std::filesystem::path& run_dir,
                                               std::optional<int> assumed_order = {});

}  // namespace roadlearn::cli
