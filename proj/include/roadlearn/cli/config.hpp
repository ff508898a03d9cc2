#pragma once

#include "roadlearn/collab.hpp"
#include "roadlearn/privacy/obfuscator.hpp"
#include "roadlearn/road.hpp"
#include "roadlearn/vehicle.hpp"

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace roadlearn::cli {

// Raised for unreadable, malformed or out-of-range configuration. The message
// starts with the offending field path ("road.lambda: ...") when there is one.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FleetConfig {
    int vehicles = 10;
    double rel_sigma_fleet = 0.10;  // spread of true parameters around nominal
    double rel_sigma_model = 0.05;  // spread of each vehicle's model around its truth
    vehicle::VehicleParams nominal;
};

struct RoadConfig {
    road::JdpParams jdp;
    double horizon = 10.0;
    double dt = 1e-3;
};

struct EstimatorConfig {
    double gamma = 20.0;
    double noise_std = 0.05;
    double t_trim = 1.0;
};

struct PrivacyConfig {
    bool enabled = true;
    bool compare = false;  // also run the plaintext chain on the same seeds
    int n1 = 3;
    int n2 = 3;
    privacy::ObfuscatorOptions obfuscator;
};

struct AttackerConfig {
    bool enabled = true;
    int assumed_order = 4;
    double threshold = 0.5;
};

struct RunConfig {
    int trials = 100;
    std::uint64_t seed = 1;
    std::string output_dir = "runs";
    collab::Space mse_space = collab::Space::profile;
    int signal_trials = 1;  // leading trials that also store signal traces
    int signal_stride = 20; // keep every k-th sample of stored traces
};

struct Config {
    FleetConfig fleet;
    RoadConfig road;
    EstimatorConfig estimator;
    PrivacyConfig privacy;
    AttackerConfig attacker;
    RunConfig run;
};

// Parsed form of the text format: [section] headers followed by key = value
// lines, with numbers, true/false, "strings" and [number, ...] arrays. '#'
// starts a comment.
struct Number {
    double value = 0.0;
    std::string text;  // source spelling, so 64-bit integers survive parsing
};
using Value = std::variant<Number, bool, std::string, std::vector<double>>;
using Table = std::map<std::string, std::map<std::string, Value>>;

Table parse_table(const std::string& text);

// Defaults overlaid with the table's entries, then range-checked.
Config config_from_table(const Table& t);
Config parse_config(const std::string& text);
Config load_config(const std::string& path);

// Throws ConfigError naming the field and the violated constraint.
void validate(const Config& c);

// Every field, in the input format, so that parse_config(to_text(c)) == c.
std::string to_text(const Config& c);

}  // namespace roadlearn::cli
