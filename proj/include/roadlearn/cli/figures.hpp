#pragma once

#include "roadlearn/cli/experiment.hpp"

#include <string>
#include <vector>

namespace roadlearn::cli {

// Static SVG documents for the run directory's figures/ folder.

// Mean MSE per vehicle with one-standard-deviation whiskers on a log axis.
// With with_plain, each vehicle gets a second bar for the plaintext chain.
std::string mse_bar_chart(const std::vector<AggregateRow>& rows, bool with_plain,
                          const std::string& space);

// True road profile against the estimates of the first, third and last
// vehicle, one panel per wheel track.
std::string road_overlay(const TrialTraces& traces, int trial);

// True and inferred poles of every vehicle in one trial, in the complex plane.
std::string pole_scatter(const std::vector<attacker::AttackRecord>& records, bool obfuscated,
                         double threshold);

}  // namespace roadlearn::cli
