#pragma once

#include "roadlearn/collab.hpp"
#include "roadlearn/privacy/obfuscator.hpp"

#include <vector>

namespace roadlearn::privacy {

// Message factory that obfuscates vehicle j's outgoing tuple with obfs[j] and
// tags it with tokens[j] (opaque, per trial).
collab::MessageFactory obfuscating_factory(std::vector<Obfuscator> obfs,
                                           std::vector<std::string> tokens = {});

// Opaque sender token for one vehicle in one trial.
std::string sender_token(std::uint64_t seed);

struct VehicleAccuracy {
    double w_f_distance = 0.0;   // relative L2, obfuscated vs plain
    double w_hat_distance = 0.0;
    double mse_distance = 0.0;   // |MSE_obf - MSE_plain| / MSE_plain, profile space
    // Grid mismatch of L1~ against L1 Psi2 and of L2~ against L2 Psi1^-1, each
    // over the largest grid norm of the reference. Zero for the first vehicle
    // and for sessions that used the regularised update.
    double l1_identity = 0.0;
    double l2_identity = 0.0;
};

struct AccuracyReport {
    std::vector<VehicleAccuracy> vehicles;
    double signal_tol = 1e-4;
    double filter_tol = 1e-6;
    bool pass = false;
};

// obfs[j] must be the obfuscator vehicle j used for its message in the
// obfuscated chain; both chains must come from identical seeds.
AccuracyReport verify_accuracy_preservation(const std::vector<collab::VehicleSession>& plain,
                                            const std::vector<collab::VehicleSession>& obfuscated,
                                            const std::vector<Obfuscator>& obfs,
                                            const Signal& w_true, double t_trim = 1.0);

// Pointwise grid residuals of an alternative explanation, relative to the
// largest grid norms of T~ and S~.
struct ExplanationResiduals {
    double T = 0.0;
    double S = 0.0;
};
ExplanationResiduals explanation_residuals(const RelayMessage& msg, const TransferMatrix& T_bar,
                                           const TransferMatrix& S_bar, const TransferMatrix& psi1_bar,
                                           const TransferMatrix& psi2_bar,
                                           const std::vector<double>& omegas = lti::analysis_grid());

}  // namespace roadlearn::privacy
