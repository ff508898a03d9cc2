#pragma once

#include "roadlearn/estimator.hpp"
#include "roadlearn/lti/types.hpp"
#include "roadlearn/privacy/message.hpp"
#include "roadlearn/road.hpp"
#include "roadlearn/vehicle.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace roadlearn::collab {

using lti::Signal;
using lti::TransferMatrix;
using privacy::RelayMessage;
using vehicle::VehicleInstance;

struct LearningFilters {
    TransferMatrix L1;
    TransferMatrix L2;
};

struct Sensitivities {
    TransferMatrix T;  // P - Phat D P
    TransferMatrix S;  // -Phat
};

Sensitivities build_sensitivities(const VehicleInstance& v, const estimator::EstimatorDesign& d);

// L1 = S_own^-1 T_own T_prev^-1 S_prev, L2 = -S_own^-1 T_own T_prev^-1.
// Throws SingularityError when T_prev or S_own is not invertible on the grid.
LearningFilters build_filters(const TransferMatrix& T_prev, const TransferMatrix& S_prev,
                              const TransferMatrix& T_own, const TransferMatrix& S_own);

// Grid residuals of both objectives, each divided by the largest grid norm of
// T_own (first) and of S_own L2 (second).
struct FilterResiduals {
    double tracking = 0.0;  // T_own - S_own L1 S_prev^-1 T_prev
    double learning = 0.0;  // S_own L2 + S_own L1 S_prev^-1
};
FilterResiduals filter_residuals(const LearningFilters& f, const TransferMatrix& T_prev,
                                 const TransferMatrix& S_prev, const TransferMatrix& T_own,
                                 const TransferMatrix& S_own,
                                 const std::vector<double>& omegas = lti::analysis_grid());

Signal update_learning_signal(const LearningFilters& f, const Signal& w_f_prev, const Signal& e_prev);

// Tikhonov-regularised learning signal, used when T_prev cannot be inverted
// or the exact filters cannot be factored.
// Evaluates the filters pointwise with T^-1 ~ T^H (T T^H + delta I)^-1 and
// delta = (1e-6 max ||T||)^2 over the analysis grid.
Signal regularized_learning_signal(const TransferMatrix& T_prev, const TransferMatrix& S_prev,
                                   const TransferMatrix& T_own, const TransferMatrix& S_own,
                                   const Signal& w_f_prev, const Signal& e_prev);

struct PassOptions {
    double gamma = 20.0;
    double noise_std = 0.05;  // measurement noise per channel, m/s^2
    double t_trim = 1.0;      // seconds excluded from MSE
};

struct VehicleSession {
    VehicleInstance vehicle;
    estimator::EstimatorDesign design;
    TransferMatrix T;
    TransferMatrix S;
    std::optional<LearningFilters> filters;
    bool regularized = false;
    Signal y;
    Signal w_hat_o;
    Signal w_f;
    Signal w_hat;
    Signal e;
};

// Error raised inside run_vehicle_pass, tagged with the step of the pass.
class PassError : public std::runtime_error {
public:
    PassError(int step, const std::string& what)
        : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

VehicleSession run_vehicle_pass(const VehicleInstance& v, const road::RoadRealization& road,
                                const RelayMessage* incoming, std::uint64_t noise_seed,
                                const PassOptions& opts = {});

// Plaintext message (no obfuscation).
RelayMessage plain_message(const VehicleSession& s, const std::string& sender_id = "");

enum class Space { velocity, profile };

// Mean over channels and samples of the squared error; samples before t_trim
// are skipped.
double mse(const Signal& w_hat, const Signal& w_true, Space space, double t_trim = 0.0);

// Sequential pass over a fleet. make_message turns each finished session into
// what the next vehicle receives.
using MessageFactory = std::function<RelayMessage(std::size_t index, const VehicleSession&)>;

struct ChainResult {
    std::vector<VehicleSession> sessions;
    std::vector<RelayMessage> messages;  // messages[j] was sent by vehicle j
};

ChainResult run_chain(const std::vector<VehicleInstance>& fleet, const road::RoadRealization& road,
                      const std::vector<std::uint64_t>& noise_seeds, const PassOptions& opts,
                      const MessageFactory& make_message = {});

}  // namespace roadlearn::collab
