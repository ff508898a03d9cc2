#pragma once

#include "roadlearn/lti/types.hpp"
#include "roadlearn/road.hpp"

#include "json.hpp"

namespace roadlearn::estimator {

using lti::Matrix;
using lti::Signal;
using lti::StateSpace;
using lti::Vector;

struct EstimatorDesign {
    Matrix F;          // n x p estimator gain
    Matrix Q;          // n x n error covariance (filter Riccati solution)
    Matrix Sigma_bar;  // m x m road input intensity
    Matrix V1;
    Matrix V2;
    double gamma = 20.0;
    Matrix S_obs;      // 0.5 (1 + gamma) I
    Matrix K_obs;      // (B^T B)^{-1} B^T
    Vector bias_term;  // (B + F D) lambda mu_eta
    double riccati_residual = 0.0;
};

struct RiccatiOptions {
    double gamma = 20.0;
    double pbh_tol = 1e-8;
    double residual_tol = 1e-8;  // relative to max(1, ||V1||_F)
};

EstimatorDesign solve_riccati(const StateSpace& model, const road::JdpParams& jdp,
                              const RiccatiOptions& opts = {});

// Frobenius norm of the filter Riccati residual for a candidate Q.
double riccati_residual(const StateSpace& model, const EstimatorDesign& d, const Matrix& Q);

// x_hat' = A x_hat + F (C x_hat - y) + bias_term, x_hat(0) = 0.
Signal run_state_estimator(const EstimatorDesign& d, const StateSpace& model, const Signal& y);

// eps' = -g S eps + g S K A x_hat + (g S)^2 K x_hat, w_hat = -eps + g S K x_hat.
Signal run_input_observer(const EstimatorDesign& d, const StateSpace& model, const Signal& x_hat);

// Linear part of the estimator chain, y -> w_hat, with state (x_hat, eps).
StateSpace estimator_as_lti(const EstimatorDesign& d, const StateSpace& model);

struct EstimationResult {
    Signal x_hat;
    Signal w_hat_o;
};

// Runs both stages on y. w_hat_o has the response to the constant bias term
// removed, so it equals the output of estimator_as_lti driven by y.
EstimationResult estimate_road(const EstimatorDesign& d, const StateSpace& model, const Signal& y);

// Stationary error covariance of x_hat' = A x_hat + F (C x_hat - y) for an
// arbitrary gain F, and the weighted cost tr(W P) with W = S_obs^T S_obs
// lifted to the state dimension.
Matrix error_covariance(const EstimatorDesign& d, const StateSpace& model, const Matrix& F);
double steady_state_cost(const EstimatorDesign& d, const StateSpace& model, const Matrix& F);

nlohmann::json to_json(const EstimatorDesign& d);
EstimatorDesign design_from_json(const nlohmann::json& j);

}  // namespace roadlearn::estimator
