#include "roadlearn/estimator.hpp"

#include "roadlearn/lti/algebra.hpp"
#include "roadlearn/lti/linalg.hpp"
#include "roadlearn/lti/serialize.hpp"
#include "roadlearn/lti/simulate.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <stdexcept>

namespace roadlearn::estimator {

namespace {

using lti::CMatrix;
using lti::Complex;

// PBH rank test: [lambda I - A; C] (or [lambda I - A, B] when transposed) has
// full rank for every eigenvalue with non-negative real part.
bool pbh_ok(const Matrix& A, const Matrix& X, bool columns, double tol) {
    const int n = static_cast<int>(A.rows());
    const double scale = std::max(1.0, A.norm() + X.norm());
    for (const Complex lam : lti::eigenvalues(A)) {
        if (lam.real() < -tol * scale) {
            continue;
        }
        CMatrix M;
        CMatrix shifted = -A.cast<Complex>();
        shifted.diagonal().array() += lam;
        if (columns) {
            M.resize(n + X.rows(), n);
            M << shifted, X.cast<Complex>();
        } else {
            M.resize(n, n + X.cols());
            M << shifted, X.cast<Complex>();
        }
        Eigen::JacobiSVD<CMatrix> svd(M);
        if (svd.singularValues()(n - 1) <= tol * scale) {
            return false;
        }
    }
    return true;
}

Matrix reduced_a(const StateSpace& model, const EstimatorDesign& d) {
    const Matrix V2inv = d.V2.inverse();
    return model.A() - model.B() * d.Sigma_bar * model.D().transpose() * V2inv * model.C();
}

}  // namespace

double riccati_residual(const StateSpace& model, const EstimatorDesign& d, const Matrix& Q) {
    const Matrix Ar = reduced_a(model, d);
    const Matrix R = Ar * Q + Q * Ar.transpose() + d.V1 -
                     Q * model.C().transpose() * d.V2.inverse() * model.C() * Q;
    return R.norm();
}

EstimatorDesign solve_riccati(const StateSpace& model, const road::JdpParams& jdp,
                              const RiccatiOptions& opts) {
    jdp.validate();
    const int m = model.m(), p = model.p();
    if (jdp.channels() != m) {
        throw std::invalid_argument("solve_riccati: road channels must equal model inputs");
    }
    if (p != m) {
        throw std::invalid_argument(
            "solve_riccati: measurement noise intensity needs as many outputs as inputs");
    }
    if (!(opts.gamma > 0.5)) {
        throw std::invalid_argument("solve_riccati: gamma must exceed 0.5");
    }
    const Matrix& A = model.A();
    const Matrix& B = model.B();
    const Matrix& C = model.C();
    const Matrix& D = model.D();
    if (!pbh_ok(A, C, true, opts.pbh_tol)) {
        throw std::runtime_error("solve_riccati: (A, C) is not detectable (PBH test)");
    }
    if (!pbh_ok(A, B, false, opts.pbh_tol)) {
        throw std::runtime_error("solve_riccati: (A, B) is not stabilizable (PBH test)");
    }

    EstimatorDesign d;
    d.gamma = opts.gamma;
    d.Sigma_bar = jdp.sigma_bar();
    const Matrix noise = jdp.sigma_zeta * jdp.sigma_zeta.transpose();
    d.V2 = noise + D * d.Sigma_bar * D.transpose();
    Eigen::JacobiSVD<Matrix> v2svd(d.V2);
    const auto& sv = v2svd.singularValues();
    if (sv.size() == 0 || sv(sv.size() - 1) <= 1e-14 * std::max(1.0, sv(0))) {
        throw std::runtime_error("solve_riccati: V2 is singular");
    }
    const Matrix V2inv = d.V2.inverse();
    const Matrix BS = B * d.Sigma_bar;
    d.V1 = BS * B.transpose() - BS * D.transpose() * V2inv * D * BS.transpose();
    d.V1 = 0.5 * (d.V1 + d.V1.transpose()).eval();

    // Filter equation as a standard CARE in the transposed system.
    const Matrix Ar = A - BS * D.transpose() * V2inv * C;
    const double tol = opts.residual_tol * std::max(1.0, d.V1.norm());
    lti::CareResult care;
    try {
        care = lti::solve_care(Ar.transpose(), C.transpose() * V2inv * C, d.V1, 0.05 * tol);
    } catch (const lti::LtiError& e) {
        throw std::runtime_error(std::string("solve_riccati: no stabilizing solution: ") + e.what());
    }
    d.Q = care.X;
    d.riccati_residual = riccati_residual(model, d, d.Q);
    if (!(d.riccati_residual <= tol)) {
        throw std::runtime_error("solve_riccati: residual " + std::to_string(d.riccati_residual) +
                                 " above tolerance");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> qe(d.Q);
    if (qe.eigenvalues().minCoeff() < -1e-9 * std::max(1.0, d.Q.norm())) {
        throw std::runtime_error("solve_riccati: solution is not positive semi-definite");
    }
    d.F = -(d.Q * C.transpose() + BS * D.transpose()) * V2inv;
    const Matrix Acl = A + d.F * C;
    for (const auto& lam : lti::eigenvalues(Acl)) {
        if (!(lam.real() < 0.0)) {
            throw std::runtime_error("solve_riccati: A + F C is not Hurwitz");
        }
    }
    const double s = 0.5 * (1.0 + d.gamma);
    d.S_obs = s * Matrix::Identity(m, m);
    d.K_obs = (B.transpose() * B).ldlt().solve(B.transpose());
    d.bias_term = (B + d.F * D) * (jdp.lambda * jdp.mu_eta);
    return d;
}

Signal run_state_estimator(const EstimatorDesign& d, const StateSpace& model, const Signal& y) {
    if (y.channels() != model.p()) {
        throw std::invalid_argument("run_state_estimator: y must have one channel per output");
    }
    const int n = model.n(), p = model.p();
    // Constant bias enters as an extra unit input.
    Matrix Bx(n, p + 1);
    Bx << -d.F, d.bias_term;
    const StateSpace sys(model.A() + d.F * model.C(), Bx, Matrix::Identity(n, n),
                         Matrix::Zero(n, p + 1));
    Matrix u(p + 1, y.samples());
    u.topRows(p) = y.data();
    u.row(p).setOnes();
    return lti::simulate(sys, Signal(std::move(u), y.dt(), y.t0()), Vector::Zero(n));
}

Signal run_input_observer(const EstimatorDesign& d, const StateSpace& model, const Signal& x_hat) {
    if (x_hat.channels() != model.n()) {
        throw std::invalid_argument("run_input_observer: x_hat must have one channel per state");
    }
    if (!(d.gamma > 0.5)) {
        throw std::invalid_argument("run_input_observer: gamma must exceed 0.5");
    }
    const int m = model.m();
    const Matrix gS = d.gamma * d.S_obs;
    const StateSpace obs(-gS, gS * d.K_obs * model.A() + gS * gS * d.K_obs,
                         -Matrix::Identity(m, m), gS * d.K_obs);
    return lti::simulate(obs, x_hat, Vector::Zero(m));
}

StateSpace estimator_as_lti(const EstimatorDesign& d, const StateSpace& model) {
    const int n = model.n(), m = model.m(), p = model.p();
    const Matrix gS = d.gamma * d.S_obs;
    Matrix A = Matrix::Zero(n + m, n + m);
    A.topLeftCorner(n, n) = model.A() + d.F * model.C();
    A.bottomLeftCorner(m, n) = gS * d.K_obs * model.A() + gS * gS * d.K_obs;
    A.bottomRightCorner(m, m) = -gS;
    Matrix B = Matrix::Zero(n + m, p);
    B.topRows(n) = -d.F;
    Matrix C(m, n + m);
    C << gS * d.K_obs, -Matrix::Identity(m, m);
    return StateSpace(std::move(A), std::move(B), std::move(C), Matrix::Zero(m, p));
}

EstimationResult estimate_road(const EstimatorDesign& d, const StateSpace& model, const Signal& y) {
    EstimationResult r;
    r.x_hat = run_state_estimator(d, model, y);
    const Signal w_all = run_input_observer(d, model, r.x_hat);
    const Signal x_bias = run_state_estimator(d, model, Signal::zeros(y.channels(), y.samples(), y.dt(), y.t0()));
    r.w_hat_o = w_all - run_input_observer(d, model, x_bias);
    return r;
}

Matrix error_covariance(const EstimatorDesign& d, const StateSpace& model, const Matrix& F) {
    const Matrix& B = model.B();
    const Matrix& D = model.D();
    const Matrix Acl = model.A() + F * model.C();
    const Matrix BSD = B * d.Sigma_bar * D.transpose() * F.transpose();
    const Matrix N = B * d.Sigma_bar * B.transpose() + F * d.V2 * F.transpose() + BSD + BSD.transpose();
    return lti::solve_lyapunov(Acl, N);
}

double steady_state_cost(const EstimatorDesign& d, const StateSpace& model, const Matrix& F) {
    // S_obs is m x m with m < n; its scalar multiple of the identity is lifted
    // to the state dimension.
    const double s = d.S_obs(0, 0);
    return s * s * error_covariance(d, model, F).trace();
}

nlohmann::json to_json(const EstimatorDesign& d) {
    using lti::to_json;
    return nlohmann::json{{"F", to_json(d.F)},
                          {"Q", to_json(d.Q)},
                          {"Sigma_bar", to_json(d.Sigma_bar)},
                          {"V1", to_json(d.V1)},
                          {"V2", to_json(d.V2)},
                          {"gamma", d.gamma},
                          {"S_obs", to_json(d.S_obs)},
                          {"K_obs", to_json(d.K_obs)},
                          {"bias_term", to_json(Matrix(d.bias_term))},
                          {"riccati_residual", d.riccati_residual}};
}

EstimatorDesign design_from_json(const nlohmann::json& j) {
    using lti::matrix_from_json;
    EstimatorDesign d;
    d.F = matrix_from_json(j.at("F"));
    d.Q = matrix_from_json(j.at("Q"));
    d.Sigma_bar = matrix_from_json(j.at("Sigma_bar"));
    d.V1 = matrix_from_json(j.at("V1"));
    d.V2 = matrix_from_json(j.at("V2"));
    d.gamma = j.at("gamma").get<double>();
    d.S_obs = matrix_from_json(j.at("S_obs"));
    d.K_obs = matrix_from_json(j.at("K_obs"));
    d.bias_term = matrix_from_json(j.at("bias_term")).col(0);
    d.riccati_residual = j.at("riccati_residual").get<double>();
    return d;
}

}  // namespace roadlearn::estimator
