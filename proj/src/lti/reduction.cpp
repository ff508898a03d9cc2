#include "roadlearn/lti/reduction.hpp"

#include "roadlearn/lti/algebra.hpp"
#include "roadlearn/lti/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace roadlearn::lti {

Gramians gramians(const StateSpace& sys) {
    if (!is_hurwitz(sys)) {
        throw std::invalid_argument("gramians: system must be Hurwitz");
    }
    return Gramians{solve_lyapunov(sys.A(), sys.B() * sys.B().transpose()),
                    solve_lyapunov(sys.A().transpose(), sys.C().transpose() * sys.C())};
}

namespace {

// Symmetric square-root factor L with L L^T = P, with negative rounding noise clipped.
Matrix psd_factor(const Matrix& P) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(P);
    const Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal();
}

}  // namespace

Vector hankel_singular_values(const StateSpace& sys) {
    const Gramians g = gramians(sys);
    const Matrix Lc = psd_factor(g.controllability);
    const Matrix Lo = psd_factor(g.observability);
    Eigen::JacobiSVD<Matrix> svd(Lo.transpose() * Lc);
    return svd.singularValues();
}

ReductionResult balanced_truncation_full(const StateSpace& sys, int r) {
    const int n = sys.n();
    if (r < 1 || r > n) {
        throw std::invalid_argument("balanced_truncation: need 1 <= r <= n");
    }
    const Gramians g = gramians(sys);
    const Matrix Lc = psd_factor(g.controllability);
    const Matrix Lo = psd_factor(g.observability);
    Eigen::JacobiSVD<Matrix> svd(Lo.transpose() * Lc, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector sv = svd.singularValues();
    const double floor = std::max(sv(0), 1e-300) * 1e-15;
    Vector scale(r);
    for (int k = 0; k < r; ++k) {
        scale(k) = 1.0 / std::sqrt(std::max(sv(k), floor));
    }
    const Matrix Tr = Lc * svd.matrixV().leftCols(r) * scale.asDiagonal();
    const Matrix Wr = Lo * svd.matrixU().leftCols(r) * scale.asDiagonal();

    ReductionResult out{StateSpace(Wr.transpose() * sys.A() * Tr, Wr.transpose() * sys.B(),
                                   sys.C() * Tr, sys.D()),
                        sv, 0.0};
    for (int k = r; k < sv.size(); ++k) {
        out.error_bound += 2.0 * sv(k);
    }
    return out;
}

StateSpace balanced_truncation(const StateSpace& sys, int r) {
    return balanced_truncation_full(sys, r).reduced;
}

namespace {

Matrix range_basis(const Matrix& P, int k) {
    Eigen::ColPivHouseholderQR<Matrix> qr(P);
    const Matrix Q = qr.householderQ();
    return Q.leftCols(k);
}

StateSpace project(const StateSpace& sys, const Matrix& Pr, int k, const Matrix& D) {
    const Matrix V = range_basis(Pr, k);
    const Matrix W = range_basis(Pr.transpose(), k);
    const Matrix E = W.transpose() * V;
    Eigen::PartialPivLU<Matrix> lu(E);
    return StateSpace(lu.solve(W.transpose() * sys.A() * V), lu.solve(W.transpose() * sys.B()),
                      sys.C() * V, D);
}

}  // namespace

SpectralSplit stable_antistable_split(const StateSpace& sys) {
    const int n = sys.n();
    int ns = 0;
    for (const auto& ev : eigenvalues(sys.A())) {
        if (ev.real() < 0.0) {
            ++ns;
        }
    }
    const Matrix zeroD = Matrix::Zero(sys.p(), sys.m());
    auto empty = [&](const Matrix& D) {
        return StateSpace(Matrix(0, 0), Matrix(0, sys.m()), Matrix(sys.p(), 0), D);
    };
    if (ns == n) {
        return {sys, empty(zeroD)};
    }
    if (ns == 0) {
        return {empty(sys.D()), StateSpace(sys.A(), sys.B(), sys.C(), zeroD)};
    }
    const Matrix S = matrix_sign(sys.A());
    const Matrix I = Matrix::Identity(n, n);
    const Matrix Ps = 0.5 * (I - S);
    const Matrix Pu = 0.5 * (I + S);
    return {project(sys, Ps, ns, sys.D()), project(sys, Pu, n - ns, zeroD)};
}

}  // namespace roadlearn::lti
