#include "roadlearn/lti/linalg.hpp"

#include <cmath>

namespace roadlearn::lti {

namespace detail {

// Swaps T(k,k) and T(k+1,k+1) with a unitary rotation whose first column is
// the eigenvector of the 2x2 block for T(k+1,k+1).
void swap_schur_diagonal(CMatrix& T, CMatrix& U, int k) {
    const int n = static_cast<int>(T.rows());
    const Complex t11 = T(k, k);
    const Complex t22 = T(k + 1, k + 1);
    Complex a = T(k, k + 1);
    Complex b = t22 - t11;
    const double r = std::hypot(std::abs(a), std::abs(b));
    if (r == 0.0) {
        return;
    }
    a /= r;
    b /= r;
    Eigen::Matrix2cd G;
    G << a, -std::conj(b), b, std::conj(a);
    T.block(k, 0, 2, n) = G.adjoint() * T.block(k, 0, 2, n);
    T.block(0, k, n, 2) = T.block(0, k, n, 2) * G;
    U.block(0, k, n, 2) = U.block(0, k, n, 2) * G;
    T(k + 1, k) = 0.0;
    T(k, k) = t22;
    T(k + 1, k + 1) = t11;
}

}  // namespace detail

Matrix solve_lyapunov(const Matrix& A, const Matrix& Q) {
    const int n = static_cast<int>(A.rows());
    if (A.cols() != n || Q.rows() != n || Q.cols() != n) {
        throw std::invalid_argument("solve_lyapunov: dimension mismatch");
    }
    if (n == 0) {
        return Matrix(0, 0);
    }
    Eigen::ComplexSchur<CMatrix> schur(A.cast<Complex>());
    const CMatrix& T = schur.matrixT();
    const CMatrix& U = schur.matrixU();
    // T Y + Y T^H = -U^H Q U; column j couples to columns k > j only.
    const CMatrix Ct = -(U.adjoint() * Q.cast<Complex>() * U);
    CMatrix Y = CMatrix::Zero(n, n);
    const double scale = std::max(1.0, T.cwiseAbs().maxCoeff());
    for (int j = n - 1; j >= 0; --j) {
        CVector rhs = Ct.col(j);
        for (int k = j + 1; k < n; ++k) {
            rhs -= std::conj(T(j, k)) * Y.col(k);
        }
        CMatrix M = T;
        M.diagonal().array() += std::conj(T(j, j));
        for (int i = 0; i < n; ++i) {
            if (std::abs(M(i, i)) <= 1e-14 * scale) {
                throw LtiError("solve_lyapunov: A and -A^T share an eigenvalue");
            }
        }
        Y.col(j) = M.triangularView<Eigen::Upper>().solve(rhs);
    }
    Matrix X = (U * Y * U.adjoint()).real();
    return 0.5 * (X + X.transpose());
}

namespace {

Matrix care_residual(const Matrix& A, const Matrix& G, const Matrix& Q, const Matrix& X) {
    return A.transpose() * X + X * A - X * G * X + Q;
}

}  // namespace

CareResult solve_care(const Matrix& A, const Matrix& G, const Matrix& Q, double tol) {
    const int n = static_cast<int>(A.rows());
    if (A.cols() != n || G.rows() != n || G.cols() != n || Q.rows() != n || Q.cols() != n) {
        throw std::invalid_argument("solve_care: dimension mismatch");
    }
    Matrix H(2 * n, 2 * n);
    H << A, -G, -Q, -A.transpose();

    CMatrix U, T;
    const int stable = ordered_schur(H.cast<Complex>(), U, T,
                                     [](const Complex& z) { return z.real() < 0.0; });
    const double hscale = std::max(1.0, H.cwiseAbs().maxCoeff());
    for (int i = 0; i < 2 * n; ++i) {
        if (std::abs(T(i, i).real()) <= 1e-12 * hscale) {
            throw LtiError("solve_care: Hamiltonian has eigenvalues on the imaginary axis");
        }
    }
    if (stable != n) {
        throw LtiError("solve_care: no stabilising solution (stable subspace has wrong dimension)");
    }
    const CMatrix U11 = U.topLeftCorner(n, n);
    const CMatrix U21 = U.bottomLeftCorner(n, n);
    Eigen::FullPivLU<CMatrix> lu(U11);
    if (!lu.isInvertible()) {
        throw LtiError("solve_care: stable subspace is not a graph subspace");
    }
    Matrix X = (U21 * lu.inverse()).real();
    X = 0.5 * (X + X.transpose());

    CareResult result;
    result.residual = care_residual(A, G, Q, X).norm();
    // Newton-Kleinman polishing on the closed loop A - G X.
    for (int step = 0; step < 8 && result.residual > tol; ++step) {
        const Matrix Acl = A - G * X;
        const Matrix Xn = solve_lyapunov(Acl.transpose(), Q + X * G * X);
        const double r = care_residual(A, G, Q, Xn).norm();
        if (!(r < result.residual)) {
            break;
        }
        X = Xn;
        result.residual = r;
        result.refinement_steps = step + 1;
    }
    result.X = X;
    return result;
}

Matrix matrix_sign(const Matrix& A) {
    const int n = static_cast<int>(A.rows());
    Matrix Z = A;
    for (int it = 0; it < 100; ++it) {
        Eigen::PartialPivLU<Matrix> lu(Z);
        const double det = lu.determinant();
        if (!std::isfinite(det) || det == 0.0) {
            throw LtiError("matrix_sign: singular iterate (eigenvalue on the imaginary axis?)");
        }
        const double c = std::pow(std::abs(det), -1.0 / n);
        const Matrix Zn = 0.5 * (c * Z + lu.inverse() / c);
        const double change = (Zn - Z).norm();
        Z = Zn;
        if (change <= 1e-13 * Z.norm()) {
            // Two unscaled steps to settle quadratic convergence.
            for (int k = 0; k < 2; ++k) {
                Z = 0.5 * (Z + Z.inverse());
            }
            return Z;
        }
    }
    throw LtiError("matrix_sign: Newton iteration did not converge");
}

}  // namespace roadlearn::lti
