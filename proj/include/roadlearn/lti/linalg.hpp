#pragma once

#include "roadlearn/lti/types.hpp"

namespace roadlearn::lti {

// Complex Schur form M = U T U^H with those eigenvalues for which select()
// returns true moved to the leading block. Returns the size of that block.
template <class Select>
int ordered_schur(const CMatrix& M, CMatrix& U, CMatrix& T, Select select);

// Solves A X + X A^T + Q = 0 (Bartels-Stewart on the complex Schur form).
// Throws LtiError when A and -A^T share an eigenvalue.
Matrix solve_lyapunov(const Matrix& A, const Matrix& Q);

struct CareResult {
    Matrix X;
    double residual = 0.0;  // Frobenius norm of the equation residual
    int refinement_steps = 0;
};

// Stabilising solution of A^T X + X A - X G X + Q = 0 with G = G^T >= 0,
// computed from the stable invariant subspace of the Hamiltonian and polished
// by Newton-Kleinman steps until the residual is below tol.
CareResult solve_care(const Matrix& A, const Matrix& G, const Matrix& Q, double tol);

// Matrix sign function by scaled Newton iteration; A must have no eigenvalues
// on the imaginary axis.
Matrix matrix_sign(const Matrix& A);

// ---------------------------------------------------------------------------

namespace detail {
void swap_schur_diagonal(CMatrix& T, CMatrix& U, int k);
}

template <class Select>
int ordered_schur(const CMatrix& M, CMatrix& U, CMatrix& T, Select select) {
    Eigen::ComplexSchur<CMatrix> schur(M);
    if (schur.info() != Eigen::Success) {
        throw LtiError("complex Schur decomposition failed");
    }
    U = schur.matrixU();
    T = schur.matrixT();
    const int n = static_cast<int>(T.rows());
    int placed = 0;
    for (int i = 0; i < n; ++i) {
        if (!select(T(i, i))) {
            continue;
        }
        for (int k = i - 1; k >= placed; --k) {
            detail::swap_schur_diagonal(T, U, k);
        }
        ++placed;
    }
    return placed;
}

}  // namespace roadlearn::lti
