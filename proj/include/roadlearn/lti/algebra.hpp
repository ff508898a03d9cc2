#pragma once

#include "roadlearn/lti/types.hpp"

namespace roadlearn::lti {

// --- state-space interconnections -------------------------------------------

// Series connection L * R (input enters R, R's output drives L).
StateSpace ss_series(const StateSpace& L, const StateSpace& R);
StateSpace ss_add(const StateSpace& G, const StateSpace& H);
StateSpace ss_negate(const StateSpace& G);
// Inverse of a system with square invertible feedthrough D.
StateSpace ss_inverse(const StateSpace& G);
// Removes uncontrollable then unobservable states with block Arnoldi; tol is
// relative to ||A||_F (and ||B||, ||C|| for the starting blocks).
StateSpace ss_minreal(const StateSpace& G, double tol = 1e-10);
// Diagonal power-of-two state scaling that evens out row and column norms.
StateSpace ss_balance(const StateSpace& G);

// --- conversions -------------------------------------------------------------

// Real realization of a proper transfer matrix: each entry is realized as a
// cascade of first/second-order sections and entries are stacked block-diagonally.
StateSpace realize(const TransferMatrix& G);
StateSpace realize(const RationalEntry& g);
// realize() followed by ss_minreal().
StateSpace minimal_realization(const TransferMatrix& G, double tol = 1e-10);

struct TfOptions {
    double cancel_tol = 1e-10;  // relative zero/pole cancellation distance
    double check_tol = 1e-6;    // relative response mismatch that triggers DiagnosticsError
    double zero_tol = 1e-8;     // channels this far below the system response may be zeroed
    double origin_snap = 1e-10; // rounding level for multiple roots at s = 0; 0 disables
};

TransferMatrix ss_to_tf(const StateSpace& sys, const TfOptions& opts = {});

// --- transfer-matrix algebra -------------------------------------------------

TransferMatrix tf_multiply(const TransferMatrix& L, const TransferMatrix& R);
TransferMatrix tf_add(const TransferMatrix& G, const TransferMatrix& H);
TransferMatrix tf_subtract(const TransferMatrix& G, const TransferMatrix& H);

struct InverseOptions {
    double det_threshold = 1e-10;  // min|det| >= det_threshold * max|det| on the grid
    const std::vector<double>* grid = nullptr;  // defaults to analysis_grid()
};

// Throws SingularityError carrying the frequency of the smallest |det G(jw)|.
void check_invertible_on_grid(const TransferMatrix& G, const InverseOptions& opts = {});
TransferMatrix tf_inverse(const TransferMatrix& G, const InverseOptions& opts = {});

// --- products with exact origin factors -------------------------------------

// Number of zeros at exactly s = 0 shared by every nonzero entry (net of
// poles at s = 0).
int origin_zero_order(const TransferMatrix& G);

// G * (s / (s + a))^k, with exact cancellation of roots at 0 and at -a.
TransferMatrix scale_origin_order(const TransferMatrix& G, int k, double a = 1.0);

struct ChainFactor {
    const TransferMatrix* G = nullptr;
    bool inverted = false;
};

// Product of the factors (left to right, each optionally inverted). The
// scalar (s / (s + 1))^k holding each factor's common origin zeros is taken
// out first, the reduced factors are multiplied as one minimal state-space
// chain, and the net power is put back exactly. Structural zeros at the origin
// therefore cancel in exact arithmetic instead of in floating point.
TransferMatrix tf_chain(const std::vector<ChainFactor>& factors);

// Union over entries; a pole shared by several entries counts with the largest
// multiplicity it has in any single entry. Conjugate-closed and sorted.
Roots tf_poles(const TransferMatrix& G, double tol = 1e-7);

bool is_hurwitz(const StateSpace& sys, double eps_stab = 1e-9);

Roots eigenvalues(const Matrix& A);

// max_w ||G(jw) - H(jw)||_F / max(1, max_w ||G(jw)||_F)
double response_distance(const TransferMatrix& G, const TransferMatrix& H,
                         const std::vector<double>& omegas);

// Scalar polynomial helpers on root lists (real-coefficient polynomials).
Eigen::VectorXd poly_from_roots(const Roots& roots);  // monic, highest power first
Roots poly_roots(const Eigen::VectorXd& coeffs);      // highest power first

}  // namespace roadlearn::lti
