#pragma once

#include "roadlearn/lti/types.hpp"

namespace roadlearn::lti {

struct Gramians {
    Matrix controllability;  // A P + P A^T + B B^T = 0
    Matrix observability;    // A^T Q + Q A + C^T C = 0
};

Gramians gramians(const StateSpace& sys);
Vector hankel_singular_values(const StateSpace& sys);

struct ReductionResult {
    StateSpace reduced;
    Vector hankel;        // all Hankel singular values, descending
    double error_bound;   // 2 * sum of the discarded values
};

// Square-root balanced truncation. Requires a Hurwitz system and 1 <= r <= n.
ReductionResult balanced_truncation_full(const StateSpace& sys, int r);
StateSpace balanced_truncation(const StateSpace& sys, int r);

struct SpectralSplit {
    StateSpace stable;
    StateSpace antistable;
};

// Additive decomposition G = G_stable + G_antistable (feedthrough kept in the
// stable part) via the spectral projector of the matrix sign function.
SpectralSplit stable_antistable_split(const StateSpace& sys);

}  // namespace roadlearn::lti
