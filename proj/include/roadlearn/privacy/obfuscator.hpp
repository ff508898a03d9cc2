#pragma once

#include "roadlearn/lti/types.hpp"
#include "roadlearn/privacy/message.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace roadlearn::privacy {

using lti::Signal;
using lti::TransferMatrix;

// Region of the open left half plane from which roots are drawn.
struct RootBand {
    double re_min = -50.0;
    double re_max = -0.5;
    double im_max = 30.0;  // imaginary parts lie in [-im_max, im_max]

    void validate(const std::string& what) const;
};

struct Obfuscator {
    TransferMatrix psi_s1;  // applied to T, S (left) and e
    TransferMatrix psi_s2;  // applied to S (right); its inverse to w_f
    int n1 = 0;
    int n2 = 0;
    std::uint64_t seed = 0;

    // Identity pair, which leaves every message field unchanged.
    static Obfuscator identity();
};

class ObfuscatorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ObfuscatorOptions {
    RootBand pole_band;
    RootBand zero_band;
    double gain_min = 0.5;
    double gain_max = 2.0;
    double max_condition = 50.0;  // bound on cond(Psi(jw)) over the grid and at infinity
    int max_attempts = 100;
};

// Each matrix gets one shared pole set of size n and an independent zero set
// of size n per entry. Draws are rejected until the matrix and its inverse
// are stable and the matrix is invertible on the analysis grid.
Obfuscator generate_obfuscator(int n1, int n2, std::uint64_t seed, const ObfuscatorOptions& opts = {});

// T~ = Psi1 T, S~ = Psi1 S Psi2, e~ = Psi1 e, w_f~ = Psi2^-1 w_f.
RelayMessage obfuscate(const Obfuscator& obf, const TransferMatrix& T, const TransferMatrix& S,
                       const Signal& e, const Signal& w_f, const std::string& sender_id = "");

// Product of transfer matrices, formed as one minimal state-space chain and
// converted back once.
TransferMatrix chain_product(const std::vector<TransferMatrix>& factors);

// Psi_bar pair that makes (T_bar, S_bar) reproduce the message's T~, S~:
// Psi1_bar = T~ T_bar^-1 and Psi2_bar = S_bar^-1 T_bar T~^-1 S~. Both are
// computed from the message alone.
std::pair<TransferMatrix, TransferMatrix> construct_alternative_explanation(
    const RelayMessage& msg, const TransferMatrix& T_bar, const TransferMatrix& S_bar);

}  // namespace roadlearn::privacy
