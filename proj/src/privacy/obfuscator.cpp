#include "roadlearn/privacy/obfuscator.hpp"

#include "roadlearn/lti/algebra.hpp"
#include "roadlearn/lti/simulate.hpp"
#include "roadlearn/seeding.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace roadlearn::privacy {

using lti::Complex;
using lti::Matrix;
using lti::RationalEntry;
using lti::Roots;
using lti::StateSpace;

void RootBand::validate(const std::string& what) const {
    if (!(re_min < re_max) || !(re_max < 0.0)) {
        throw std::invalid_argument(what + ": real parts must satisfy re_min < re_max < 0");
    }
    if (!(im_max >= 0.0)) {
        throw std::invalid_argument(what + ": im_max must be non-negative");
    }
}

Obfuscator Obfuscator::identity() {
    Obfuscator o;
    o.psi_s1 = TransferMatrix::identity(2);
    o.psi_s2 = TransferMatrix::identity(2);
    return o;
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// n roots from the band; each remaining slot pair becomes a conjugate pair
// with probability one half.
Roots draw_roots(int n, const RootBand& band, std::mt19937_64& rng) {
    Roots r;
    while (static_cast<int>(r.size()) < n) {
        const double re = uniform(rng, band.re_min, band.re_max);
        const bool pair = static_cast<int>(r.size()) + 2 <= n && band.im_max > 0.0 &&
                          uniform(rng, 0.0, 1.0) < 0.5;
        if (pair) {
            const double im = uniform(rng, 0.0, band.im_max);
            r.emplace_back(re, im);
            r.emplace_back(re, -im);
        } else {
            r.emplace_back(re, 0.0);
        }
    }
    return r;
}

TransferMatrix draw_matrix(int n, const ObfuscatorOptions& opts, std::mt19937_64& rng) {
    const Roots poles = draw_roots(n, opts.pole_band, rng);
    TransferMatrix M(2, 2);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const Roots zeros = draw_roots(n, opts.zero_band, rng);
            const double gain =
                std::exp(uniform(rng, std::log(opts.gain_min), std::log(opts.gain_max)));
            M(i, j) = RationalEntry(zeros, poles, gain);
        }
    }
    return M;
}

double condition(const lti::CMatrix& M) {
    Eigen::JacobiSVD<lti::CMatrix> svd(M);
    const auto& sv = svd.singularValues();
    return sv(1) > 0.0 ? sv(0) / sv(1) : std::numeric_limits<double>::infinity();
}

// Bounded condition number on the grid and at infinity, grid invertibility and
// a stable inverse.
bool acceptable(const TransferMatrix& M, const ObfuscatorOptions& opts) {
    if (condition(M.at_infinity().cast<Complex>()) > opts.max_condition) {
        return false;
    }
    for (double w : lti::analysis_grid()) {
        if (condition(M.eval(Complex(0.0, w))) > opts.max_condition) {
            return false;
        }
    }
    try {
        lti::check_invertible_on_grid(M);
        return lti::is_hurwitz(lti::ss_inverse(lti::minimal_realization(M)));
    } catch (const lti::LtiError&) {
        return false;
    }
}

TransferMatrix draw_accepted(int n, const ObfuscatorOptions& opts, std::mt19937_64& rng,
                             const char* name) {
    for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
        TransferMatrix M = draw_matrix(n, opts, rng);
        if (acceptable(M, opts)) {
            return M;
        }
    }
    throw ObfuscatorError(std::string("generate_obfuscator: no invertible ") + name + " after " +
                          std::to_string(opts.max_attempts) + " attempts");
}

TransferMatrix inverse_of(const TransferMatrix& M) { return lti::tf_chain({{&M, true}}); }

}  // namespace

Obfuscator generate_obfuscator(int n1, int n2, std::uint64_t seed, const ObfuscatorOptions& opts) {
    if (n1 < 1 || n2 < 1) {
        throw std::invalid_argument("generate_obfuscator: n1 and n2 must be at least 1");
    }
    opts.pole_band.validate("pole_band");
    opts.zero_band.validate("zero_band");
    if (!(0.0 < opts.gain_min && opts.gain_min <= opts.gain_max)) {
        throw std::invalid_argument("generate_obfuscator: gains must satisfy 0 < min <= max");
    }
    auto rng = make_rng(seed);
    Obfuscator o;
    o.n1 = n1;
    o.n2 = n2;
    o.seed = seed;
    o.psi_s1 = draw_accepted(n1, opts, rng, "psi_s1");
    o.psi_s2 = draw_accepted(n2, opts, rng, "psi_s2");
    return o;
}

TransferMatrix chain_product(const std::vector<TransferMatrix>& factors) {
    if (factors.empty()) {
        throw std::invalid_argument("chain_product: no factors");
    }
    std::vector<lti::ChainFactor> chain;
    for (const auto& f : factors) {
        chain.push_back({&f, false});
    }
    return lti::tf_chain(chain);
}

RelayMessage obfuscate(const Obfuscator& obf, const TransferMatrix& T, const TransferMatrix& S,
                       const Signal& e, const Signal& w_f, const std::string& sender_id) {
    RelayMessage msg;
    msg.T_tilde = chain_product({obf.psi_s1, T});
    msg.S_tilde = chain_product({obf.psi_s1, S, obf.psi_s2});
    msg.e_tilde = lti::apply_filter(obf.psi_s1, e);
    msg.w_f_tilde = lti::apply_filter(inverse_of(obf.psi_s2), w_f);
    msg.sender_id = sender_id;
    return msg;
}

std::pair<TransferMatrix, TransferMatrix> construct_alternative_explanation(
    const RelayMessage& msg, const TransferMatrix& T_bar, const TransferMatrix& S_bar) {
    lti::check_invertible_on_grid(T_bar);
    lti::check_invertible_on_grid(S_bar);
    lti::check_invertible_on_grid(msg.T_tilde);
    const lti::ChainFactor Tt{&msg.T_tilde, false}, Tt_inv{&msg.T_tilde, true},
        St{&msg.S_tilde, false}, Tb{&T_bar, false}, Tb_inv{&T_bar, true}, Sb_inv{&S_bar, true};
    return {lti::tf_chain({Tt, Tb_inv}), lti::tf_chain({Sb_inv, Tb, Tt_inv, St})};
}

}  // namespace roadlearn::privacy
