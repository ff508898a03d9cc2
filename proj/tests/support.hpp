#pragma once

// Hand-rolled generators and oracles shared by the test binaries.

#include "roadlearn/lti/types.hpp"

#include <cmath>
#include <random>

namespace testsupport {

using namespace roadlearn::lti;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Random Hurwitz system: real modal blocks with poles in [-10, -0.2] (about a
// third complex), conjugated by a random well-conditioned similarity.
inline StateSpace random_stable_ss(int n, int m, int p, std::mt19937_64& rng) {
    Matrix A = Matrix::Zero(n, n);
    int k = 0;
    while (k < n) {
        const double re = -std::exp(uniform(rng, std::log(0.2), std::log(10.0)));
        if (k + 1 < n && uniform(rng, 0, 1) < 0.4) {
            const double im = uniform(rng, 0.5, 10.0);
            A(k, k) = re;
            A(k, k + 1) = im;
            A(k + 1, k) = -im;
            A(k + 1, k + 1) = re;
            k += 2;
        } else {
            A(k, k) = re;
            k += 1;
        }
    }
    Matrix V(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            V(i, j) = (i == j ? 1.0 : 0.0) + uniform(rng, -0.4, 0.4);
        }
    }
    A = V * A * V.inverse();
    Matrix B(n, m), C(p, n), D(p, m);
    for (int i = 0; i < B.size(); ++i) B.data()[i] = uniform(rng, -1, 1);
    for (int i = 0; i < C.size(); ++i) C.data()[i] = uniform(rng, -1, 1);
    for (int i = 0; i < D.size(); ++i) D.data()[i] = uniform(rng, -1, 1);
    return StateSpace(A, B, C, D);
}

// Random stable root list of the given degree with conjugate pairs.
inline Roots random_roots(int degree, std::mt19937_64& rng, double re_lo, double re_hi,
                          double im_max) {
    Roots r;
    while (static_cast<int>(r.size()) < degree) {
        const double re = uniform(rng, re_lo, re_hi);
        if (static_cast<int>(r.size()) + 2 <= degree && uniform(rng, 0, 1) < 0.5) {
            const double im = uniform(rng, 0.3, im_max);
            r.emplace_back(re, im);
            r.emplace_back(re, -im);
        } else {
            r.emplace_back(re, 0.0);
        }
    }
    return r;
}

// Random biproper 2x2 transfer matrix with stable poles/zeros and a
// well-conditioned high-frequency gain.
inline TransferMatrix random_biproper_2x2(std::mt19937_64& rng, int order = 2) {
    TransferMatrix G(2, 2);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double k = (i == j ? 2.0 : 0.5) * uniform(rng, 0.6, 1.4);
            G(i, j) = RationalEntry(random_roots(order, rng, -8.0, -0.5, 6.0),
                                    random_roots(order, rng, -8.0, -0.5, 6.0), k);
        }
    }
    return G;
}

// Direct pointwise oracle: max over the grid of ||F(jw) - G(jw)||_F / max ||G||_F.
template <class F, class G>
double grid_mismatch(const F& f, const G& g, const std::vector<double>& omegas) {
    double num = 0.0, den = 0.0;
    for (double w : omegas) {
        const Complex s(0.0, w);
        const CMatrix a = f(s);
        const CMatrix b = g(s);
        num = std::max(num, (a - b).norm());
        den = std::max(den, b.norm());
    }
    return den > 0.0 ? num / den : num;
}

}  // namespace testsupport
