#include "roadlearn/attacker.hpp"

#include "roadlearn/lti/algebra.hpp"
#include "roadlearn/lti/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace roadlearn::attacker {

using lti::Complex;
using lti::Matrix;
using lti::StateSpace;

namespace {

// Poles of `sys` reduced to at most `order` states.
Roots reduced_poles(const StateSpace& sys, int order) {
    if (order <= 0 || sys.n() == 0) {
        return {};
    }
    Roots out;
    StateSpace stable = sys;
    if (!lti::is_hurwitz(sys)) {
        const lti::SpectralSplit split = lti::stable_antistable_split(sys);
        stable = split.stable;
        for (const auto& p : lti::eigenvalues(split.antistable.A())) {
            if (static_cast<int>(out.size()) < order) {
                out.push_back(p);
            }
        }
    }
    const int room = std::min(order - static_cast<int>(out.size()), stable.n());
    if (room > 0) {
        const StateSpace red =
            room < stable.n() ? lti::balanced_truncation(stable, room) : stable;
        for (const auto& p : lti::eigenvalues(red.A())) {
            out.push_back(p);
        }
    }
    return out;
}

}  // namespace

Roots infer_poles(const RelayMessage& msg, int assumed_order) {
    if (assumed_order < 1) {
        throw std::invalid_argument("infer_poles: assumed_order must be at least 1");
    }
    const StateSpace s_sys = lti::minimal_realization(msg.S_tilde);
    Roots poles = reduced_poles(s_sys, assumed_order);
    const int missing = assumed_order - static_cast<int>(poles.size());
    if (missing > 0) {
        const Roots extra = reduced_poles(lti::minimal_realization(msg.T_tilde), missing);
        poles.insert(poles.end(), extra.begin(), extra.end());
    }
    return lti::normalize_roots(poles, 1e-8);
}

Roots infer_poles_from_wire(const std::string& bytes, int assumed_order) {
    return infer_poles(privacy::deserialize(bytes), assumed_order);
}

namespace {

// Hungarian algorithm (shortest augmenting path form) on a square cost matrix;
// returns the minimum total cost.
double min_assignment(const Matrix& cost) {
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = match[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) {
                    continue;
                }
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0.0;
    for (int j = 1; j <= n; ++j) {
        total += cost(match[j] - 1, j - 1);
    }
    return total;
}

}  // namespace

double pole_matching_distance(const Roots& estimated, const Roots& truth) {
    if (estimated.empty() || truth.empty()) {
        throw std::invalid_argument("pole_matching_distance: both sets must be non-empty");
    }
    double diameter = 0.0;
    for (const auto& a : truth) {
        for (const auto& b : truth) {
            diameter = std::max(diameter, std::abs(a - b));
        }
    }
    const int n = static_cast<int>(std::max(estimated.size(), truth.size()));
    Matrix cost = Matrix::Constant(n, n, diameter);
    for (std::size_t i = 0; i < estimated.size(); ++i) {
        for (std::size_t j = 0; j < truth.size(); ++j) {
            cost(static_cast<int>(i), static_cast<int>(j)) = std::abs(estimated[i] - truth[j]);
        }
    }
    return min_assignment(cost) / n;
}

std::string format_roots(const Roots& r) {
    std::string out;
    char buf[64];
    for (std::size_t k = 0; k < r.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%s%.10e%+.10ej", k ? ";" : "", r[k].real(), r[k].imag());
        out += buf;
    }
    return out;
}

void write_csv_header(std::ostream& out) {
    out << "trial,vehicle,true_poles,inferred_poles,distance\n";
}

void write_csv_row(std::ostream& out, const AttackRecord& rec) {
    char dist[32];
    std::snprintf(dist, sizeof dist, "%.10e", rec.distance);
    out << rec.trial << ',' << rec.vehicle << ',' << format_roots(rec.true_poles) << ','
        << format_roots(rec.inferred_poles) << ',' << dist << '\n';
}

}  // namespace roadlearn::attacker
