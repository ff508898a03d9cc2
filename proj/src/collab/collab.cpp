#include "roadlearn/collab.hpp"

#include "roadlearn/lti/algebra.hpp"
#include "roadlearn/lti/simulate.hpp"
#include "roadlearn/seeding.hpp"

#include <Eigen/LU>

#include <cmath>

namespace roadlearn::collab {

using lti::CMatrix;
using lti::Complex;
using lti::Matrix;
using lti::StateSpace;

namespace {

double grid_peak(const TransferMatrix& G, const std::vector<double>& omegas) {
    double peak = 0.0;
    for (double w : omegas) {
        peak = std::max(peak, G.eval(Complex(0.0, w)).norm());
    }
    return peak;
}

}  // namespace

Sensitivities build_sensitivities(const VehicleInstance& v, const estimator::EstimatorDesign& d) {
    const StateSpace Dj = estimator::estimator_as_lti(d, v.model);
    const StateSpace chain = lti::ss_series(lti::ss_series(v.model, Dj), v.plant);
    const StateSpace T = lti::ss_add(v.plant, lti::ss_negate(chain));
    return Sensitivities{lti::ss_to_tf(lti::ss_minreal(T)), -lti::ss_to_tf(v.model)};
}

LearningFilters build_filters(const TransferMatrix& T_prev, const TransferMatrix& S_prev,
                              const TransferMatrix& T_own, const TransferMatrix& S_own) {
    lti::check_invertible_on_grid(T_prev);
    lti::check_invertible_on_grid(S_own);
    const lti::ChainFactor s_own_inv{&S_own, true}, t_own{&T_own, false}, t_prev_inv{&T_prev, true},
        s_prev{&S_prev, false};
    const TransferMatrix common = lti::tf_chain({s_own_inv, t_own, t_prev_inv});
    return LearningFilters{lti::tf_chain({s_own_inv, t_own, t_prev_inv, s_prev}), -common};
}

FilterResiduals filter_residuals(const LearningFilters& f, const TransferMatrix& T_prev,
                                 const TransferMatrix& S_prev, const TransferMatrix& T_own,
                                 const TransferMatrix& S_own, const std::vector<double>& omegas) {
    double track = 0.0, learn = 0.0, tscale = 0.0, lscale = 0.0;
    for (double w : omegas) {
        const Complex s(0.0, w);
        const CMatrix Tp = T_prev.eval(s), Sp = S_prev.eval(s), To = T_own.eval(s),
                      So = S_own.eval(s);
        const CMatrix L1 = f.L1.eval(s), L2 = f.L2.eval(s);
        const CMatrix SpInv = Sp.inverse();
        track = std::max(track, (To - So * L1 * SpInv * Tp).norm());
        learn = std::max(learn, (So * L2 + So * L1 * SpInv).norm());
        tscale = std::max(tscale, To.norm());
        lscale = std::max(lscale, (So * L2).norm());
    }
    return FilterResiduals{tscale > 0 ? track / tscale : track, lscale > 0 ? learn / lscale : learn};
}

Signal update_learning_signal(const LearningFilters& f, const Signal& w_f_prev, const Signal& e_prev) {
    if (!w_f_prev.composable_with(e_prev)) {
        throw std::invalid_argument("update_learning_signal: signals must share channels, N and dt");
    }
    return lti::apply_filter(f.L1, w_f_prev) + lti::apply_filter(f.L2, e_prev);
}

Signal regularized_learning_signal(const TransferMatrix& T_prev, const TransferMatrix& S_prev,
                                   const TransferMatrix& T_own, const TransferMatrix& S_own,
                                   const Signal& w_f_prev, const Signal& e_prev) {
    const double delta = std::pow(1e-6 * grid_peak(T_prev, lti::analysis_grid()), 2);
    const int n = T_prev.rows();
    auto value = [&](const TransferMatrix& G, Complex s) -> CMatrix {
        return std::isinf(s.real()) ? CMatrix(G.at_infinity().cast<Complex>()) : G.eval(s);
    };
    auto fn = [&](Complex s) -> CMatrix {
        // The learning filter has an integrator; the DC bin takes the real
        // part of the response slightly above zero instead of the pole.
        const bool dc = s == Complex(0.0, 0.0);
        const Complex at = dc ? Complex(0.0, 1e-3) : s;
        const CMatrix Tp = value(T_prev, at);
        const CMatrix Tinv =
            Tp.adjoint() * (Tp * Tp.adjoint() + delta * CMatrix::Identity(n, n)).inverse();
        const CMatrix L2 = -value(S_own, at).inverse() * value(T_own, at) * Tinv;
        const CMatrix L1 = -L2 * value(S_prev, at);
        CMatrix out(n, 2 * n);
        out << L1, L2;
        return dc ? CMatrix(out.real().cast<Complex>()) : out;
    };
    Matrix stacked(2 * n, w_f_prev.samples());
    stacked << w_f_prev.data(), e_prev.data();
    return lti::apply_response(fn, Matrix(), Signal(std::move(stacked), w_f_prev.dt(), w_f_prev.t0()),
                               lti::FilterOptions{}.max_pad_time);
}

VehicleSession run_vehicle_pass(const VehicleInstance& v, const road::RoadRealization& road,
                                const RelayMessage* incoming, std::uint64_t noise_seed,
                                const PassOptions& opts) {
    VehicleSession s{v, {}, {}, {}, std::nullopt, false, {}, {}, {}, {}, {}};
    int step = 1;
    try {
        // 1: measurements.
        s.y = lti::simulate(v.plant, road.w, lti::Vector::Zero(v.plant.n()));
        if (opts.noise_std > 0.0) {
            auto rng = make_rng(noise_seed);
            std::normal_distribution<double> nd(0.0, opts.noise_std);
            Matrix noisy = s.y.data();
            for (Eigen::Index k = 0; k < noisy.cols(); ++k) {
                for (Eigen::Index i = 0; i < noisy.rows(); ++i) {
                    noisy(i, k) += nd(rng);
                }
            }
            s.y = Signal(std::move(noisy), s.y.dt(), s.y.t0());
        }

        // 2: local estimate.
        step = 2;
        estimator::RiccatiOptions ro;
        ro.gamma = opts.gamma;
        s.design = estimator::solve_riccati(v.model, road.params, ro);
        s.w_hat_o = estimator::estimate_road(s.design, v.model, s.y).w_hat_o;
        const Sensitivities sens = build_sensitivities(v, s.design);
        s.T = sens.T;
        s.S = sens.S;

        // 3: learning signal from the predecessor.
        step = 3;
        if (incoming == nullptr) {
            s.w_f = Signal::zeros(s.y.channels(), s.y.samples(), s.y.dt(), s.y.t0());
        } else {
            try {
                s.filters = build_filters(incoming->T_tilde, incoming->S_tilde, s.T, s.S);
                s.w_f = update_learning_signal(*s.filters, incoming->w_f_tilde, incoming->e_tilde);
            } catch (const lti::LtiError&) {
                // Singular or ill-conditioned T_prev, or a chain that cannot be
                // factored to zpk (exact models give near-cancelling origin modes).
                s.filters.reset();
                s.regularized = true;
            }
            if (s.regularized) {
                s.w_f = regularized_learning_signal(incoming->T_tilde, incoming->S_tilde, s.T, s.S,
                                                    incoming->w_f_tilde, incoming->e_tilde);
            }
        }

        // 4: combined estimate.
        step = 4;
        s.w_hat = s.w_hat_o + s.w_f;

        // 5: prediction mismatch.
        step = 5;
        s.e = s.y - lti::simulate(v.model, s.w_hat, lti::Vector::Zero(v.model.n()));
    } catch (const PassError&) {
        throw;
    } catch (const std::exception& e) {
        throw PassError(step, e.what());
    }
    return s;
}

RelayMessage plain_message(const VehicleSession& s, const std::string& sender_id) {
    return RelayMessage{s.T, s.S, s.e, s.w_f, sender_id};
}

double mse(const Signal& w_hat, const Signal& w_true, Space space, double t_trim) {
    if (!w_hat.composable_with(w_true)) {
        throw std::invalid_argument("mse: signals must share channels, N and dt");
    }
    const Signal a = space == Space::profile ? road::road_profile(w_hat) : w_hat;
    const Signal b = space == Space::profile ? road::road_profile(w_true) : w_true;
    const int first = std::max(0, static_cast<int>(std::ceil(t_trim / a.dt() - 1e-9)));
    const int count = a.samples() - first;
    if (count <= 0) {
        throw std::invalid_argument("mse: trim removes every sample");
    }
    const Matrix d = a.data().rightCols(count) - b.data().rightCols(count);
    return d.squaredNorm() / static_cast<double>(d.size());
}

ChainResult run_chain(const std::vector<VehicleInstance>& fleet, const road::RoadRealization& road,
                      const std::vector<std::uint64_t>& noise_seeds, const PassOptions& opts,
                      const MessageFactory& make_message) {
    if (noise_seeds.size() != fleet.size()) {
        throw std::invalid_argument("run_chain: one noise seed per vehicle is required");
    }
    ChainResult out;
    out.sessions.reserve(fleet.size());
    out.messages.reserve(fleet.size());
    for (std::size_t j = 0; j < fleet.size(); ++j) {
        const RelayMessage* incoming = j > 0 ? &out.messages[j - 1] : nullptr;
        out.sessions.push_back(run_vehicle_pass(fleet[j], road, incoming, noise_seeds[j], opts));
        out.messages.push_back(make_message ? make_message(j, out.sessions.back())
                                            : plain_message(out.sessions.back()));
    }
    return out;
}

}  // namespace roadlearn::collab
