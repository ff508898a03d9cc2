#include "roadlearn/privacy/protocol.hpp"

#include <cinttypes>
#include <cstdio>

namespace roadlearn::privacy {

using lti::CMatrix;
using lti::Complex;

collab::MessageFactory obfuscating_factory(std::vector<Obfuscator> obfs,
                                           std::vector<std::string> tokens) {
    return [obfs = std::move(obfs), tokens = std::move(tokens)](
               std::size_t j, const collab::VehicleSession& s) -> RelayMessage {
        if (j >= obfs.size()) {
            throw std::out_of_range("obfuscating_factory: no obfuscator for vehicle " +
                                    std::to_string(j));
        }
        const std::string id = j < tokens.size() ? tokens[j] : std::string();
        return obfuscate(obfs[j], s.T, s.S, s.e, s.w_f, id);
    };
}

std::string sender_token(std::uint64_t seed) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, seed);
    return buf;
}

namespace {

double relative_grid_mismatch(const TransferMatrix& got, const TransferMatrix& a,
                              const TransferMatrix& b, const std::vector<double>& omegas) {
    double num = 0.0, den = 0.0;
    for (double w : omegas) {
        const Complex s(0.0, w);
        const CMatrix ref = a.eval(s) * b.eval(s);
        num = std::max(num, (got.eval(s) - ref).norm());
        den = std::max(den, ref.norm());
    }
    return den > 0.0 ? num / den : num;
}

}  // namespace

AccuracyReport verify_accuracy_preservation(const std::vector<collab::VehicleSession>& plain,
                                            const std::vector<collab::VehicleSession>& obfuscated,
                                            const std::vector<Obfuscator>& obfs,
                                            const Signal& w_true, double t_trim) {
    if (plain.size() != obfuscated.size() || obfs.size() < plain.size()) {
        throw std::invalid_argument("verify_accuracy_preservation: chain lengths disagree");
    }
    AccuracyReport rep;
    rep.pass = true;
    const auto& grid = lti::analysis_grid();
    for (std::size_t j = 0; j < plain.size(); ++j) {
        const auto& p = plain[j];
        const auto& o = obfuscated[j];
        VehicleAccuracy acc;
        acc.w_f_distance = lti::relative_l2(o.w_f, p.w_f);
        acc.w_hat_distance = lti::relative_l2(o.w_hat, p.w_hat);
        const double mp = collab::mse(p.w_hat, w_true, collab::Space::profile, t_trim);
        const double mo = collab::mse(o.w_hat, w_true, collab::Space::profile, t_trim);
        acc.mse_distance = mp > 0.0 ? std::abs(mo - mp) / mp : std::abs(mo - mp);
        if (j > 0 && p.filters && o.filters) {
            const Obfuscator& prev = obfs[j - 1];
            acc.l1_identity = relative_grid_mismatch(o.filters->L1, p.filters->L1, prev.psi_s2, grid);
            double num = 0.0, den = 0.0;
            for (double w : grid) {
                const Complex s(0.0, w);
                const CMatrix ref = p.filters->L2.eval(s) * prev.psi_s1.eval(s).inverse();
                num = std::max(num, (o.filters->L2.eval(s) - ref).norm());
                den = std::max(den, ref.norm());
            }
            acc.l2_identity = den > 0.0 ? num / den : num;
        }
        rep.pass = rep.pass && acc.w_f_distance <= rep.signal_tol &&
                   acc.w_hat_distance <= rep.signal_tol && acc.mse_distance <= rep.signal_tol &&
                   acc.l1_identity <= rep.filter_tol && acc.l2_identity <= rep.filter_tol;
        rep.vehicles.push_back(acc);
    }
    return rep;
}

ExplanationResiduals explanation_residuals(const RelayMessage& msg, const TransferMatrix& T_bar,
                                           const TransferMatrix& S_bar, const TransferMatrix& psi1_bar,
                                           const TransferMatrix& psi2_bar,
                                           const std::vector<double>& omegas) {
    double t_num = 0.0, t_den = 0.0, s_num = 0.0, s_den = 0.0;
    for (double w : omegas) {
        const Complex s(0.0, w);
        const CMatrix P1 = psi1_bar.eval(s);
        const CMatrix Tt = msg.T_tilde.eval(s), St = msg.S_tilde.eval(s);
        t_num = std::max(t_num, (P1 * T_bar.eval(s) - Tt).norm());
        s_num = std::max(s_num, (P1 * S_bar.eval(s) * psi2_bar.eval(s) - St).norm());
        t_den = std::max(t_den, Tt.norm());
        s_den = std::max(s_den, St.norm());
    }
    return ExplanationResiduals{t_den > 0 ? t_num / t_den : t_num, s_den > 0 ? s_num / s_den : s_num};
}

}  // namespace roadlearn::privacy
