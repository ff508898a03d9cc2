#include "roadlearn/vehicle.hpp"

#include "roadlearn/seeding.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace roadlearn::vehicle {

void VehicleParams::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument(std::string("VehicleParams: ") + name +
                                        " must be strictly positive");
        }
    };
    positive(m_b, "m_b");
    positive(I_x, "I_x");
    positive(k_s, "k_s");
    positive(c_s, "c_s");
    positive(L1, "L1");
    positive(L2, "L2");
}

StateSpace build_half_car(const VehicleParams& p) {
    p.validate();
    const double m = p.m_b, J = 0.5 * p.I_x, k = p.k_s, c = p.c_s, a = p.L1, b = p.L2;

    lti::Matrix A = lti::Matrix::Zero(4, 4);
    lti::Matrix B = lti::Matrix::Zero(4, 2);
    // Deflection rates.
    A(0, 2) = 1.0;
    A(0, 3) = a;
    B(0, 0) = -1.0;
    A(1, 2) = 1.0;
    A(1, 3) = -b;
    B(1, 1) = -1.0;
    // Heave after substituting the deflection rates into the damper forces.
    A.row(2) << -k, -k, -2.0 * c, -c * (a - b);
    B.row(2) << c, c;
    A.row(2) /= m;
    B.row(2) /= m;
    // Roll, with half the roll inertia carried by the front axle.
    A.row(3) << -a * k, b * k, c * (b - a), -c * (a * a + b * b);
    B.row(3) << a * c, -b * c;
    A.row(3) /= J;
    B.row(3) /= J;

    lti::Matrix C(2, 4), D(2, 2);
    C.row(0) = A.row(2) + a * A.row(3);
    C.row(1) = A.row(2) - b * A.row(3);
    D.row(0) = B.row(2) + a * B.row(3);
    D.row(1) = B.row(2) - b * B.row(3);
    return StateSpace(std::move(A), std::move(B), std::move(C), std::move(D));
}

VehicleParams perturb_params(const VehicleParams& p, double rel_sigma, std::uint64_t seed) {
    p.validate();
    if (!(rel_sigma >= 0.0 && rel_sigma < 0.3)) {
        throw std::invalid_argument("perturb_params: rel_sigma must lie in [0, 0.3)");
    }
    if (rel_sigma == 0.0) {
        return p;
    }
    auto rng = make_rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    auto factor = [&] {
        double z;
        do {
            z = nd(rng);
        } while (std::abs(z) > 3.0);
        return 1.0 + rel_sigma * z;
    };
    VehicleParams q;
    q.m_b = p.m_b * factor();
    q.I_x = p.I_x * factor();
    q.k_s = p.k_s * factor();
    q.c_s = p.c_s * factor();
    q.L1 = p.L1 * factor();
    q.L2 = p.L2 * factor();
    return q;
}

VehicleInstance make_vehicle(int id, const VehicleParams& nominal, double rel_sigma_fleet,
                             double rel_sigma_model, std::uint64_t fleet_seed,
                             std::uint64_t model_seed) {
    const VehicleParams truth = perturb_params(nominal, rel_sigma_fleet, fleet_seed);
    const VehicleParams believed = perturb_params(truth, rel_sigma_model, model_seed);
    return VehicleInstance(id, truth, believed);
}

}  // namespace roadlearn::vehicle
