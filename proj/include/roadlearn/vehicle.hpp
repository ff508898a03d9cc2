#pragma once

#include "roadlearn/lti/types.hpp"

#include <cstdint>

namespace roadlearn::vehicle {

using lti::StateSpace;

// Front half-car parameters (SI units).
struct VehicleParams {
    double m_b = 700.0;    // sprung mass
    double I_x = 500.0;    // roll moment of inertia
    double k_s = 30000.0;  // suspension stiffness, each corner
    double c_s = 2500.0;   // suspension damping, each corner
    double L1 = 0.75;      // left tip to centre of gravity
    double L2 = 0.75;      // right tip to centre of gravity

    void validate() const;
};

// State x = [q1, q2, z_dot, theta_dot] (suspension deflections, heave rate,
// roll rate); input w = [w_l, w_r] road velocities; output y = [z1_ddot,
// z2_ddot] corner accelerations.
StateSpace build_half_car(const VehicleParams& p);

// Multiplies every parameter by 1 + rel_sigma * z, z standard normal redrawn
// until |z| <= 3.
VehicleParams perturb_params(const VehicleParams& p, double rel_sigma, std::uint64_t seed);

struct VehicleInstance {
    int id = 0;
    VehicleParams true_params;
    VehicleParams model_params;
    StateSpace plant;
    StateSpace model;

    VehicleInstance(int id_, const VehicleParams& truth, const VehicleParams& believed)
        : id(id_),
          true_params(truth),
          model_params(believed),
          plant(build_half_car(truth)),
          model(build_half_car(believed)) {}
};

// Vehicle j of a fleet: true parameters around the nominal set, model
// parameters around the vehicle's own truth.
VehicleInstance make_vehicle(int id, const VehicleParams& nominal, double rel_sigma_fleet,
                             double rel_sigma_model, std::uint64_t fleet_seed,
                             std::uint64_t model_seed);

}  // namespace roadlearn::vehicle
