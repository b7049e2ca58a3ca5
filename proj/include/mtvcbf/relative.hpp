#pragma once
#include "mtvcbf/linalg.hpp"
#include "mtvcbf/vehicle.hpp"

namespace mtvcbf {

// Pose of the other robot expressed in the ego robot's body frame.
struct RelativeState {
    double x = 0.0;
    double y = 0.0;
    double psi = 0.0;  // wrapped to (-pi, pi]

    Vec3 as_vec() const { return {x, y, psi}; }
};

struct RelativeDerivatives {
    Vec3 first;
    Vec3 second;
};

// Rotate the global offset by -psi_ego; relative heading wrapped.
RelativeState to_ego_frame(const VehicleState& ego, const VehicleState& other);

// d/dt of the ego-frame relative pose. The rotation's time dependence enters
// through the ego yaw rate, so with X, Y the ego-frame offsets:
//   X_dot = cos(psi) rx_dot + sin(psi) ry_dot + psi_dot_ego * Y
//   Y_dot = -sin(psi) rx_dot + cos(psi) ry_dot - psi_dot_ego * X
//   psi_rel_dot = psi_dot_other - psi_dot_ego
Vec3 ego_first_derivative(const VehicleState& ego, const VehicleState& other,
                          const VehicleParams& params);

// d^2/dt^2 of the ego-frame relative pose; affine in the stacked input
// (u_v_ego, u_delta_ego, u_v_other, u_delta_other).
Vec3 ego_second_derivative(const VehicleState& ego, const VehicleState& other,
                           const ControlInput& input_ego, const ControlInput& input_other,
                           const VehicleParams& params);

// Same quantity as explicit affine decomposition: x_rel_ddot(u) = input_map * u + bias.
struct EgoAccelAffine {
    Vec3 bias;
    Mat34 input_map;
};
EgoAccelAffine ego_second_derivative_affine(const VehicleState& ego, const VehicleState& other,
                                            const VehicleParams& params);

RelativeDerivatives relative_derivatives(const VehicleState& ego, const VehicleState& other,
                                         const ControlInput& input_ego,
                                         const ControlInput& input_other,
                                         const VehicleParams& params);

}  // namespace mtvcbf
