#pragma once
#include <array>

#include "mtvcbf/linalg.hpp"

namespace mtvcbf {

struct VehicleParams {
    double wheelbase = 0.16;       // l_wb [m]
    double rear_wheelbase = 0.08;  // l_r [m]
    double length = 0.16;          // footprint [m]
    double width = 0.08;
    double accel_min = -20.0;      // [m/s^2]
    double accel_max = 20.0;
    double steer_rate_min = -16.0; // [rad/s]
    double steer_rate_max = 16.0;
    double steer_clamp = 1.2;      // |delta| bound enforced during integration [rad]

    double wheelbase_ratio() const { return rear_wheelbase / wheelbase; }

    // Throws std::invalid_argument when a geometric or bound invariant is broken.
    void validate() const;
};

// [x, y, psi, v, delta]
struct VehicleState {
    double x = 0.0;
    double y = 0.0;
    double psi = 0.0;
    double v = 0.0;
    double delta = 0.0;
};

// [u_v, u_delta]
struct ControlInput {
    double accel = 0.0;       // u_v [m/s^2]
    double steer_rate = 0.0;  // u_delta [rad/s]
};

// beta = atan(k tan(delta)). Throws std::domain_error for |delta| >= pi/2.
double slip_angle(double delta, const VehicleParams& params);

// d(beta)/dt for a steering rate u_delta: k sec^2(delta) / (1 + (k tan delta)^2) * u_delta.
double slip_angle_rate(double delta, double steer_rate, const VehicleParams& params);

// [v cos(psi+beta), v sin(psi+beta), v/l_wb tan(delta) cos(beta), u_v, u_delta]
std::array<double, 5> state_derivative(const VehicleState& state, const ControlInput& input,
                                       const VehicleParams& params);

// (x_dot, y_dot, psi_dot): first three rows of the state derivative.
Vec3 pose_first_derivative(const VehicleState& state, const VehicleParams& params);

// (x_ddot, y_ddot, psi_ddot); affine in (u_v, u_delta).
Vec3 pose_second_derivatives(const VehicleState& state, const ControlInput& input,
                             const VehicleParams& params);

// Same quantity split as bias + d_accel * u_v + d_steer * u_delta.
struct PoseAccelAffine {
    Vec3 bias;
    Vec3 d_accel;
    Vec3 d_steer;
};
PoseAccelAffine pose_accel_affine(const VehicleState& state, const VehicleParams& params);

// One classical RK4 step; psi re-wrapped and delta clamped to the configured bound.
VehicleState integrate_step(const VehicleState& state, const ControlInput& input, double dt,
                            const VehicleParams& params);

}  // namespace mtvcbf
