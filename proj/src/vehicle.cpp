#include "mtvcbf/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mtvcbf/geometry.hpp"

namespace mtvcbf {

namespace {

constexpr double kHalfPi = 1.5707963267948966192;

void check_steer_domain(double delta) {
    if (!(std::abs(delta) < kHalfPi))
        throw std::domain_error("steering angle outside (-pi/2, pi/2)");
}

}  // namespace

void VehicleParams::validate() const {
    if (!(rear_wheelbase > 0.0) || !(rear_wheelbase <= wheelbase))
        throw std::invalid_argument("VehicleParams: need 0 < rear_wheelbase <= wheelbase");
    if (!(length > 0.0) || !(width > 0.0))
        throw std::invalid_argument("VehicleParams: dimensions must be positive");
    if (!(accel_min < accel_max) || !(steer_rate_min < steer_rate_max))
        throw std::invalid_argument("VehicleParams: input bounds must satisfy min < max");
    if (!(steer_clamp > 0.0) || !(steer_clamp < kHalfPi))
        throw std::invalid_argument("VehicleParams: steer_clamp must lie in (0, pi/2)");
}

double slip_angle(double delta, const VehicleParams& params) {
    check_steer_domain(delta);
    return std::atan(params.wheelbase_ratio() * std::tan(delta));
}

double slip_angle_rate(double delta, double steer_rate, const VehicleParams& params) {
    check_steer_domain(delta);
    const double k = params.wheelbase_ratio();
    const double tan_d = std::tan(delta);
    const double sec2 = 1.0 + tan_d * tan_d;
    const double kt = k * tan_d;
    return k * sec2 / (1.0 + kt * kt) * steer_rate;
}

std::array<double, 5> state_derivative(const VehicleState& state, const ControlInput& input,
                                       const VehicleParams& params) {
    check_steer_domain(state.delta);
    const double beta = slip_angle(state.delta, params);
    const double course = state.psi + beta;
    return {state.v * std::cos(course),
            state.v * std::sin(course),
            state.v / params.wheelbase * std::tan(state.delta) * std::cos(beta),
            input.accel,
            input.steer_rate};
}

Vec3 pose_first_derivative(const VehicleState& state, const VehicleParams& params) {
    const auto d = state_derivative(state, ControlInput{}, params);
    return {d[0], d[1], d[2]};
}

Vec3 pose_second_derivatives(const VehicleState& state, const ControlInput& input,
                             const VehicleParams& params) {
    const auto affine = pose_accel_affine(state, params);
    return affine.bias + input.accel * affine.d_accel + input.steer_rate * affine.d_steer;
}

PoseAccelAffine pose_accel_affine(const VehicleState& state, const VehicleParams& params) {
    check_steer_domain(state.delta);
    const double beta = slip_angle(state.delta, params);
    const double course = state.psi + beta;
    const double cos_c = std::cos(course);
    const double sin_c = std::sin(course);
    const double tan_d = std::tan(state.delta);
    const double sec2 = 1.0 + tan_d * tan_d;
    const double cos_b = std::cos(beta);
    const double tan_b = std::tan(beta);
    const double psi_dot = state.v / params.wheelbase * tan_d * cos_b;
    // d(beta)/d(u_delta)
    const double kt = params.wheelbase_ratio() * tan_d;
    const double beta_gain = params.wheelbase_ratio() * sec2 / (1.0 + kt * kt);

    PoseAccelAffine out;
    out.bias = {-state.v * sin_c * psi_dot, state.v * cos_c * psi_dot, 0.0};
    out.d_accel = {cos_c, sin_c, cos_b / params.wheelbase * tan_d};
    out.d_steer = {-state.v * sin_c * beta_gain,
                   state.v * cos_c * beta_gain,
                   cos_b / params.wheelbase * (state.v * sec2 - state.v * tan_b * tan_d * beta_gain)};
    return out;
}

namespace {

VehicleState clamp_steer(VehicleState s, const VehicleParams& params) {
    s.delta = std::clamp(s.delta, -params.steer_clamp, params.steer_clamp);
    return s;
}

VehicleState advance(const VehicleState& s, const std::array<double, 5>& d, double h) {
    return {s.x + h * d[0], s.y + h * d[1], s.psi + h * d[2], s.v + h * d[3], s.delta + h * d[4]};
}

}  // namespace

VehicleState integrate_step(const VehicleState& state, const ControlInput& input, double dt,
                            const VehicleParams& params) {
    if (!(dt > 0.0)) throw std::invalid_argument("integrate_step: dt must be positive");

    const VehicleState s0 = clamp_steer(state, params);
    const auto k1 = state_derivative(s0, input, params);
    const auto k2 = state_derivative(clamp_steer(advance(s0, k1, 0.5 * dt), params), input, params);
    const auto k3 = state_derivative(clamp_steer(advance(s0, k2, 0.5 * dt), params), input, params);
    const auto k4 = state_derivative(clamp_steer(advance(s0, k3, dt), params), input, params);

    VehicleState next = s0;
    const double w = dt / 6.0;
    next.x += w * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
    next.y += w * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    next.psi += w * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]);
    next.v += w * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]);
    next.delta += w * (k1[4] + 2.0 * k2[4] + 2.0 * k3[4] + k4[4]);
    next.psi = wrap_angle(next.psi);
    return clamp_steer(next, params);
}

}  // namespace mtvcbf
