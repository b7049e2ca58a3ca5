#include "mtvcbf/relative.hpp"

#include <cmath>

#include "mtvcbf/geometry.hpp"

namespace mtvcbf {

RelativeState to_ego_frame(const VehicleState& ego, const VehicleState& other) {
    const double c = std::cos(ego.psi);
    const double s = std::sin(ego.psi);
    const double dx = other.x - ego.x;
    const double dy = other.y - ego.y;
    return {c * dx + s * dy, -s * dx + c * dy, wrap_angle(other.psi - ego.psi)};
}

Vec3 ego_first_derivative(const VehicleState& ego, const VehicleState& other,
                          const VehicleParams& params) {
    const double c = std::cos(ego.psi);
    const double s = std::sin(ego.psi);
    const double dx = other.x - ego.x;
    const double dy = other.y - ego.y;
    const double X = c * dx + s * dy;
    const double Y = -s * dx + c * dy;

    const Vec3 d_ego = pose_first_derivative(ego, params);
    const Vec3 d_other = pose_first_derivative(other, params);
    const double rdx = d_other.x - d_ego.x;
    const double rdy = d_other.y - d_ego.y;
    const double yaw_rate = d_ego.z;

    return {c * rdx + s * rdy + yaw_rate * Y,
            -s * rdx + c * rdy - yaw_rate * X,
            d_other.z - d_ego.z};
}

Vec3 ego_second_derivative(const VehicleState& ego, const VehicleState& other,
                           const ControlInput& input_ego, const ControlInput& input_other,
                           const VehicleParams& params) {
    const EgoAccelAffine aff = ego_second_derivative_affine(ego, other, params);
    const Vec4 u{input_ego.accel, input_ego.steer_rate, input_other.accel, input_other.steer_rate};
    return aff.input_map * u + aff.bias;
}

EgoAccelAffine ego_second_derivative_affine(const VehicleState& ego, const VehicleState& other,
                                            const VehicleParams& params) {
    const double c = std::cos(ego.psi);
    const double s = std::sin(ego.psi);
    const double dx = other.x - ego.x;
    const double dy = other.y - ego.y;
    const double X = c * dx + s * dy;
    const double Y = -s * dx + c * dy;

    const Vec3 d_ego = pose_first_derivative(ego, params);
    const Vec3 d_other = pose_first_derivative(other, params);
    const double rdx = d_other.x - d_ego.x;
    const double rdy = d_other.y - d_ego.y;
    const double yaw_rate = d_ego.z;

    const PoseAccelAffine acc_ego = pose_accel_affine(ego, params);
    const PoseAccelAffine acc_other = pose_accel_affine(other, params);

    EgoAccelAffine out;

    // Input-free part: relative acceleration at u = 0 plus the frame terms.
    const Vec3 rdd0 = acc_other.bias - acc_ego.bias;
    const double yaw_acc0 = acc_ego.bias.z;
    out.bias = {c * rdd0.x + s * rdd0.y + 2.0 * yaw_rate * (-s * rdx + c * rdy) + yaw_acc0 * Y -
                    yaw_rate * yaw_rate * X,
                -s * rdd0.x + c * rdd0.y - 2.0 * yaw_rate * (c * rdx + s * rdy) - yaw_acc0 * X -
                    yaw_rate * yaw_rate * Y,
                rdd0.z};

    // Per-input columns. Ego inputs enter with a negated relative acceleration
    // and additionally through the ego yaw acceleration in the frame terms.
    const auto column = [&](const Vec3& d_acc, bool is_ego) {
        const double sign = is_ego ? -1.0 : 1.0;
        const double yaw_acc_gain = is_ego ? d_acc.z : 0.0;
        return Vec3{sign * (c * d_acc.x + s * d_acc.y) + yaw_acc_gain * Y,
                    sign * (-s * d_acc.x + c * d_acc.y) - yaw_acc_gain * X,
                    sign * d_acc.z};
    };

    const Vec3 cols[4] = {column(acc_ego.d_accel, true), column(acc_ego.d_steer, true),
                          column(acc_other.d_accel, false), column(acc_other.d_steer, false)};
    for (int cidx = 0; cidx < 4; ++cidx)
        for (int r = 0; r < 3; ++r) out.input_map(r, cidx) = cols[cidx][r];
    return out;
}

RelativeDerivatives relative_derivatives(const VehicleState& ego, const VehicleState& other,
                                         const ControlInput& input_ego,
                                         const ControlInput& input_other,
                                         const VehicleParams& params) {
    return {ego_first_derivative(ego, other, params),
            ego_second_derivative(ego, other, input_ego, input_other, params)};
}

}  // namespace mtvcbf
