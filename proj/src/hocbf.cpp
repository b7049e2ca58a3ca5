#include "mtvcbf/hocbf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mtvcbf/geometry.hpp"

namespace mtvcbf {

MarginMode margin_mode_from_string(const std::string& name) {
    if (name == "learned") return MarginMode::learned;
    if (name == "c2c") return MarginMode::c2c;
    if (name == "hybrid") return MarginMode::hybrid;
    throw std::invalid_argument("unknown margin mode: " + name);
}

const char* to_string(MarginMode mode) {
    switch (mode) {
        case MarginMode::learned: return "learned";
        case MarginMode::c2c: return "c2c";
        case MarginMode::hybrid: return "hybrid";
    }
    return "?";
}

void CbfConfig::validate() const {
    if (!(k_alpha > 0.0)) throw std::invalid_argument("CbfConfig: k_alpha must be positive");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("CbfConfig: epsilon must be >= 0");
    if (!(hybrid_range > 0.0)) throw std::invalid_argument("CbfConfig: hybrid_range must be > 0");
}

MarginMode hybrid_select(const RelativeState& rel, const CbfConfig& config) {
    const bool inside =
        std::abs(rel.x) <= config.hybrid_range && std::abs(rel.y) <= config.hybrid_range;
    return inside ? MarginMode::learned : MarginMode::c2c;
}

namespace {

// In hybrid mode the learned box is additionally clamped to the network's own
// trained range so the reciprocal round trip through input_scale can never
// select a pose the net would reject.
MarginMode resolve_mode(const RelativeState& rel, const CbfConfig& config, const MlpParams* net) {
    if (config.margin_mode != MarginMode::hybrid) return config.margin_mode;
    CbfConfig clamped = config;
    if (net != nullptr)
        clamped.hybrid_range = std::min({config.hybrid_range, net->range_halfwidth(0),
                                         net->range_halfwidth(1)});
    return hybrid_select(rel, clamped);
}

void require_net(const MlpParams* net) {
    if (net == nullptr)
        throw std::invalid_argument("learned margin mode requires a trained network");
}

void require_in_range(const MlpParams& net, const Vec3& rel) {
    if (!net.in_trained_range(rel))
        throw std::out_of_range("relative pose outside the trained range; use hybrid mode");
}

}  // namespace

double barrier_value(const RelativeState& rel, const CbfConfig& config, const MlpParams* net,
                     const VehicleParams& dims) {
    const MarginMode mode = resolve_mode(rel, config, net);
    if (mode == MarginMode::learned) {
        require_net(net);
        require_in_range(*net, rel.as_vec());
        return mlp_forward(*net, rel.as_vec()) - config.epsilon;
    }
    return c2c_margin(rel.x, rel.y, dims.length, dims.width);
}

double barrier_rate(const VehicleState& ego, const VehicleState& other, const CbfConfig& config,
                    const MlpParams* net, const VehicleParams& params) {
    const RelativeState rel = to_ego_frame(ego, other);
    const MarginMode mode = resolve_mode(rel, config, net);
    const Vec3 rel_dot = ego_first_derivative(ego, other, params);
    Vec3 grad;
    if (mode == MarginMode::learned) {
        require_net(net);
        require_in_range(*net, rel.as_vec());
        grad = mlp_gradient(*net, rel.as_vec());
    } else {
        Mat3 unused;
        c2c_barrier_derivatives(rel, grad, unused);
    }
    return dot(grad, rel_dot);
}

void c2c_barrier_derivatives(const RelativeState& rel, Vec3& grad, Mat3& hess) {
    const double d2 = rel.x * rel.x + rel.y * rel.y;
    if (d2 <= 0.0) throw std::domain_error("c2c_barrier_derivatives: coincident centers");
    const double d = std::sqrt(d2);
    grad = {rel.x / d, rel.y / d, 0.0};
    const double inv_d3 = 1.0 / (d2 * d);
    hess = Mat3::zero();
    hess(0, 0) = rel.y * rel.y * inv_d3;
    hess(0, 1) = -rel.x * rel.y * inv_d3;
    hess(1, 0) = hess(0, 1);
    hess(1, 1) = rel.x * rel.x * inv_d3;
}

CbfConstraint constraint_coefficients(const VehicleState& ego, const VehicleState& other,
                                      const CbfConfig& config, const MlpParams* net,
                                      const VehicleParams& params) {
    config.validate();
    const RelativeState rel = to_ego_frame(ego, other);
    const MarginMode mode = resolve_mode(rel, config, net);

    double h;
    Vec3 grad;
    Mat3 hess;
    if (mode == MarginMode::learned) {
        require_net(net);
        require_in_range(*net, rel.as_vec());
        const MlpEval eval = mlp_evaluate(*net, rel.as_vec());
        h = eval.value - config.epsilon;
        grad = eval.gradient;
        hess = eval.hessian;
    } else {
        h = c2c_margin(rel.x, rel.y, params.length, params.width);
        c2c_barrier_derivatives(rel, grad, hess);
    }

    const Vec3 rel_dot = ego_first_derivative(ego, other, params);
    const EgoAccelAffine accel = ego_second_derivative_affine(ego, other, params);

    CbfConstraint out;
    out.mode_used = mode;
    out.h = h;
    out.h_dot = dot(grad, rel_dot);
    out.a = transpose_apply(accel.input_map, grad);
    out.b = dot(grad, accel.bias) + quad_form(hess, rel_dot) + 2.0 * config.k_alpha * out.h_dot +
            config.k_alpha * config.k_alpha * h;
    return out;
}

LateralBoundConstraint lateral_bound_constraint(const VehicleState& state, double y_bound,
                                                double clearance, bool upper, double k_alpha,
                                                const VehicleParams& params) {
    const double sign = upper ? -1.0 : 1.0;  // h = sign * (y - y_bound) - clearance
    const Vec3 vel = pose_first_derivative(state, params);
    const PoseAccelAffine acc = pose_accel_affine(state, params);

    LateralBoundConstraint out;
    out.h = sign * (state.y - y_bound) - clearance;
    out.h_dot = sign * vel.y;
    out.a = {sign * acc.d_accel.y, sign * acc.d_steer.y};
    out.b = sign * acc.bias.y + 2.0 * k_alpha * out.h_dot + k_alpha * k_alpha * out.h;
    return out;
}

}  // namespace mtvcbf
