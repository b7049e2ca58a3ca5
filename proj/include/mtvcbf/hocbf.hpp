#pragma once
#include <string>

#include "mtvcbf/linalg.hpp"
#include "mtvcbf/mlp.hpp"
#include "mtvcbf/relative.hpp"
#include "mtvcbf/vehicle.hpp"

namespace mtvcbf {

enum class MarginMode { learned, c2c, hybrid };

MarginMode margin_mode_from_string(const std::string& name);
const char* to_string(MarginMode mode);

struct CbfConfig {
    double k_alpha = 2.0;       // linear class-K slope [1/s], > 0
    double epsilon = 0.0;       // learned-margin error bound [m], >= 0
    MarginMode margin_mode = MarginMode::hybrid;
    double hybrid_range = 0.48; // switch to the c2c margin beyond this box [m]

    void validate() const;
};

// Affine barrier condition Psi_2(u) = a . u + b >= 0 over the stacked input
// u = (u_v_i, u_delta_i, u_v_j, u_delta_j).
struct CbfConstraint {
    Vec4 a{};
    double b = 0.0;
    double h = 0.0;      // barrier value at the state
    double h_dot = 0.0;
    MarginMode mode_used = MarginMode::c2c;
};

// Which margin backs the barrier at this relative pose: learned inside the
// closed hybrid box (ties resolve inward), c2c outside.
MarginMode hybrid_select(const RelativeState& rel, const CbfConfig& config);

// h = net(rel) - epsilon in learned mode, the enclosing-circle margin in c2c
// mode (exact, so no epsilon). Learned mode throws std::out_of_range outside
// the trained range; use hybrid mode when the pose can leave it.
double barrier_value(const RelativeState& rel, const CbfConfig& config, const MlpParams* net,
                     const VehicleParams& dims);

// dh/dt = grad h . d(rel)/dt (the constant epsilon drops out).
double barrier_rate(const VehicleState& ego, const VehicleState& other, const CbfConfig& config,
                    const MlpParams* net, const VehicleParams& params);

// Gradient and Hessian of the c2c margin w.r.t. the relative pose; the
// heading row/column is zero. Throws std::domain_error at coincident centers.
void c2c_barrier_derivatives(const RelativeState& rel, Vec3& grad, Mat3& hess);

// Full second-order chain
//   Psi_2(u) = grad h . x_rel_ddot(u) + x_rel_dot^T H x_rel_dot
//              + 2 k_alpha h_dot + k_alpha^2 h
// decomposed into a . u + b through the affine input map of x_rel_ddot.
CbfConstraint constraint_coefficients(const VehicleState& ego, const VehicleState& other,
                                      const CbfConfig& config, const MlpParams* net,
                                      const VehicleParams& params);

// Second-order barrier keeping one vehicle's lateral position below an upper
// bound (upper = true, h = y_bound - clearance - y) or above a lower bound
// (h = y - y_bound - clearance). The pair (a, b) is over that vehicle's own
// input (u_v, u_delta): Psi_2(u) = a . u + b.
struct LateralBoundConstraint {
    std::array<double, 2> a{};
    double b = 0.0;
    double h = 0.0;
    double h_dot = 0.0;
};
LateralBoundConstraint lateral_bound_constraint(const VehicleState& state, double y_bound,
                                                double clearance, bool upper, double k_alpha,
                                                const VehicleParams& params);

}  // namespace mtvcbf
