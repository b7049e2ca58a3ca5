#pragma once
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtvcbf/hocbf.hpp"
#include "mtvcbf/vehicle.hpp"

namespace mtvcbf {

// a . u + b >= 0. Relaxable rows receive the shared slack when the problem
// turns out infeasible; box rows never do.
struct LinearConstraint {
    std::vector<double> a;
    double b = 0.0;
    bool relaxable = true;
};

// min (u - u_nom)^T Q (u - u_nom)  s.t.  constraints, box bounds, and any
// fixed components held at their u_nom values.
struct QpProblem {
    int n = 0;
    std::vector<double> Q;                  // n x n row-major, SPD
    std::vector<double> u_nom;
    std::vector<LinearConstraint> ineqs;
    std::vector<double> u_min, u_max;
    std::vector<std::uint8_t> free_mask;    // empty means all free

    void validate() const;
};

// Identity-cost problem skeleton of the given size.
QpProblem make_identity_qp(int n);

enum class QpStatus { optimal, relaxed, error };

const char* to_string(QpStatus status);

// active_set indexes the combined constraint list: user inequalities first in
// order, then per free variable the lower box row, then the upper box row.
struct QpSolution {
    std::vector<double> u;
    QpStatus status = QpStatus::error;
    std::vector<int> active_set;
    double objective = 0.0;
    double slack_used = 0.0;
    double kkt_residual = 0.0;
    std::string message;
};

// Dense active-set solve (Goldfarb-Idnani: walk from the unconstrained
// optimum adding violated constraints). On infeasibility the problem is
// re-solved with one shared slack on the relaxable rows under a quadratic
// penalty and reported as `relaxed`. KKT residuals are verified before an
// `optimal` status is returned.
QpSolution solve_qp(const QpProblem& problem);

double qp_relax_penalty_default();

// ============================================================
// CBF-constrained filters
// ============================================================

enum class FilterScope { joint, ego_only };

FilterScope filter_scope_from_string(const std::string& name);
const char* to_string(FilterScope scope);

struct PairFilterResult {
    QpSolution qp;
    CbfConstraint constraint;
    double solve_ms = 0.0;  // wall time of the QP solve itself
    double build_ms = 0.0;  // constraint construction (margin, gradient, Hessian)
};

// One barrier constraint between the pair plus both robots' box bounds.
// ego_only keeps the other robot's inputs fixed at their nominal values.
PairFilterResult filter_pair(const VehicleState& ego, const VehicleState& other, const Vec4& u_nom,
                             const CbfConfig& cbf, const MlpParams* net,
                             const VehicleParams& params, FilterScope scope);

struct FleetFilterResult {
    QpSolution qp;
    std::vector<CbfConstraint> constraints;  // one per unordered pair, (0,1), (0,2), ...
    std::vector<ControlInput> inputs;
};

// Centralized filter over all 2k inputs with one constraint per pair.
FleetFilterResult filter_fleet(std::span<const VehicleState> states,
                               std::span<const ControlInput> u_nom, const CbfConfig& cbf,
                               const MlpParams* net, const VehicleParams& params);

}  // namespace mtvcbf
