#pragma once
#include <string>
#include <vector>

#include "mtvcbf/qp.hpp"

namespace mtvcbf {

enum class ScenarioKind { overtaking, bypassing };

ScenarioKind scenario_kind_from_string(const std::string& name);
const char* to_string(ScenarioKind kind);

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::bypassing;
    double dt = 0.05;
    double horizon = 6.0;
    CbfConfig cbf;
    FilterScope filter_scope = FilterScope::joint;
    bool filter_enabled = true;

    double speed_i = 1.0;   // target speeds [m/s]
    double speed_j = 0.5;
    double start_xi = -1.2;
    double start_xj = -0.4;

    // Overtaking: lane 0 at y = 0 holds the slower vehicle; the ego projects
    // its reference to the adjacent lane centerline while passing.
    double lane_width = 0.16;
    // Road corridor, enforced on filtered vehicles as lateral barrier rows in
    // the same QP. Without it the planar world has no outside lane bound and
    // any margin can go around the slower vehicle.
    bool road_edges = false;
    double road_y_min = -0.08;
    double road_y_max = 0.24;
    double road_clearance = 0.065;  // center-to-edge clearance
    double obstruction_trigger = 0.5;  // longitudinal gap that provokes a block [m]
    int obstruction_limit = 3;
    double obstruction_duration = 1.2; // how long one block holds the lane [s]
    double obstruction_cooldown = 0.8; // quiet time after returning [s]
    double overtake_clear = 0.2;       // ahead by length + this -> fold back [m]

    // Bypassing: both references sit on Y = 0 until the approach trigger,
    // then offset to +-y_nom until the vehicles have passed each other.
    double y_nom = 0.072;
    double approach_trigger = 1.0;
    double pass_clear = 0.3;
    double recenter_tol = 0.02;        // |y| for the completion check [m]

    // Waypoint tracking tuning.
    double lookahead = 0.3;
    double speed_gain = 5.0;
    double steer_gain = 8.0;

    void validate() const;
};

struct StepRecord {
    double t = 0.0;
    VehicleState state_i, state_j;
    Vec4 u_nom{}, u_safe{};
    double h = 0.0;           // barrier backing the constraint this step
    double mtv_exact = 0.0;   // recomputed footprint margin
    double c2c_exact = 0.0;
    double psi1 = 0.0;        // h_dot + k_alpha h
    double psi2 = 0.0;        // a . u_safe + b
    QpStatus qp_status = QpStatus::optimal;
    bool filtered = true;
    double qp_ms = 0.0;      // QP solve wall time (the logged column)
    double filter_ms = 0.0;  // constraint build + solve
    MarginMode mode_used = MarginMode::c2c;
};

struct SimLog {
    ScenarioConfig config;
    std::vector<StepRecord> steps;
    bool aborted = false;
    std::string abort_reason;
};

struct Metrics {
    double min_exact_margin = 0.0;
    bool completed = false;
    double completion_time = 0.0;  // horizon when not completed
    double max_evasion_i_pct = 0.0;
    double max_evasion_j_pct = 0.0;
    double mean_qp_ms = 0.0;
    double max_qp_ms = 0.0;
    double mean_filter_ms = 0.0;  // including constraint construction
    int relaxed_steps = 0;
    int error_steps = 0;
    int total_steps = 0;
};

// Pure-pursuit steering toward a lookahead point on the line y = y_ref plus
// proportional speed control; deliberately unaware of the other vehicle.
// dir is +1 for rightward travel, -1 for leftward.
ControlInput track_line(const VehicleState& state, double y_ref, double dir, double target_speed,
                        const VehicleParams& params, const ScenarioConfig& tuning);

// Ego lateral reference for the overtaking scenario: the adjacent lane while
// the slower vehicle has not been fully cleared, the own lane afterwards.
double overtaking_reference_y(const VehicleState& ego, const VehicleState& other,
                              const VehicleParams& params, const ScenarioConfig& config);

struct ObstructionState {
    int count = 0;
    bool active = false;
    double phase_until = 0.0;  // end of the current block / cooldown window
    double y_cmd = 0.0;
};

// Scripted obstruction: when the gap to the approaching ego falls below the
// trigger, mirror the ego's lateral position (clamped to the two lanes) for a
// fixed duration, then return to the own lane; at most obstruction_limit
// times, afterwards hold the own lane.
double obstruction_policy(ObstructionState& st, double t, const VehicleState& ego,
                          const VehicleState& other, const ScenarioConfig& config);

struct BypassPhase {
    int stage = 0;  // 0 approach, 1 evade, 2 recover
};

void bypassing_reference(BypassPhase& phase, const VehicleState& state_i,
                         const VehicleState& state_j, const ScenarioConfig& config, double& y_i,
                         double& y_j);

SimLog run_scenario(const ScenarioConfig& config, const MlpParams* net,
                    const VehicleParams& params);

Metrics compute_metrics(const SimLog& log, const VehicleParams& params);

// Column layout: t, xi, yi, psii, vi, deltai, xj, yj, psij, vj, deltaj,
// unom_vi, unom_di, unom_vj, unom_dj, u_vi, u_di, u_vj, u_dj, h, mtv_exact,
// c2c_exact, psi1, psi2, qp_status, qp_ms.
void write_csv(const SimLog& log, const std::string& path);

std::string metrics_summary(const Metrics& metrics, const ScenarioConfig& config);

}  // namespace mtvcbf
