#include "mtvcbf/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mtvcbf/geometry.hpp"

namespace mtvcbf {

ScenarioKind scenario_kind_from_string(const std::string& name) {
    if (name == "overtaking") return ScenarioKind::overtaking;
    if (name == "bypassing") return ScenarioKind::bypassing;
    throw std::invalid_argument("unknown scenario kind: " + name);
}

const char* to_string(ScenarioKind kind) {
    return kind == ScenarioKind::overtaking ? "overtaking" : "bypassing";
}

void ScenarioConfig::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("ScenarioConfig: dt must be positive");
    if (!(horizon > 0.0)) throw std::invalid_argument("ScenarioConfig: horizon must be positive");
    if (road_edges && !(road_y_min < road_y_max))
        throw std::invalid_argument("ScenarioConfig: road bounds must satisfy min < max");
    cbf.validate();
}

ControlInput track_line(const VehicleState& state, double y_ref, double dir, double target_speed,
                        const VehicleParams& params, const ScenarioConfig& tuning) {
    const double e_y = y_ref - state.y;
    const double lookahead = tuning.lookahead;
    // Lookahead point on the line, ahead in the direction of travel.
    const double along = std::sqrt(std::max(lookahead * lookahead - e_y * e_y,
                                            0.09 * lookahead * lookahead));
    const double alpha = wrap_angle(std::atan2(e_y, dir * along) - state.psi);
    const double curvature = 2.0 * std::sin(alpha) / lookahead;
    const double delta_des =
        std::clamp(std::atan(params.wheelbase * curvature), -params.steer_clamp, params.steer_clamp);

    ControlInput u;
    u.accel = std::clamp(tuning.speed_gain * (target_speed - state.v), params.accel_min,
                         params.accel_max);
    u.steer_rate = std::clamp(tuning.steer_gain * (delta_des - state.delta),
                              params.steer_rate_min, params.steer_rate_max);
    return u;
}

double overtaking_reference_y(const VehicleState& ego, const VehicleState& other,
                              const VehicleParams& params, const ScenarioConfig& config) {
    const bool cleared = ego.x - other.x > params.length + config.overtake_clear;
    return cleared ? 0.0 : config.lane_width;
}

double obstruction_policy(ObstructionState& st, double t, const VehicleState& ego,
                          const VehicleState& other, const ScenarioConfig& config) {
    if (st.active && t >= st.phase_until) {
        // Block over; return to the own lane and rest for the cooldown.
        st.active = false;
        st.y_cmd = 0.0;
        st.phase_until = t + config.obstruction_cooldown;
    }
    if (!st.active && st.count < config.obstruction_limit && t >= st.phase_until) {
        const double gap = other.x - ego.x;
        if (gap > 0.0 && gap < config.obstruction_trigger) {
            st.active = true;
            st.phase_until = t + config.obstruction_duration;
            ++st.count;
        }
    }
    if (st.active) {
        // While blocking, mirror the approaching vehicle's lateral position
        // so it cannot simply slip past; the mirror stays near the road.
        st.y_cmd = std::clamp(ego.y, -0.5 * config.lane_width, 2.0 * config.lane_width);
    }
    return st.y_cmd;
}

void bypassing_reference(BypassPhase& phase, const VehicleState& state_i,
                         const VehicleState& state_j, const ScenarioConfig& config, double& y_i,
                         double& y_j) {
    if (phase.stage == 0 && state_j.x - state_i.x < config.approach_trigger) phase.stage = 1;
    if (phase.stage == 1 && state_i.x > state_j.x + config.pass_clear) phase.stage = 2;
    if (phase.stage == 1) {
        y_i = config.y_nom;
        y_j = -config.y_nom;
    } else {
        y_i = 0.0;
        y_j = 0.0;
    }
}

namespace {

OrientedRectangle footprint(const VehicleState& s, const VehicleParams& p) {
    return OrientedRectangle(s.x, s.y, s.psi, p.length, p.width);
}

Vec4 clamp_to_box(const Vec4& u, const VehicleParams& p) {
    return {std::clamp(u[0], p.accel_min, p.accel_max),
            std::clamp(u[1], p.steer_rate_min, p.steer_rate_max),
            std::clamp(u[2], p.accel_min, p.accel_max),
            std::clamp(u[3], p.steer_rate_min, p.steer_rate_max)};
}

// Pair constraint plus road-edge rows for every filtered vehicle, one QP.
PairFilterResult filter_step_with_road(const VehicleState& vi, const VehicleState& vj,
                                       const Vec4& u_nom, const ScenarioConfig& config,
                                       const MlpParams* net, const VehicleParams& params) {
    PairFilterResult out;
    const auto t0 = std::chrono::steady_clock::now();
    out.constraint = constraint_coefficients(vi, vj, config.cbf, net, params);

    QpProblem p = make_identity_qp(4);
    p.u_nom = {u_nom[0], u_nom[1], u_nom[2], u_nom[3]};
    p.u_min = {params.accel_min, params.steer_rate_min, params.accel_min, params.steer_rate_min};
    p.u_max = {params.accel_max, params.steer_rate_max, params.accel_max, params.steer_rate_max};
    {
        LinearConstraint c;
        c.a = {out.constraint.a[0], out.constraint.a[1], out.constraint.a[2], out.constraint.a[3]};
        c.b = out.constraint.b;
        p.ineqs.push_back(std::move(c));
    }
    const auto add_edges = [&](const VehicleState& s, int slot) {
        for (const bool upper : {false, true}) {
            const LateralBoundConstraint edge = lateral_bound_constraint(
                s, upper ? config.road_y_max : config.road_y_min, config.road_clearance, upper,
                config.cbf.k_alpha, params);
            LinearConstraint c;
            c.a.assign(4, 0.0);
            c.a[static_cast<size_t>(2 * slot)] = edge.a[0];
            c.a[static_cast<size_t>(2 * slot + 1)] = edge.a[1];
            c.b = edge.b;
            p.ineqs.push_back(std::move(c));
        }
    };
    add_edges(vi, 0);
    if (config.filter_scope == FilterScope::joint) add_edges(vj, 1);
    if (config.filter_scope == FilterScope::ego_only) p.free_mask = {1, 1, 0, 0};

    const auto t1 = std::chrono::steady_clock::now();
    out.qp = solve_qp(p);
    const auto t2 = std::chrono::steady_clock::now();
    out.build_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    out.solve_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
    return out;
}

}  // namespace

SimLog run_scenario(const ScenarioConfig& config, const MlpParams* net,
                    const VehicleParams& params) {
    config.validate();
    params.validate();

    SimLog log;
    log.config = config;

    VehicleState vi, vj;
    double dir_i = 1.0, dir_j = 1.0;
    if (config.kind == ScenarioKind::overtaking) {
        vi = {config.start_xi, 0.0, 0.0, config.speed_i, 0.0};
        vj = {config.start_xj, 0.0, 0.0, config.speed_j, 0.0};
    } else {
        vi = {config.start_xi, 0.0, 0.0, config.speed_i, 0.0};
        vj = {config.start_xj, 0.0, 3.141592653589793238, config.speed_j, 0.0};
        dir_j = -1.0;
    }

    ObstructionState obstruction;
    BypassPhase bypass;

    const int n_steps = static_cast<int>(std::llround(config.horizon / config.dt));
    log.steps.reserve(static_cast<size_t>(n_steps));

    for (int step = 0; step < n_steps; ++step) {
        const double t = step * config.dt;

        double y_ref_i = 0.0, y_ref_j = 0.0;
        if (config.kind == ScenarioKind::overtaking) {
            y_ref_i = overtaking_reference_y(vi, vj, params, config);
            y_ref_j = obstruction_policy(obstruction, t, vi, vj, config);
        } else {
            bypassing_reference(bypass, vi, vj, config, y_ref_i, y_ref_j);
        }

        const ControlInput nom_i = track_line(vi, y_ref_i, dir_i, config.speed_i, params, config);
        const ControlInput nom_j = track_line(vj, y_ref_j, dir_j, config.speed_j, params, config);
        const Vec4 u_nom{nom_i.accel, nom_i.steer_rate, nom_j.accel, nom_j.steer_rate};

        StepRecord rec;
        rec.t = t;
        rec.state_i = vi;
        rec.state_j = vj;
        rec.u_nom = u_nom;

        if (config.filter_enabled) {
            const PairFilterResult fr = config.road_edges
                                            ? filter_step_with_road(vi, vj, u_nom, config, net, params)
                                            : filter_pair(vi, vj, u_nom, config.cbf, net, params,
                                                          config.filter_scope);
            rec.qp_ms = fr.solve_ms;
            rec.filter_ms = fr.build_ms + fr.solve_ms;
            rec.filtered = true;
            rec.qp_status = fr.qp.status;
            rec.u_safe = {fr.qp.u[0], fr.qp.u[1], fr.qp.u[2], fr.qp.u[3]};
            rec.h = fr.constraint.h;
            rec.mode_used = fr.constraint.mode_used;
            rec.psi1 = fr.constraint.h_dot + config.cbf.k_alpha * fr.constraint.h;
            rec.psi2 = dot(fr.constraint.a, rec.u_safe) + fr.constraint.b;
        } else {
            rec.filtered = false;
            rec.qp_status = QpStatus::optimal;
            rec.u_safe = clamp_to_box(u_nom, params);
            // Constraint quantities are still logged for analysis.
            const CbfConstraint cons = constraint_coefficients(vi, vj, config.cbf, net, params);
            rec.h = cons.h;
            rec.mode_used = cons.mode_used;
            rec.psi1 = cons.h_dot + config.cbf.k_alpha * cons.h;
            rec.psi2 = dot(cons.a, rec.u_safe) + cons.b;
        }

        rec.mtv_exact = mtv_margin(footprint(vi, params), footprint(vj, params)).value;
        {
            const RelativeState rel = to_ego_frame(vi, vj);
            rec.c2c_exact = c2c_margin(rel.x, rel.y, params.length, params.width);
        }
        log.steps.push_back(rec);

        if (config.filter_enabled && rec.qp_status == QpStatus::error) {
            log.aborted = true;
            log.abort_reason = "qp error at t=" + std::to_string(t);
            break;
        }

        vi = integrate_step(vi, ControlInput{rec.u_safe[0], rec.u_safe[1]}, config.dt, params);
        vj = integrate_step(vj, ControlInput{rec.u_safe[2], rec.u_safe[3]}, config.dt, params);
    }
    return log;
}

Metrics compute_metrics(const SimLog& log, const VehicleParams& params) {
    if (log.steps.empty()) throw std::invalid_argument("compute_metrics: empty log");
    const ScenarioConfig& config = log.config;

    Metrics m;
    m.total_steps = static_cast<int>(log.steps.size());
    m.min_exact_margin = log.steps.front().mtv_exact;
    m.completion_time = config.horizon;

    double qp_sum = 0.0, filter_sum = 0.0;
    int qp_count = 0;
    for (const StepRecord& rec : log.steps) {
        m.min_exact_margin = std::min(m.min_exact_margin, rec.mtv_exact);
        m.max_evasion_i_pct =
            std::max(m.max_evasion_i_pct, std::abs(rec.state_i.y) / params.width * 100.0);
        m.max_evasion_j_pct =
            std::max(m.max_evasion_j_pct, std::abs(rec.state_j.y) / params.width * 100.0);
        if (rec.filtered) {
            qp_sum += rec.qp_ms;
            filter_sum += rec.filter_ms;
            ++qp_count;
            m.max_qp_ms = std::max(m.max_qp_ms, rec.qp_ms);
            if (rec.qp_status == QpStatus::relaxed) ++m.relaxed_steps;
            if (rec.qp_status == QpStatus::error) ++m.error_steps;
        }

        if (!m.completed) {
            bool done = false;
            if (config.kind == ScenarioKind::overtaking) {
                done = rec.state_i.x - rec.state_j.x > params.length;
            } else {
                done = rec.state_i.x > rec.state_j.x &&
                       std::abs(rec.state_i.y) <= config.recenter_tol &&
                       std::abs(rec.state_j.y) <= config.recenter_tol;
            }
            if (done) {
                m.completed = true;
                m.completion_time = rec.t;
            }
        }
    }
    if (qp_count > 0) {
        m.mean_qp_ms = qp_sum / qp_count;
        m.mean_filter_ms = filter_sum / qp_count;
    }
    return m;
}

void write_csv(const SimLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    out << "t,xi,yi,psii,vi,deltai,xj,yj,psij,vj,deltaj,"
           "unom_vi,unom_di,unom_vj,unom_dj,u_vi,u_di,u_vj,u_dj,"
           "h,mtv_exact,c2c_exact,psi1,psi2,qp_status,qp_ms\n";
    char buf[64];
    const auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        return std::string(buf);
    };
    for (const StepRecord& r : log.steps) {
        out << num(r.t) << ',' << num(r.state_i.x) << ',' << num(r.state_i.y) << ','
            << num(r.state_i.psi) << ',' << num(r.state_i.v) << ',' << num(r.state_i.delta) << ','
            << num(r.state_j.x) << ',' << num(r.state_j.y) << ',' << num(r.state_j.psi) << ','
            << num(r.state_j.v) << ',' << num(r.state_j.delta) << ',' << num(r.u_nom[0]) << ','
            << num(r.u_nom[1]) << ',' << num(r.u_nom[2]) << ',' << num(r.u_nom[3]) << ','
            << num(r.u_safe[0]) << ',' << num(r.u_safe[1]) << ',' << num(r.u_safe[2]) << ','
            << num(r.u_safe[3]) << ',' << num(r.h) << ',' << num(r.mtv_exact) << ','
            << num(r.c2c_exact) << ',' << num(r.psi1) << ',' << num(r.psi2) << ','
            << (r.filtered ? to_string(r.qp_status) : "skipped") << ',' << num(r.qp_ms) << '\n';
    }
    if (!out) throw std::runtime_error("write_csv: write failed for " + path);
}

std::string metrics_summary(const Metrics& metrics, const ScenarioConfig& config) {
    std::ostringstream out;
    out << "scenario = " << to_string(config.kind) << "\n"
        << "margin_mode = " << to_string(config.cbf.margin_mode) << "\n"
        << "k_alpha = " << config.cbf.k_alpha << "\n"
        << "filter = " << (config.filter_enabled ? to_string(config.filter_scope) : "off") << "\n"
        << "steps = " << metrics.total_steps << "\n"
        << "min_exact_margin_m = " << metrics.min_exact_margin << "\n"
        << "completed = " << (metrics.completed ? "yes" : "no") << "\n"
        << "completion_time_s = " << metrics.completion_time << "\n"
        << "max_evasion_i_pct = " << metrics.max_evasion_i_pct << "\n"
        << "max_evasion_j_pct = " << metrics.max_evasion_j_pct << "\n"
        << "mean_evasion_pct = "
        << 0.5 * (metrics.max_evasion_i_pct + metrics.max_evasion_j_pct) << "\n"
        << "mean_qp_ms = " << metrics.mean_qp_ms << "\n"
        << "mean_filter_ms = " << metrics.mean_filter_ms << "\n"
        << "max_qp_ms = " << metrics.max_qp_ms << "\n"
        << "relaxed_steps = " << metrics.relaxed_steps << "\n"
        << "error_steps = " << metrics.error_steps << "\n";
    return out.str();
}

}  // namespace mtvcbf
