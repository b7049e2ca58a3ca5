#include "mtvcbf/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mtvcbf {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_string(const std::string& text, const std::string& name) {
    Config cfg;
    cfg.origin_ = name;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error(name + ":" + std::to_string(line_no) +
                                         ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(name + ":" + std::to_string(line_no) +
                                     ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error(name + ":" + std::to_string(line_no) + ": empty key");
        cfg.values_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

void Config::fail(const std::string& key, const std::string& what) const {
    throw std::runtime_error("config " + origin_ + ": key '" + key + "': " + what);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) fail(key, "trailing characters in number");
        return v;
    } catch (const std::invalid_argument&) {
        fail(key, "not a number: " + it->second);
    } catch (const std::out_of_range&) {
        fail(key, "number out of range: " + it->second);
    }
}

int Config::get_int(const std::string& key, int fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t pos = 0;
        const long v = std::stol(it->second, &pos);
        if (pos != it->second.size()) fail(key, "trailing characters in integer");
        return static_cast<int>(v);
    } catch (const std::invalid_argument&) {
        fail(key, "not an integer: " + it->second);
    } catch (const std::out_of_range&) {
        fail(key, "integer out of range: " + it->second);
    }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t pos = 0;
        const unsigned long long v = std::stoull(it->second, &pos);
        if (pos != it->second.size()) fail(key, "trailing characters in integer");
        return v;
    } catch (const std::invalid_argument&) {
        fail(key, "not an integer: " + it->second);
    } catch (const std::out_of_range&) {
        fail(key, "integer out of range: " + it->second);
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail(key, "not a boolean: " + v);
}

VehicleParams vehicle_params_from(const Config& cfg) {
    VehicleParams p;
    p.length = cfg.get_double("vehicle.length", p.length);
    p.width = cfg.get_double("vehicle.width", p.width);
    p.wheelbase = cfg.get_double("vehicle.wheelbase", p.wheelbase);
    p.rear_wheelbase = cfg.get_double("vehicle.rear_wheelbase", p.rear_wheelbase);
    p.accel_min = cfg.get_double("vehicle.accel_min", p.accel_min);
    p.accel_max = cfg.get_double("vehicle.accel_max", p.accel_max);
    p.steer_rate_min = cfg.get_double("vehicle.steer_rate_min", p.steer_rate_min);
    p.steer_rate_max = cfg.get_double("vehicle.steer_rate_max", p.steer_rate_max);
    p.steer_clamp = cfg.get_double("vehicle.steer_clamp", p.steer_clamp);
    p.validate();
    return p;
}

CbfConfig cbf_config_from(const Config& cfg) {
    CbfConfig c;
    c.k_alpha = cfg.get_double("cbf.k_alpha", c.k_alpha);
    c.epsilon = cfg.get_double("cbf.epsilon", 0.0128);
    c.margin_mode = margin_mode_from_string(cfg.get_string("cbf.margin_mode", "hybrid"));
    const VehicleParams vp = vehicle_params_from(cfg);
    c.hybrid_range = cfg.get_double("cbf.hybrid_range", 3.0 * vp.wheelbase);
    c.validate();
    return c;
}

ScenarioConfig scenario_config_from(const Config& cfg) {
    ScenarioConfig s;
    s.kind = scenario_kind_from_string(cfg.get_string("scenario.kind", "bypassing"));

    // Mode-dependent defaults follow the experiment tuning; explicit keys win.
    if (s.kind == ScenarioKind::overtaking) {
        s.horizon = 10.0;
        s.filter_scope = FilterScope::ego_only;
        s.speed_i = 1.0;
        s.speed_j = 0.5;
        s.start_xi = -1.2;
        s.start_xj = -0.4;
        s.cbf.k_alpha = 2.0;
        s.road_edges = true;
    } else {
        s.horizon = 6.0;
        s.filter_scope = FilterScope::joint;
        s.speed_i = 1.0;
        s.speed_j = 1.0;
        s.start_xi = -1.2;
        s.start_xj = 1.2;
    }

    s.cbf = cbf_config_from(cfg);
    if (s.kind == ScenarioKind::overtaking && !cfg.has("cbf.k_alpha")) s.cbf.k_alpha = 2.0;
    if (s.kind == ScenarioKind::bypassing && !cfg.has("cbf.k_alpha"))
        s.cbf.k_alpha = s.cbf.margin_mode == MarginMode::c2c ? 3.0 : 6.0;
    if (s.kind == ScenarioKind::bypassing && !cfg.has("scenario.y_nom"))
        s.y_nom = s.cbf.margin_mode == MarginMode::c2c ? 0.116 : 0.072;

    s.dt = cfg.get_double("scenario.dt", s.dt);
    s.horizon = cfg.get_double("scenario.horizon", s.horizon);
    if (cfg.has("scenario.filter_scope"))
        s.filter_scope = filter_scope_from_string(cfg.get_string("scenario.filter_scope", ""));
    s.filter_enabled = cfg.get_bool("scenario.filter", true);
    s.speed_i = cfg.get_double("scenario.speed_i", s.speed_i);
    s.speed_j = cfg.get_double("scenario.speed_j", s.speed_j);
    s.start_xi = cfg.get_double("scenario.start_xi", s.start_xi);
    s.start_xj = cfg.get_double("scenario.start_xj", s.start_xj);
    s.lane_width = cfg.get_double("scenario.lane_width", s.lane_width);
    s.road_edges = cfg.get_bool("scenario.road_edges", s.road_edges);
    s.road_y_min = cfg.get_double("scenario.road_y_min", s.road_y_min);
    s.road_y_max = cfg.get_double("scenario.road_y_max", s.road_y_max);
    s.road_clearance = cfg.get_double("scenario.road_clearance", s.road_clearance);
    s.obstruction_trigger = cfg.get_double("scenario.obstruction_trigger", s.obstruction_trigger);
    s.obstruction_limit = cfg.get_int("scenario.obstruction_limit", s.obstruction_limit);
    s.obstruction_duration =
        cfg.get_double("scenario.obstruction_duration", s.obstruction_duration);
    s.obstruction_cooldown =
        cfg.get_double("scenario.obstruction_cooldown", s.obstruction_cooldown);
    s.overtake_clear = cfg.get_double("scenario.overtake_clear", s.overtake_clear);
    s.y_nom = cfg.get_double("scenario.y_nom", s.y_nom);
    s.approach_trigger = cfg.get_double("scenario.approach_trigger", s.approach_trigger);
    s.pass_clear = cfg.get_double("scenario.pass_clear", s.pass_clear);
    s.recenter_tol = cfg.get_double("scenario.recenter_tol", s.recenter_tol);
    s.lookahead = cfg.get_double("scenario.lookahead", s.lookahead);
    s.speed_gain = cfg.get_double("scenario.speed_gain", s.speed_gain);
    s.steer_gain = cfg.get_double("scenario.steer_gain", s.steer_gain);
    s.validate();
    return s;
}

TrainingConfig training_config_from(const Config& cfg) {
    TrainingConfig t;
    t.seed = cfg.get_u64("train.seed", t.seed);
    t.batch_size = cfg.get_int("train.batch", t.batch_size);
    t.learning_rate = cfg.get_double("train.learning_rate", t.learning_rate);
    t.max_epochs = cfg.get_int("train.max_epochs", t.max_epochs);
    t.val_split = cfg.get_double("train.val_split", t.val_split);
    t.patience = cfg.get_int("train.patience", t.patience);
    t.lr_step_epochs = cfg.get_int("train.lr_step_epochs", t.lr_step_epochs);
    t.lr_decay = cfg.get_double("train.lr_decay", t.lr_decay);
    t.min_learning_rate = cfg.get_double("train.min_learning_rate", t.min_learning_rate);
    t.target_val_max_abs = cfg.get_double("train.target_val_max_abs", t.target_val_max_abs);
    t.target_val_mse = cfg.get_double("train.target_val_mse", t.target_val_mse);
    t.init_gain = cfg.get_double("train.init_gain", t.init_gain);
    t.parallel = cfg.get_bool("train.parallel", t.parallel);
    const int hidden = cfg.get_int("train.hidden_width", 62);
    t.dims = {3, hidden, hidden, 1};
    return t;
}

}  // namespace mtvcbf
