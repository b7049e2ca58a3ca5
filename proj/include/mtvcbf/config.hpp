#pragma once
#include <map>
#include <string>

#include "mtvcbf/margin_net.hpp"
#include "mtvcbf/scenario.hpp"

namespace mtvcbf {

// Flat key-value configuration with [section] headers; keys address values as
// "section.key". '#' starts a comment. Unknown keys are preserved so tools
// can echo the resolved configuration into run manifests.
class Config {
  public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text, const std::string& name = "<string>");

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& all() const { return values_; }

  private:
    std::map<std::string, std::string> values_;
    std::string origin_;

    [[noreturn]] void fail(const std::string& key, const std::string& what) const;
};

VehicleParams vehicle_params_from(const Config& cfg);
CbfConfig cbf_config_from(const Config& cfg);
ScenarioConfig scenario_config_from(const Config& cfg);
TrainingConfig training_config_from(const Config& cfg);

}  // namespace mtvcbf
