// Command-line frontend: dataset generation, training, error-bound
// estimation, scenario runs and mode comparisons.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "mtvcbf/config.hpp"
#include "mtvcbf/manifest.hpp"
#include "mtvcbf/margin_net.hpp"
#include "mtvcbf/scenario.hpp"

namespace fs = std::filesystem;
using namespace mtvcbf;

namespace {

Config load_config(const std::string& path) {
    if (path.empty()) return Config::parse_string("", "<default>");
    return Config::parse_file(path);
}

void add_config_entries(Manifest& m, const Config& cfg) {
    for (const auto& [key, value] : cfg.all()) m.add("config." + key, value);
}

std::string hex(std::uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

MlpParams load_model_checked(const std::string& path, const Config& cfg) {
    if (path.empty()) throw std::runtime_error("a model file is required (--model PATH)");
    if (!fs::exists(path)) throw std::runtime_error("model file not found: " + path);
    MlpParams net = load_model(path);
    const TrainingConfig tc = training_config_from(cfg);
    if (net.dims != tc.dims) {
        std::string want, got;
        for (int d : tc.dims) want += std::to_string(d) + " ";
        for (int d : net.dims) got += std::to_string(d) + " ";
        throw std::runtime_error("model dims [" + got + "] do not match configured [" + want +
                                 "]");
    }
    return net;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_flag) {
    const Config cfg = load_config(config_path);
    const VehicleParams vp = vehicle_params_from(cfg);
    const int count = cfg.get_int("dataset.count", 70000);
    const std::uint64_t seed = seed_flag.value_or(cfg.get_u64("dataset.seed", 1));
    const double halfwidth = cfg.get_double("dataset.xy_halfwidth", 3.0 * vp.wheelbase);

    fs::create_directories(out_dir);
    const std::string data_path = out_dir + "/dataset.txt";
    const std::string manifest_path = out_dir + "/manifest.txt";

    Manifest m;
    m.command = "gen-data";
    add_config_entries(m, cfg);
    m.add("dataset.count", std::to_string(count));
    m.add("dataset.seed", std::to_string(seed));
    m.add("dataset.xy_halfwidth", std::to_string(halfwidth));
    m.add("output.dataset", data_path);
    m.write(manifest_path);

    const Dataset data = generate_dataset(halfwidth, count, seed, vp);
    save_dataset(data, data_path);

    m.add("hash.dataset", hex(hash_file(data_path)));
    m.write(manifest_path);
    std::cout << "wrote " << data.size() << " samples to " << data_path << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_dir, std::optional<std::uint64_t> seed_flag) {
    const Config cfg = load_config(config_path);
    TrainingConfig tc = training_config_from(cfg);
    if (seed_flag) tc.seed = *seed_flag;
    if (data_path.empty()) throw std::runtime_error("a dataset file is required (--data PATH)");
    const Dataset data = load_dataset(data_path);

    fs::create_directories(out_dir);
    const std::string model_path = out_dir + "/model.txt";
    const std::string report_path = out_dir + "/train_report.txt";
    const std::string manifest_path = out_dir + "/manifest.txt";

    Manifest m;
    m.command = "train";
    add_config_entries(m, cfg);
    m.add("train.seed", std::to_string(tc.seed));
    m.add("input.dataset", data_path);
    m.add("hash.input_dataset", hex(hash_file(data_path)));
    m.add("output.model", model_path);
    m.write(manifest_path);

    TrainReport report;
    const MlpParams net = train(data, tc, &report);
    save_model(net, model_path);

    if (tc.max_epochs <= 0)
        std::cerr << "warning: zero-epoch budget, the saved model is untrained\n";
    if (!report.converged)
        std::cerr << "warning: training targets not reached within the epoch budget"
                  << " (val mse " << report.best_val_mse << ", val max "
                  << report.best_val_max_abs << ")\n";

    {
        std::ofstream rep(report_path);
        rep << "epochs_run = " << report.epochs_run << "\n"
            << "final_train_mse = " << report.final_train_mse << "\n"
            << "final_val_mse = " << report.final_val_mse << "\n"
            << "best_val_mse = " << report.best_val_mse << "\n"
            << "best_val_max_abs_m = " << report.best_val_max_abs << "\n"
            << "converged = " << (report.converged ? "yes" : "no") << "\n"
            << "wall_seconds = " << report.wall_seconds << "\n";
    }

    m.add("hash.model", hex(hash_file(model_path)));
    m.add("report.epochs_run", std::to_string(report.epochs_run));
    m.write(manifest_path);
    std::cout << "trained " << report.epochs_run << " epochs in " << report.wall_seconds
              << " s; model at " << model_path << "\n";
    // converged is true whenever no quality target was configured
    return report.converged ? 0 : 1;
}

int cmd_eval_bound(const std::string& config_path, const std::string& model_path,
                   const std::string& out_dir, std::optional<std::uint64_t> seed_flag) {
    const Config cfg = load_config(config_path);
    const VehicleParams vp = vehicle_params_from(cfg);
    const MlpParams net = load_model_checked(model_path, cfg);
    const int count = cfg.get_int("bound.count", 100000);
    const std::uint64_t seed = seed_flag.value_or(cfg.get_u64("bound.seed", 7));

    fs::create_directories(out_dir);
    const std::string report_path = out_dir + "/bound_report.txt";
    const std::string manifest_path = out_dir + "/manifest.txt";

    Manifest m;
    m.command = "eval-bound";
    add_config_entries(m, cfg);
    m.add("bound.count", std::to_string(count));
    m.add("bound.seed", std::to_string(seed));
    m.add("input.model", model_path);
    m.add("hash.input_model", hex(hash_file(model_path)));
    m.write(manifest_path);

    const ErrorBound bound = estimate_error_bound(net, count, seed, vp);
    {
        std::ofstream rep(report_path);
        rep << "eval_count = " << bound.eval_count << "\n"
            << "seed = " << bound.seed << "\n"
            << "epsilon_max_m = " << bound.epsilon_max << "\n"
            << "epsilon_mean_m = " << bound.epsilon_mean << "\n"
            << "epsilon_max_pct_width = " << bound.epsilon_max / vp.width * 100.0 << "\n"
            << "epsilon_mean_pct_width = " << bound.epsilon_mean / vp.width * 100.0 << "\n";
    }
    m.add("hash.report", hex(hash_file(report_path)));
    m.write(manifest_path);
    std::cout << "epsilon_max = " << bound.epsilon_max << " m ("
              << bound.epsilon_max / vp.width * 100.0 << " % of width), epsilon_mean = "
              << bound.epsilon_mean << " m over " << count << " samples\n";
    return 0;
}

SimLog run_from_config(const Config& cfg, const std::string& model_path, bool no_filter) {
    const VehicleParams vp = vehicle_params_from(cfg);
    ScenarioConfig sc = scenario_config_from(cfg);
    if (no_filter) sc.filter_enabled = false;

    std::optional<MlpParams> net;
    if (sc.cbf.margin_mode != MarginMode::c2c) net = load_model_checked(model_path, cfg);
    return run_scenario(sc, net ? &*net : nullptr, vp);
}

int cmd_run(const std::string& config_path, const std::string& model_path,
            const std::string& out_dir, bool no_filter) {
    const Config cfg = load_config(config_path);
    const VehicleParams vp = vehicle_params_from(cfg);

    fs::create_directories(out_dir);
    const std::string csv_path = out_dir + "/log.csv";
    const std::string metrics_path = out_dir + "/metrics.txt";
    const std::string manifest_path = out_dir + "/manifest.txt";

    Manifest m;
    m.command = "run";
    add_config_entries(m, cfg);
    m.add("run.no_filter", no_filter ? "true" : "false");
    if (!model_path.empty()) m.add("input.model", model_path);
    m.add("output.log", csv_path);
    m.add("output.metrics", metrics_path);
    m.write(manifest_path);

    const SimLog log = run_from_config(cfg, model_path, no_filter);
    write_csv(log, csv_path);
    const Metrics metrics = compute_metrics(log, vp);
    {
        std::ofstream rep(metrics_path);
        rep << metrics_summary(metrics, log.config);
    }

    m.add("hash.log", hex(hash_csv_excluding(csv_path, {"qp_ms"})));
    m.add("hash.metrics_present", "1");
    m.write(manifest_path);

    std::cout << metrics_summary(metrics, log.config);
    if (log.aborted) {
        std::cerr << "run aborted: " << log.abort_reason << "\n";
        return 1;
    }
    return 0;
}

int cmd_compare(const std::string& config_a, const std::string& config_b,
                const std::string& model_path, const std::string& out_dir) {
    const Config cfg_a = load_config(config_a);
    const Config cfg_b = load_config(config_b);
    const ScenarioConfig sa = scenario_config_from(cfg_a);
    const ScenarioConfig sb = scenario_config_from(cfg_b);
    if (sa.kind != sb.kind)
        throw std::runtime_error(std::string("compare: scenario kinds differ (") +
                                 to_string(sa.kind) + " vs " + to_string(sb.kind) + ")");

    fs::create_directories(out_dir);
    const std::string table_path = out_dir + "/compare.txt";
    const std::string manifest_path = out_dir + "/manifest.txt";

    Manifest m;
    m.command = "compare";
    m.add("config_a", config_a);
    m.add("config_b", config_b);
    m.add("output.table", table_path);
    m.write(manifest_path);

    const SimLog log_a = run_from_config(cfg_a, model_path, false);
    const SimLog log_b = run_from_config(cfg_b, model_path, false);
    const VehicleParams vp = vehicle_params_from(cfg_a);
    const Metrics ma = compute_metrics(log_a, vp);
    const Metrics mb = compute_metrics(log_b, vp);

    std::ostringstream table;
    const auto row = [&table](const std::string& name, const std::string& a,
                              const std::string& b) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-26s %18s %18s\n", name.c_str(), a.c_str(), b.c_str());
        table << buf;
    };
    const auto numf = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.4g", v);
        return std::string(buf);
    };
    row("metric", std::string("A:") + to_string(log_a.config.cbf.margin_mode),
        std::string("B:") + to_string(log_b.config.cbf.margin_mode));
    row("k_alpha", numf(log_a.config.cbf.k_alpha), numf(log_b.config.cbf.k_alpha));
    row("min_exact_margin_m", numf(ma.min_exact_margin), numf(mb.min_exact_margin));
    row("completed", ma.completed ? "yes" : "no", mb.completed ? "yes" : "no");
    row("completion_time_s", numf(ma.completion_time), numf(mb.completion_time));
    row("mean_evasion_pct", numf(0.5 * (ma.max_evasion_i_pct + ma.max_evasion_j_pct)),
        numf(0.5 * (mb.max_evasion_i_pct + mb.max_evasion_j_pct)));
    row("mean_qp_ms", numf(ma.mean_qp_ms), numf(mb.mean_qp_ms));
    row("relaxed_steps", std::to_string(ma.relaxed_steps), std::to_string(mb.relaxed_steps));

    {
        std::ofstream rep(table_path);
        rep << table.str();
    }
    m.add("hash.table", hex(hash_file(table_path)));
    m.write(manifest_path);
    std::cout << table.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heading-aware safety-margin CBF toolkit"};
    app.require_subcommand(1);

    std::string config_path, config_path_b, model_path, data_path, out_dir = "out";
    std::optional<std::uint64_t> seed;
    bool no_filter = false;

    auto* gen = app.add_subcommand("gen-data", "sample relative poses and margins");
    gen->add_option("--config", config_path, "config file");
    gen->add_option("--out", out_dir, "output directory");
    gen->add_option("--seed", seed, "override dataset seed");

    auto* tr = app.add_subcommand("train", "train the margin predictor");
    tr->add_option("--config", config_path, "config file");
    tr->add_option("--data", data_path, "dataset file")->required();
    tr->add_option("--out", out_dir, "output directory");
    tr->add_option("--seed", seed, "override training seed");

    auto* ev = app.add_subcommand("eval-bound", "estimate the approximation error bound");
    ev->add_option("--config", config_path, "config file");
    ev->add_option("--model", model_path, "model file")->required();
    ev->add_option("--out", out_dir, "output directory");
    ev->add_option("--seed", seed, "override evaluation seed");

    auto* run = app.add_subcommand("run", "closed-loop scenario run");
    run->add_option("--config", config_path, "config file");
    run->add_option("--model", model_path, "model file (learned/hybrid modes)");
    run->add_option("--out", out_dir, "output directory");
    run->add_flag("--no-filter", no_filter, "apply the nominal inputs unfiltered");

    auto* cmp = app.add_subcommand("compare", "run two configs of the same scenario kind");
    cmp->add_option("--config", config_path, "first config file")->required();
    cmp->add_option("--config2", config_path_b, "second config file")->required();
    cmp->add_option("--model", model_path, "model file (learned/hybrid modes)");
    cmp->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, out_dir, seed);
        if (tr->parsed()) return cmd_train(config_path, data_path, out_dir, seed);
        if (ev->parsed()) return cmd_eval_bound(config_path, model_path, out_dir, seed);
        if (run->parsed()) return cmd_run(config_path, model_path, out_dir, no_filter);
        if (cmp->parsed()) return cmd_compare(config_path, config_path_b, model_path, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
