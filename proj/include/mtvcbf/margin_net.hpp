#pragma once
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtvcbf/mlp.hpp"
#include "mtvcbf/vehicle.hpp"

namespace mtvcbf {

// Relative-pose samples with margin targets.
struct Dataset {
    std::vector<Vec3> inputs;      // (x_rel, y_rel, psi_rel)
    std::vector<double> targets;   // margin [m]
    double xy_halfwidth = 0.48;    // sampling box, x/y in [-hw, hw], psi in [-pi, pi]

    size_t size() const { return inputs.size(); }
};

// ============================================================
// Bulk kernels. Each runs the same arithmetic serially or under
// OpenMP; outputs are written to disjoint slots so the parallel
// path is bit-identical to the serial reference.
// ============================================================

// Margin of a pose-offset rectangle against an identical one at the origin.
void margin_batch(const VehicleParams& dims, std::span<const Vec3> poses, std::span<double> out,
                  bool parallel);

void forward_batch(const MlpParams& net, std::span<const Vec3> inputs, std::span<double> out,
                   bool parallel);

// Sampling is sequential (the draw order defines the dataset); the margin
// evaluation runs through margin_batch.
Dataset generate_dataset(double xy_halfwidth, int count, std::uint64_t seed,
                         const VehicleParams& dims, bool parallel = true);

void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

struct ErrorBound {
    double epsilon_max = 0.0;
    double epsilon_mean = 0.0;
    int eval_count = 0;
    std::uint64_t seed = 0;
};

// Max/mean absolute prediction error over fresh uniform samples in the box the
// network was normalized on.
ErrorBound estimate_error_bound(const MlpParams& net, int count, std::uint64_t seed,
                                const VehicleParams& dims, bool parallel = true);

// ============================================================
// Training
// ============================================================

struct TrainingConfig {
    std::uint64_t seed = 1;
    int batch_size = 256;
    double learning_rate = 1e-3;
    int max_epochs = 2000;
    double val_split = 0.1;
    // Step schedule: the rate is multiplied by lr_decay every lr_step_epochs,
    // floored at min_learning_rate.
    int lr_step_epochs = 80;
    double lr_decay = 0.5;
    double min_learning_rate = 1e-7;
    // Plateau stop: give up after `patience` epochs without a >1% relative
    // validation MSE improvement.
    int patience = 150;
    // Optional early exit once the validation max abs error reaches this level
    // (0 disables).
    double target_val_max_abs = 0.0;
    double target_val_mse = 0.0;
    // Initial pre-activation standard deviation. Around 1 the tanh units
    // start curved, which rugged targets need to escape the near-linear
    // regime; small values give a gentler start for smooth targets.
    double init_gain = 0.9;
    bool parallel = true;
    std::vector<int> dims{3, 62, 62, 1};
};

struct TrainReport {
    int epochs_run = 0;
    double final_train_mse = 0.0;
    double final_val_mse = 0.0;
    double best_val_mse = 0.0;
    double best_val_max_abs = 0.0;
    bool converged = false;  // false when the epoch budget ran out above target
    double wall_seconds = 0.0;
};

// Adam on mean squared error. Batch gradients accumulate over fixed-size
// sample shards that reduce in index order, so the result does not depend on
// the thread count; a fixed seed therefore reproduces the parameters exactly.
// Throws std::invalid_argument on an empty dataset.
MlpParams train(const Dataset& data, const TrainingConfig& config, TrainReport* report = nullptr);

// One full gradient accumulation pass (exposed for the serial/parallel
// equivalence tests and the benchmark): mean-squared-error gradient of the
// batch w.r.t. every parameter, flattened layer by layer (weights then bias).
void mse_batch_gradient(const MlpParams& net, std::span<const Vec3> inputs,
                        std::span<const double> targets, std::span<double> grad_out,
                        bool parallel);

double mse_loss(const MlpParams& net, std::span<const Vec3> inputs,
                std::span<const double> targets, bool parallel);

}  // namespace mtvcbf
