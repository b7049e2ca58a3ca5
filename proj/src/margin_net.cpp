#include "mtvcbf/margin_net.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mtvcbf/geometry.hpp"
#include "mtvcbf/rng.hpp"

namespace mtvcbf {

namespace {

constexpr double kPi = 3.141592653589793238;

OrientedRectangle origin_rect(const VehicleParams& dims) {
    return OrientedRectangle(0.0, 0.0, 0.0, dims.length, dims.width);
}

}  // namespace

void margin_batch(const VehicleParams& dims, std::span<const Vec3> poses, std::span<double> out,
                  bool parallel) {
    if (out.size() < poses.size())
        throw std::invalid_argument("margin_batch: output span too small");
    const OrientedRectangle ego = origin_rect(dims);
    const std::int64_t n = static_cast<std::int64_t>(poses.size());
#pragma omp parallel for schedule(static) if (parallel)
    for (std::int64_t i = 0; i < n; ++i) {
        const Vec3& p = poses[static_cast<size_t>(i)];
        const OrientedRectangle other(p.x, p.y, p.z, dims.length, dims.width);
        out[static_cast<size_t>(i)] = mtv_margin(ego, other).value;
    }
}

void forward_batch(const MlpParams& net, std::span<const Vec3> inputs, std::span<double> out,
                   bool parallel) {
    if (out.size() < inputs.size())
        throw std::invalid_argument("forward_batch: output span too small");
    const std::int64_t n = static_cast<std::int64_t>(inputs.size());
#pragma omp parallel for schedule(static) if (parallel)
    for (std::int64_t i = 0; i < n; ++i)
        out[static_cast<size_t>(i)] = mlp_forward(net, inputs[static_cast<size_t>(i)]);
}

Dataset generate_dataset(double xy_halfwidth, int count, std::uint64_t seed,
                         const VehicleParams& dims, bool parallel) {
    if (count <= 0) throw std::invalid_argument("generate_dataset: count must be positive");
    Dataset data;
    data.xy_halfwidth = xy_halfwidth;
    data.inputs.resize(static_cast<size_t>(count));
    data.targets.resize(static_cast<size_t>(count));

    Rng rng(seed);
    for (auto& in : data.inputs) {
        in.x = rng.uniform(-xy_halfwidth, xy_halfwidth);
        in.y = rng.uniform(-xy_halfwidth, xy_halfwidth);
        in.z = rng.uniform(-kPi, kPi);
    }
    margin_batch(dims, data.inputs, data.targets, parallel);
    return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
    char buf[160];
    out << "MARGIN-DATA v1\n";
    std::snprintf(buf, sizeof(buf), "%zu %.17g\n", data.size(), data.xy_halfwidth);
    out << buf;
    for (size_t i = 0; i < data.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g\n", data.inputs[i].x,
                      data.inputs[i].y, data.inputs[i].z, data.targets[i]);
        out << buf;
    }
    if (!out) throw std::runtime_error("save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "MARGIN-DATA v1")
        throw std::runtime_error("load_dataset: " + path + ":1: bad magic");
    size_t count = 0;
    Dataset data;
    if (!std::getline(in, line))
        throw std::runtime_error("load_dataset: " + path + ":2: missing header");
    {
        std::istringstream ss(line);
        if (!(ss >> count >> data.xy_halfwidth))
            throw std::runtime_error("load_dataset: " + path + ":2: bad header");
    }
    data.inputs.resize(count);
    data.targets.resize(count);
    for (size_t i = 0; i < count; ++i) {
        if (!std::getline(in, line))
            throw std::runtime_error("load_dataset: " + path + ": truncated at row " +
                                     std::to_string(i));
        std::istringstream ss(line);
        if (!(ss >> data.inputs[i].x >> data.inputs[i].y >> data.inputs[i].z >> data.targets[i]))
            throw std::runtime_error("load_dataset: " + path + ":" + std::to_string(i + 3) +
                                     ": bad row");
    }
    return data;
}

ErrorBound estimate_error_bound(const MlpParams& net, int count, std::uint64_t seed,
                                const VehicleParams& dims, bool parallel) {
    if (count <= 0) throw std::invalid_argument("estimate_error_bound: count must be positive");
    std::vector<Vec3> inputs(static_cast<size_t>(count));
    Rng rng(seed);
    const double hx = net.range_halfwidth(0);
    const double hy = net.range_halfwidth(1);
    const double hp = net.range_halfwidth(2);
    for (auto& in : inputs) {
        in.x = net.input_offset[0] + rng.uniform(-hx, hx);
        in.y = net.input_offset[1] + rng.uniform(-hy, hy);
        in.z = net.input_offset[2] + rng.uniform(-hp, hp);
    }

    std::vector<double> pred(inputs.size()), truth(inputs.size());
    forward_batch(net, inputs, pred, parallel);
    margin_batch(dims, inputs, truth, parallel);

    ErrorBound bound;
    bound.eval_count = count;
    bound.seed = seed;
    double sum = 0.0;
    for (size_t i = 0; i < inputs.size(); ++i) {
        const double err = std::abs(pred[i] - truth[i]);
        bound.epsilon_max = std::max(bound.epsilon_max, err);
        sum += err;
    }
    bound.epsilon_mean = sum / static_cast<double>(count);
    return bound;
}

// ============================================================
// Training
// ============================================================

namespace {

// Flattened parameter addressing: per layer, weights row-major then biases.
struct FlatLayout {
    std::vector<size_t> w_off;
    std::vector<size_t> b_off;
    size_t total = 0;

    explicit FlatLayout(const MlpParams& net) {
        for (const MlpLayer& layer : net.layers) {
            w_off.push_back(total);
            total += layer.w.size();
            b_off.push_back(total);
            total += layer.b.size();
        }
    }
};

void params_to_flat(const MlpParams& net, const FlatLayout& lay, std::vector<double>& flat) {
    flat.resize(lay.total);
    for (size_t l = 0; l < net.layers.size(); ++l) {
        std::copy(net.layers[l].w.begin(), net.layers[l].w.end(), flat.begin() + lay.w_off[l]);
        std::copy(net.layers[l].b.begin(), net.layers[l].b.end(), flat.begin() + lay.b_off[l]);
    }
}

void flat_to_params(const std::vector<double>& flat, const FlatLayout& lay, MlpParams& net) {
    for (size_t l = 0; l < net.layers.size(); ++l) {
        std::copy(flat.begin() + lay.w_off[l], flat.begin() + lay.w_off[l] + net.layers[l].w.size(),
                  net.layers[l].w.begin());
        std::copy(flat.begin() + lay.b_off[l], flat.begin() + lay.b_off[l] + net.layers[l].b.size(),
                  net.layers[l].b.begin());
    }
}

// Scratch buffers for one sample's forward + backward pass.
struct BackpropScratch {
    std::vector<std::vector<double>> act;    // act[0] = normalized input
    std::vector<std::vector<double>> delta;  // dL/da per layer
};

// Accumulate dL/dparams for one sample into grad (flattened), where
// L = coeff * (prediction - target)^2 ... the caller folds batch scaling
// into coeff.
void backprop_sample(const MlpParams& net, const FlatLayout& lay, const Vec3& input, double target,
                     double coeff, BackpropScratch& s, double* grad) {
    const size_t n_layers = net.layers.size();
    s.act.resize(n_layers + 1);
    s.delta.resize(n_layers);

    s.act[0].resize(3);
    for (int d = 0; d < 3; ++d)
        s.act[0][d] = (input[d] - net.input_offset[d]) * net.input_scale[d];

    for (size_t l = 0; l < n_layers; ++l) {
        const MlpLayer& layer = net.layers[l];
        const std::vector<double>& prev = s.act[l];
        std::vector<double>& cur = s.act[l + 1];
        cur.resize(layer.rows);
        const bool hidden = l + 1 < n_layers;
        for (int r = 0; r < layer.rows; ++r) {
            double acc = layer.b[r];
            const double* wr = layer.w.data() + static_cast<size_t>(r) * layer.cols;
            for (int c = 0; c < layer.cols; ++c) acc += wr[c] * prev[c];
            cur[r] = hidden ? std::tanh(acc) : acc;
        }
    }

    // Output layer is linear: dL/da_out = coeff * 2 * (pred - target).
    const double err = s.act[n_layers][0] - target;
    s.delta[n_layers - 1].assign(1, 2.0 * coeff * err);

    for (size_t l = n_layers; l-- > 0;) {
        const MlpLayer& layer = net.layers[l];
        const std::vector<double>& d_cur = s.delta[l];
        const std::vector<double>& prev = s.act[l];
        double* gw = grad + lay.w_off[l];
        double* gb = grad + lay.b_off[l];
        for (int r = 0; r < layer.rows; ++r) {
            const double dr = d_cur[r];
            gb[r] += dr;
            double* gwr = gw + static_cast<size_t>(r) * layer.cols;
            for (int c = 0; c < layer.cols; ++c) gwr[c] += dr * prev[c];
        }
        if (l == 0) break;
        // dL/da_{l-1} = tanh'(a_{l-1}) .* (W_l^T dL/da_l)
        std::vector<double>& d_down = s.delta[l - 1];
        d_down.assign(layer.cols, 0.0);
        for (int r = 0; r < layer.rows; ++r) {
            const double dr = d_cur[r];
            const double* wr = layer.w.data() + static_cast<size_t>(r) * layer.cols;
            for (int c = 0; c < layer.cols; ++c) d_down[c] += dr * wr[c];
        }
        const std::vector<double>& z = s.act[l];
        for (int c = 0; c < static_cast<int>(d_down.size()); ++c)
            d_down[c] *= 1.0 - z[c] * z[c];
    }
}

constexpr int kShardSize = 32;

}  // namespace

void mse_batch_gradient(const MlpParams& net, std::span<const Vec3> inputs,
                        std::span<const double> targets, std::span<double> grad_out,
                        bool parallel) {
    const FlatLayout lay(net);
    if (grad_out.size() != lay.total)
        throw std::invalid_argument("mse_batch_gradient: gradient span size mismatch");
    if (inputs.empty() || targets.size() != inputs.size())
        throw std::invalid_argument("mse_batch_gradient: bad batch");

    const int n = static_cast<int>(inputs.size());
    const int n_shards = (n + kShardSize - 1) / kShardSize;
    const double coeff = 1.0 / static_cast<double>(n);

    // Shard-local accumulators reduce in index order afterwards, so the sum
    // is independent of how shards are scheduled across threads.
    std::vector<std::vector<double>> shard_grads(static_cast<size_t>(n_shards));

#pragma omp parallel for schedule(static) if (parallel)
    for (int shard = 0; shard < n_shards; ++shard) {
        std::vector<double>& g = shard_grads[static_cast<size_t>(shard)];
        g.assign(lay.total, 0.0);
        BackpropScratch scratch;
        const int lo = shard * kShardSize;
        const int hi = std::min(n, lo + kShardSize);
        for (int i = lo; i < hi; ++i)
            backprop_sample(net, lay, inputs[static_cast<size_t>(i)],
                            targets[static_cast<size_t>(i)], coeff, scratch, g.data());
    }

    std::fill(grad_out.begin(), grad_out.end(), 0.0);
    for (int shard = 0; shard < n_shards; ++shard) {
        const std::vector<double>& g = shard_grads[static_cast<size_t>(shard)];
        for (size_t k = 0; k < lay.total; ++k) grad_out[k] += g[k];
    }
}

double mse_loss(const MlpParams& net, std::span<const Vec3> inputs,
                std::span<const double> targets, bool parallel) {
    if (inputs.empty()) return 0.0;
    std::vector<double> pred(inputs.size());
    forward_batch(net, inputs, pred, parallel);
    double sum = 0.0;
    for (size_t i = 0; i < inputs.size(); ++i) {
        const double e = pred[i] - targets[i];
        sum += e * e;
    }
    return sum / static_cast<double>(inputs.size());
}

MlpParams train(const Dataset& data, const TrainingConfig& config, TrainReport* report) {
    if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
    const auto t_start = std::chrono::steady_clock::now();

    MlpParams net = make_mlp(config.dims);
    net.input_offset = {0.0, 0.0, 0.0};
    net.input_scale = {1.0 / data.xy_halfwidth, 1.0 / data.xy_halfwidth, 1.0 / kPi};

    // Initialization targets pre-activations of standard deviation init_gain
    // so the tanh units start in their curved regime; variance-preserving
    // schemes leave a 3-input network effectively linear (every
    // pre-activation lands in the flat center of tanh) and gradient descent
    // never escapes that subspace. Biases are spread so the units' transition
    // surfaces tile the box.
    Rng rng(config.seed);
    const double gain_var = config.init_gain * config.init_gain;
    const size_t n_layers = net.layers.size();
    for (size_t l = 0; l < n_layers; ++l) {
        MlpLayer& layer = net.layers[l];
        double limit;
        double bias_limit;
        if (l + 1 == n_layers) {
            limit = std::sqrt(6.0 / static_cast<double>(layer.rows + layer.cols));
            bias_limit = 0.0;
        } else if (l == 0) {
            // inputs are uniform in [-1, 1] (variance 1/3)
            limit = std::sqrt(3.0 * gain_var * 3.0 / static_cast<double>(layer.cols));
            bias_limit = 0.9 * config.init_gain;
        } else {
            // tanh outputs of a unit-scale layer have variance ~0.3
            limit = std::sqrt(3.0 * gain_var / (0.3 * static_cast<double>(layer.cols)));
            bias_limit = 0.55 * config.init_gain;
        }
        for (double& w : layer.w) w = rng.uniform(-limit, limit);
        for (double& b : layer.b) b = rng.uniform(-bias_limit, bias_limit);
    }

    // Shuffled split into train / validation.
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.below(i)]);
    const size_t n_val =
        std::min(data.size() - 1, static_cast<size_t>(config.val_split * data.size()));
    const size_t n_train = data.size() - n_val;

    std::vector<Vec3> train_in(n_train), val_in(n_val);
    std::vector<double> train_tg(n_train), val_tg(n_val);
    for (size_t i = 0; i < n_train; ++i) {
        train_in[i] = data.inputs[order[i]];
        train_tg[i] = data.targets[order[i]];
    }
    for (size_t i = 0; i < n_val; ++i) {
        val_in[i] = data.inputs[order[n_train + i]];
        val_tg[i] = data.targets[order[n_train + i]];
    }

    const FlatLayout lay(net);
    std::vector<double> flat;
    params_to_flat(net, lay, flat);
    std::vector<double> grad(lay.total), adam_m(lay.total, 0.0), adam_v(lay.total, 0.0);
    std::vector<double> best_flat = flat;

    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    long step = 0;

    const auto val_stats = [&](double& mse, double& max_abs) {
        if (n_val == 0) {
            mse = mse_loss(net, train_in, train_tg, config.parallel);
            max_abs = std::sqrt(mse);
            return;
        }
        std::vector<double> pred(n_val);
        forward_batch(net, val_in, pred, config.parallel);
        double sum = 0.0;
        max_abs = 0.0;
        for (size_t i = 0; i < n_val; ++i) {
            const double e = pred[i] - val_tg[i];
            sum += e * e;
            max_abs = std::max(max_abs, std::abs(e));
        }
        mse = sum / static_cast<double>(n_val);
    };

    double best_val = std::numeric_limits<double>::infinity();
    double best_val_max = std::numeric_limits<double>::infinity();
    int stale_epochs = 0;
    int epoch = 0;
    bool target_met = false;

    std::vector<size_t> batch_order(n_train);
    std::iota(batch_order.begin(), batch_order.end(), size_t{0});
    const int batch = std::max(1, config.batch_size);
    std::vector<Vec3> batch_in(static_cast<size_t>(batch));
    std::vector<double> batch_tg(static_cast<size_t>(batch));

    for (epoch = 0; epoch < config.max_epochs; ++epoch) {
        const double lr = std::max(
            config.min_learning_rate,
            config.learning_rate *
                std::pow(config.lr_decay, epoch / std::max(1, config.lr_step_epochs)));
        for (size_t i = batch_order.size(); i > 1; --i)
            std::swap(batch_order[i - 1], batch_order[rng.below(i)]);

        for (size_t start = 0; start < n_train; start += static_cast<size_t>(batch)) {
            const size_t count = std::min(static_cast<size_t>(batch), n_train - start);
            for (size_t i = 0; i < count; ++i) {
                batch_in[i] = train_in[batch_order[start + i]];
                batch_tg[i] = train_tg[batch_order[start + i]];
            }
            mse_batch_gradient(net, std::span<const Vec3>(batch_in.data(), count),
                               std::span<const double>(batch_tg.data(), count), grad,
                               config.parallel);
            ++step;
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (size_t k = 0; k < lay.total; ++k) {
                adam_m[k] = beta1 * adam_m[k] + (1.0 - beta1) * grad[k];
                adam_v[k] = beta2 * adam_v[k] + (1.0 - beta2) * grad[k] * grad[k];
                flat[k] -= lr * (adam_m[k] / bc1) / (std::sqrt(adam_v[k] / bc2) + adam_eps);
            }
            flat_to_params(flat, lay, net);
        }

        double vmse, vmax;
        val_stats(vmse, vmax);
        if (std::getenv("MTVCBF_TRAIN_TRACE") && epoch % 50 == 0)
            std::fprintf(stderr, "epoch %d lr %.3e val %.6e max %.6e\n", epoch, lr, vmse, vmax);
        // Only a >1% relative improvement counts against the plateau; the
        // optimizer noise floor otherwise keeps producing hairline minima.
        if (vmse < best_val * (1.0 - 0.01)) {
            stale_epochs = 0;
        } else {
            ++stale_epochs;
        }
        if (vmse < best_val) {
            best_val = vmse;
            best_val_max = vmax;
            best_flat = flat;
        }

        const bool mse_ok = config.target_val_mse <= 0.0 || best_val <= config.target_val_mse;
        const bool max_ok =
            config.target_val_max_abs <= 0.0 || best_val_max <= config.target_val_max_abs;
        if ((config.target_val_mse > 0.0 || config.target_val_max_abs > 0.0) && mse_ok && max_ok) {
            target_met = true;
            ++epoch;
            break;
        }

        if (stale_epochs >= config.patience) {
            ++epoch;
            break;
        }
    }

    flat_to_params(best_flat, lay, net);

    if (report) {
        report->epochs_run = epoch;
        report->final_train_mse = mse_loss(net, train_in, train_tg, config.parallel);
        double vmse, vmax;
        val_stats(vmse, vmax);
        report->final_val_mse = vmse;
        report->best_val_mse = best_val;
        report->best_val_max_abs = best_val_max;
        const bool targets_set = config.target_val_mse > 0.0 || config.target_val_max_abs > 0.0;
        report->converged = targets_set ? target_met : true;
        report->wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    }
    return net;
}

}  // namespace mtvcbf
