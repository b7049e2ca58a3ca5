#pragma once
#include <string>
#include <vector>

#include "mtvcbf/linalg.hpp"

namespace mtvcbf {

// Dense layer, weights row-major [rows x cols].
struct MlpLayer {
    int rows = 0;
    int cols = 0;
    std::vector<double> w;
    std::vector<double> b;

    double& at(int r, int c) { return w[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return w[static_cast<size_t>(r) * cols + c]; }
};

// Fully connected tanh network R^3 -> R with per-dimension input normalization
// t = (x - input_offset) * input_scale applied before the first layer.
struct MlpParams {
    std::vector<int> dims{3, 62, 62, 1};
    std::vector<MlpLayer> layers;
    std::string activation = "tanh";
    Vec3 input_offset{0.0, 0.0, 0.0};
    Vec3 input_scale{1.0, 1.0, 1.0};

    // Throws std::invalid_argument on inconsistent shapes or unsupported activation.
    void validate() const;

    // Box the normalization was fitted on: offset +- 1/scale per dimension.
    double range_halfwidth(int dim) const { return 1.0 / input_scale[dim]; }
    bool in_trained_range(const Vec3& in) const;

    size_t parameter_count() const;
};

// Zero-initialized network of the given shape.
MlpParams make_mlp(const std::vector<int>& dims);

double mlp_forward(const MlpParams& net, const Vec3& in);
Vec3 mlp_gradient(const MlpParams& net, const Vec3& in);
Mat3 mlp_hessian(const MlpParams& net, const Vec3& in);

struct MlpEval {
    double value = 0.0;
    Vec3 gradient;
    Mat3 hessian;
};

// Value, input gradient and input Hessian in one fused pass. The Hessian is
// accumulated layer by layer as B_l^T diag(tanh''(a_l) .* g_l) B_l with
// B_l the Jacobian of the layer pre-activation w.r.t. the input, so it is
// symmetric by construction.
MlpEval mlp_evaluate(const MlpParams& net, const Vec3& in);

// Portable text model format:
//   line 1: magic "MLP-MARGIN v1"
//   line 2: layer dims, space separated
//   line 3: activation name
//   line 4: input_offset (3 numbers) then input_scale (3 numbers)
//   per layer: "layer r c", r lines of c weights, one line of r biases.
// Numbers carry 17 significant digits so a round-trip is bit-exact.
void save_model(const MlpParams& net, const std::string& path);

// Throws std::runtime_error naming the offending line on malformed input.
MlpParams load_model(const std::string& path);

}  // namespace mtvcbf
