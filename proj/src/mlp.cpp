#include "mtvcbf/mlp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mtvcbf {

void MlpParams::validate() const {
    if (dims.size() < 2 || dims.front() != 3 || dims.back() != 1)
        throw std::invalid_argument("MlpParams: dims must map 3 inputs to 1 output");
    if (layers.size() != dims.size() - 1)
        throw std::invalid_argument("MlpParams: layer count does not match dims");
    for (size_t l = 0; l < layers.size(); ++l) {
        const MlpLayer& layer = layers[l];
        if (layer.rows != dims[l + 1] || layer.cols != dims[l] ||
            layer.w.size() != static_cast<size_t>(layer.rows) * layer.cols ||
            layer.b.size() != static_cast<size_t>(layer.rows))
            throw std::invalid_argument("MlpParams: layer shape mismatch");
        for (double v : layer.w)
            if (!std::isfinite(v)) throw std::invalid_argument("MlpParams: non-finite weight");
        for (double v : layer.b)
            if (!std::isfinite(v)) throw std::invalid_argument("MlpParams: non-finite bias");
    }
    if (activation != "tanh") throw std::invalid_argument("MlpParams: unsupported activation");
    for (int d = 0; d < 3; ++d)
        if (!(input_scale[d] > 0.0))
            throw std::invalid_argument("MlpParams: input_scale must be positive");
}

bool MlpParams::in_trained_range(const Vec3& in) const {
    for (int d = 0; d < 3; ++d) {
        // Tolerance absorbs the reciprocal round trip through input_scale.
        const double hw = range_halfwidth(d) * (1.0 + 1e-9) + 1e-12;
        if (std::abs(in[d] - input_offset[d]) > hw) return false;
    }
    return true;
}

size_t MlpParams::parameter_count() const {
    size_t n = 0;
    for (const MlpLayer& layer : layers) n += layer.w.size() + layer.b.size();
    return n;
}

MlpParams make_mlp(const std::vector<int>& dims) {
    MlpParams net;
    net.dims = dims;
    net.layers.resize(dims.size() - 1);
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        net.layers[l].rows = dims[l + 1];
        net.layers[l].cols = dims[l];
        net.layers[l].w.assign(static_cast<size_t>(dims[l + 1]) * dims[l], 0.0);
        net.layers[l].b.assign(static_cast<size_t>(dims[l + 1]), 0.0);
    }
    return net;
}

namespace {

struct Workspace {
    // Post-activation per layer, activations[0] is the normalized input.
    std::vector<std::vector<double>> activations;
    // Post-activation adjoints dy/dz_l for hidden layers.
    std::vector<std::vector<double>> adjoints;
    // dy/dt, gradient w.r.t. the normalized input.
    std::vector<double> grad_in;
    // Jacobian of the current pre-activation w.r.t. the normalized input,
    // stored row-major [rows x 3].
    std::vector<double> jac;
    std::vector<double> jac_next;
};

thread_local Workspace tls_ws;

void forward_pass(const MlpParams& net, const Vec3& in, Workspace& ws) {
    const size_t n_layers = net.layers.size();
    ws.activations.resize(n_layers + 1);
    ws.activations[0].resize(3);
    for (int d = 0; d < 3; ++d)
        ws.activations[0][d] = (in[d] - net.input_offset[d]) * net.input_scale[d];

    for (size_t l = 0; l < n_layers; ++l) {
        const MlpLayer& layer = net.layers[l];
        const std::vector<double>& prev = ws.activations[l];
        std::vector<double>& cur = ws.activations[l + 1];
        cur.resize(layer.rows);
        const bool hidden = l + 1 < n_layers;
        for (int r = 0; r < layer.rows; ++r) {
            double acc = layer.b[r];
            const double* wr = layer.w.data() + static_cast<size_t>(r) * layer.cols;
            for (int c = 0; c < layer.cols; ++c) acc += wr[c] * prev[c];
            cur[r] = hidden ? std::tanh(acc) : acc;
        }
    }
}

// dy/dz_l for each hidden layer plus dy/dt, walking the linear maps backwards.
void adjoint_pass(const MlpParams& net, Workspace& ws) {
    const size_t n_layers = net.layers.size();
    const MlpLayer& out_layer = net.layers[n_layers - 1];

    if (n_layers == 1) {
        // Purely linear net: the gradient is the single weight row.
        ws.adjoints.clear();
        ws.grad_in.assign(out_layer.cols, 0.0);
        for (int c = 0; c < out_layer.cols; ++c) ws.grad_in[c] = out_layer.at(0, c);
        return;
    }

    ws.adjoints.resize(n_layers - 1);  // adjoints[l] = dy/d activations[l+1], hidden l
    std::vector<double>& last = ws.adjoints[n_layers - 2];
    last.assign(out_layer.cols, 0.0);
    for (int c = 0; c < out_layer.cols; ++c) last[c] = out_layer.at(0, c);

    // Push dy/dz_l through hidden layer l: dy/dz_{l-1} = W_l^T (tanh'(a_l) .* dy/dz_l).
    const auto push = [&ws](const MlpLayer& layer, const std::vector<double>& z,
                            const std::vector<double>& g_up, std::vector<double>& g_down) {
        g_down.assign(layer.cols, 0.0);
        for (int r = 0; r < layer.rows; ++r) {
            const double t = g_up[r] * (1.0 - z[r] * z[r]);
            const double* wr = layer.w.data() + static_cast<size_t>(r) * layer.cols;
            for (int c = 0; c < layer.cols; ++c) g_down[c] += t * wr[c];
        }
    };

    for (size_t l = n_layers - 2; l >= 1; --l)
        push(net.layers[l], ws.activations[l + 1], ws.adjoints[l], ws.adjoints[l - 1]);
    push(net.layers[0], ws.activations[1], ws.adjoints[0], ws.grad_in);
}

}  // namespace

double mlp_forward(const MlpParams& net, const Vec3& in) {
    Workspace& ws = tls_ws;
    forward_pass(net, in, ws);
    return ws.activations.back()[0];
}

MlpEval mlp_evaluate(const MlpParams& net, const Vec3& in) {
    Workspace& ws = tls_ws;
    forward_pass(net, in, ws);
    adjoint_pass(net, ws);

    const size_t n_layers = net.layers.size();
    MlpEval out;
    out.value = ws.activations.back()[0];

    Mat3 hess_t;  // Hessian w.r.t. the normalized input
    const double grad_t[3] = {ws.grad_in[0], ws.grad_in[1], ws.grad_in[2]};

    // Walk hidden layers forward, carrying B_l = d(a_l)/d(t), rows x 3.
    std::vector<double>& jac = ws.jac;
    std::vector<double>& jac_next = ws.jac_next;
    for (size_t l = 0; l + 1 < n_layers; ++l) {
        const MlpLayer& layer = net.layers[l];
        const std::vector<double>& z = ws.activations[l + 1];
        const std::vector<double>& g = ws.adjoints[l];

        if (l == 0) {
            jac.resize(static_cast<size_t>(layer.rows) * 3);
            for (int r = 0; r < layer.rows; ++r)
                for (int d = 0; d < 3; ++d) jac[static_cast<size_t>(r) * 3 + d] = layer.at(r, d);
        } else {
            // B_l = W_l * (D_{l-1} B_{l-1}); jac currently holds D_{l-1} B_{l-1}.
            jac_next.assign(static_cast<size_t>(layer.rows) * 3, 0.0);
            for (int r = 0; r < layer.rows; ++r) {
                const double* wr = layer.w.data() + static_cast<size_t>(r) * layer.cols;
                double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0;
                for (int c = 0; c < layer.cols; ++c) {
                    const double wv = wr[c];
                    acc0 += wv * jac[static_cast<size_t>(c) * 3 + 0];
                    acc1 += wv * jac[static_cast<size_t>(c) * 3 + 1];
                    acc2 += wv * jac[static_cast<size_t>(c) * 3 + 2];
                }
                jac_next[static_cast<size_t>(r) * 3 + 0] = acc0;
                jac_next[static_cast<size_t>(r) * 3 + 1] = acc1;
                jac_next[static_cast<size_t>(r) * 3 + 2] = acc2;
            }
            jac.swap(jac_next);
        }

        // Accumulate the curvature of this layer and scale jac by tanh' for
        // the next one. tanh'' = -2 z (1 - z^2).
        for (int r = 0; r < layer.rows; ++r) {
            const double zr = z[r];
            const double d1 = 1.0 - zr * zr;
            const double curv = -2.0 * zr * d1 * g[r];
            double* row = jac.data() + static_cast<size_t>(r) * 3;
            hess_t(0, 0) += curv * row[0] * row[0];
            hess_t(0, 1) += curv * row[0] * row[1];
            hess_t(0, 2) += curv * row[0] * row[2];
            hess_t(1, 1) += curv * row[1] * row[1];
            hess_t(1, 2) += curv * row[1] * row[2];
            hess_t(2, 2) += curv * row[2] * row[2];
            row[0] *= d1;
            row[1] *= d1;
            row[2] *= d1;
        }
    }
    hess_t(1, 0) = hess_t(0, 1);
    hess_t(2, 0) = hess_t(0, 2);
    hess_t(2, 1) = hess_t(1, 2);

    for (int r = 0; r < 3; ++r) {
        out.gradient[r] = grad_t[r] * net.input_scale[r];
        for (int c = 0; c < 3; ++c)
            out.hessian(r, c) = hess_t(r, c) * net.input_scale[r] * net.input_scale[c];
    }
    return out;
}

Vec3 mlp_gradient(const MlpParams& net, const Vec3& in) { return mlp_evaluate(net, in).gradient; }

Mat3 mlp_hessian(const MlpParams& net, const Vec3& in) { return mlp_evaluate(net, in).hessian; }

void save_model(const MlpParams& net, const std::string& path) {
    net.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_model: cannot open " + path);
    char buf[64];
    const auto num = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };

    out << "MLP-MARGIN v1\n";
    for (size_t i = 0; i < net.dims.size(); ++i) out << (i ? " " : "") << net.dims[i];
    out << "\n" << net.activation << "\n";
    out << num(net.input_offset[0]) << " " << num(net.input_offset[1]) << " "
        << num(net.input_offset[2]) << " " << num(net.input_scale[0]) << " "
        << num(net.input_scale[1]) << " " << num(net.input_scale[2]) << "\n";
    for (const MlpLayer& layer : net.layers) {
        out << "layer " << layer.rows << " " << layer.cols << "\n";
        for (int r = 0; r < layer.rows; ++r) {
            for (int c = 0; c < layer.cols; ++c) out << (c ? " " : "") << num(layer.at(r, c));
            out << "\n";
        }
        for (int r = 0; r < layer.rows; ++r) out << (r ? " " : "") << num(layer.b[r]);
        out << "\n";
    }
    if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line_no, const std::string& what) {
    throw std::runtime_error("load_model: " + path + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

MlpParams load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);

    int line_no = 0;
    std::string line;
    const auto next_line = [&]() {
        if (!std::getline(in, line)) parse_fail(path, line_no + 1, "unexpected end of file");
        ++line_no;
    };

    next_line();
    if (line != "MLP-MARGIN v1") parse_fail(path, line_no, "bad magic, expected 'MLP-MARGIN v1'");

    MlpParams net;
    next_line();
    {
        std::istringstream ss(line);
        net.dims.clear();
        int d;
        while (ss >> d) net.dims.push_back(d);
        if (net.dims.size() < 2) parse_fail(path, line_no, "need at least two layer dims");
    }
    next_line();
    net.activation = line;
    next_line();
    {
        std::istringstream ss(line);
        if (!(ss >> net.input_offset[0] >> net.input_offset[1] >> net.input_offset[2] >>
              net.input_scale[0] >> net.input_scale[1] >> net.input_scale[2]))
            parse_fail(path, line_no, "expected 6 normalization values");
    }

    for (size_t l = 0; l + 1 < net.dims.size(); ++l) {
        next_line();
        std::istringstream head(line);
        std::string tag;
        int rows = 0, cols = 0;
        if (!(head >> tag >> rows >> cols) || tag != "layer")
            parse_fail(path, line_no, "expected 'layer r c'");
        if (rows != net.dims[l + 1] || cols != net.dims[l])
            parse_fail(path, line_no, "layer shape does not match dims header");
        MlpLayer layer;
        layer.rows = rows;
        layer.cols = cols;
        layer.w.resize(static_cast<size_t>(rows) * cols);
        layer.b.resize(rows);
        for (int r = 0; r < rows; ++r) {
            next_line();
            std::istringstream ss(line);
            for (int c = 0; c < cols; ++c)
                if (!(ss >> layer.at(r, c))) parse_fail(path, line_no, "short weight row");
        }
        next_line();
        {
            std::istringstream ss(line);
            for (int r = 0; r < rows; ++r)
                if (!(ss >> layer.b[r])) parse_fail(path, line_no, "short bias row");
        }
        net.layers.push_back(std::move(layer));
    }
    net.validate();
    return net;
}

}  // namespace mtvcbf
