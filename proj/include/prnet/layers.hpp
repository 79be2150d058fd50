#pragma once

#include <string>
#include <utility>
#include <vector>

#include "prnet/graph.hpp"
#include "prnet/parameter.hpp"
#include "prnet/rng.hpp"

namespace prnet {

// Glorot-style uniform init in +-sqrt(6/(fan_in+fan_out)).
Tensor glorot_uniform(std::vector<size_t> shape, size_t fan_in, size_t fan_out, Rng& rng);
// Uniform in +-limit.
Tensor scaled_uniform(std::vector<size_t> shape, double limit, Rng& rng);

struct AffineLayer {
    Parameter w, b;

    AffineLayer(const std::string& name, size_t in, size_t out, Rng& rng);
    ad::Var operator()(const ad::Var& x);
    size_t out_dim() const { return w.value.dim(1); }
    std::vector<Parameter*> params();
};

struct BatchNormLayer {
    std::string name;
    Parameter gamma, beta;
    Tensor running_mean, running_var;
    double momentum = 0.9;
    double eps = 1e-5;

    BatchNormLayer(const std::string& name, size_t features);
    // x is [rows, features]. Training mode normalizes with batch statistics
    // and, when update_running is set, folds them into the running averages.
    ad::Var apply(const ad::Var& x, bool training, bool update_running = true);
    // Channels-last activations [B,H,W,C] normalized per channel.
    ad::Var apply_nhwc(const ad::Var& x, bool training, bool update_running = true);
    std::vector<Parameter*> params();
    // Non-trainable state that checkpoints must still carry.
    std::vector<std::pair<std::string, Tensor*>> aux_state();
};

struct Conv2dLayer {
    Parameter w, b;
    Conv2dSpec spec;

    Conv2dLayer(const std::string& name, size_t kernel, size_t cin, size_t cout, size_t stride,
                Padding pad, Rng& rng);
    ad::Var operator()(const ad::Var& x);
    std::vector<Parameter*> params();
};

struct MaxPoolLayer {
    size_t kernel = 3;
    size_t stride = 2;
    Padding pad = Padding::Same;

    ad::Var operator()(const ad::Var& x) const { return ad::maxpool(x, kernel, stride, pad); }
};

struct LstmLayer {
    Parameter wx, wh, b;
    size_t hidden = 0;

    LstmLayer(const std::string& name, size_t input_dim, size_t hidden_dim, Rng& rng);
    // Runs the cell over the step inputs (each [B,D]) from zero state and
    // returns the final hidden state [B,H].
    ad::Var run(const std::vector<ad::Var>& steps);
    std::vector<Parameter*> params();
};

// Stack of affine+BN+ReLU layers.
struct MlpLayer {
    std::vector<AffineLayer> linears;
    std::vector<BatchNormLayer> norms;

    MlpLayer(const std::string& name, size_t in, const std::vector<size_t>& widths, Rng& rng);
    ad::Var forward(const ad::Var& x, bool training, bool update_running = true);
    size_t out_dim() const { return linears.back().out_dim(); }
    std::vector<Parameter*> params();
};

inline void append_params(std::vector<Parameter*>& dst, std::vector<Parameter*> src) {
    dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace prnet
