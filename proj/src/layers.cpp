#include "prnet/layers.hpp"

#include <cmath>

namespace prnet {

Tensor glorot_uniform(std::vector<size_t> shape, size_t fan_in, size_t fan_out, Rng& rng) {
    Tensor t(std::move(shape));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
    return t;
}

Tensor scaled_uniform(std::vector<size_t> shape, double limit, Rng& rng) {
    Tensor t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
    return t;
}

AffineLayer::AffineLayer(const std::string& name, size_t in, size_t out, Rng& rng)
    : w(name + "/w", glorot_uniform({in, out}, in, out, rng)),
      b(name + "/b", Tensor({out})) {}

ad::Var AffineLayer::operator()(const ad::Var& x) {
    return ad::affine(x, ad::param_leaf(w), ad::param_leaf(b));
}

std::vector<Parameter*> AffineLayer::params() { return {&w, &b}; }

BatchNormLayer::BatchNormLayer(const std::string& name, size_t features)
    : name(name),
      gamma(name + "/gamma", Tensor::full({features}, 1.0)),
      beta(name + "/beta", Tensor({features})),
      running_mean({features}),
      running_var(Tensor::full({features}, 1.0)) {}

ad::Var BatchNormLayer::apply(const ad::Var& x, bool training, bool update_running) {
    ad::Var g = ad::param_leaf(gamma);
    ad::Var be = ad::param_leaf(beta);
    if (training) {
        auto cache = std::make_shared<BatchNormCache>();
        Tensor y = batch_norm_forward(x->value, g->value, be->value, eps, cache.get());
        if (update_running) {
            const double n = static_cast<double>(x->value.dim(0));
            const double unbias = n / (n - 1.0);
            for (size_t c = 0; c < running_mean.size(); ++c) {
                running_mean[c] = momentum * running_mean[c] + (1.0 - momentum) * cache->mean[c];
                running_var[c] =
                    momentum * running_var[c] + (1.0 - momentum) * cache->var[c] * unbias;
            }
        }
        return ad::make_node(std::move(y), {x, g, be}, [x, g, be, cache](ad::Node& self) {
            BatchNormGrads grads = batch_norm_backward(self.grad, *cache, g->value);
            ad::add_grad(x, grads.dx);
            ad::add_grad(g, grads.dgamma);
            ad::add_grad(be, grads.dbeta);
        });
    }
    Tensor y = batch_norm_infer(x->value, g->value, be->value, running_mean, running_var, eps);
    Tensor rm = running_mean, rv = running_var;
    double e = eps;
    return ad::make_node(std::move(y), {x, g, be}, [x, g, be, rm, rv, e](ad::Node& self) {
        BatchNormGrads grads = batch_norm_infer_backward(self.grad, x->value, g->value, rm, rv, e);
        ad::add_grad(x, grads.dx);
        ad::add_grad(g, grads.dgamma);
        ad::add_grad(be, grads.dbeta);
    });
}

ad::Var BatchNormLayer::apply_nhwc(const ad::Var& x, bool training, bool update_running) {
    const auto& s = x->value.shape();
    if (s.size() != 4) throw ShapeMismatch("apply_nhwc expects [B,H,W,C]");
    ad::Var flat = ad::reshape(x, {s[0] * s[1] * s[2], s[3]});
    ad::Var y = apply(flat, training, update_running);
    return ad::reshape(y, s);
}

std::vector<Parameter*> BatchNormLayer::params() { return {&gamma, &beta}; }

std::vector<std::pair<std::string, Tensor*>> BatchNormLayer::aux_state() {
    return {{name + "/running_mean", &running_mean}, {name + "/running_var", &running_var}};
}

Conv2dLayer::Conv2dLayer(const std::string& name, size_t kernel, size_t cin, size_t cout,
                         size_t stride, Padding pad, Rng& rng)
    : w(name + "/w",
        // fan-in scaled for the ReLU chains these feed; symmetric fan scaling
        // loses signal by the last stage on narrow desk configurations
        scaled_uniform({kernel, kernel, cin, cout},
                       std::sqrt(6.0 / static_cast<double>(kernel * kernel * cin)), rng)),
      b(name + "/b", Tensor({cout})),
      spec{stride, pad} {}

ad::Var Conv2dLayer::operator()(const ad::Var& x) {
    return ad::conv2d(x, ad::param_leaf(w), ad::param_leaf(b), spec);
}

std::vector<Parameter*> Conv2dLayer::params() { return {&w, &b}; }

LstmLayer::LstmLayer(const std::string& name, size_t input_dim, size_t hidden_dim, Rng& rng)
    : wx(name + "/wx", Tensor({input_dim, 4 * hidden_dim})),
      wh(name + "/wh", Tensor({hidden_dim, 4 * hidden_dim})),
      b(name + "/b", Tensor({4 * hidden_dim})),
      hidden(hidden_dim) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    wx.value = scaled_uniform(wx.value.shape(), limit, rng);
    wh.value = scaled_uniform(wh.value.shape(), limit, rng);
    // forget-gate bias starts at 1
    for (size_t k = 0; k < hidden_dim; ++k) b.value[hidden_dim + k] = 1.0;
}

ad::Var LstmLayer::run(const std::vector<ad::Var>& steps) {
    if (steps.empty()) throw ShapeMismatch("lstm run: empty sequence");
    const size_t bsz = steps[0]->value.dim(0);
    ad::Var vwx = ad::param_leaf(wx);
    ad::Var vwh = ad::param_leaf(wh);
    ad::Var vb = ad::param_leaf(b);
    ad::Var h = ad::leaf(Tensor({bsz, hidden}));
    ad::Var c = ad::leaf(Tensor({bsz, hidden}));
    for (const ad::Var& x : steps) {
        ad::Var hc = ad::lstm_cell(x, h, c, vwx, vwh, vb);
        h = ad::slice_cols(hc, 0, hidden);
        c = ad::slice_cols(hc, hidden, 2 * hidden);
    }
    return h;
}

std::vector<Parameter*> LstmLayer::params() { return {&wx, &wh, &b}; }

MlpLayer::MlpLayer(const std::string& name, size_t in, const std::vector<size_t>& widths,
                   Rng& rng) {
    if (widths.empty()) throw ShapeMismatch("mlp needs at least one layer");
    size_t prev = in;
    for (size_t i = 0; i < widths.size(); ++i) {
        const std::string lname = name + "/l" + std::to_string(i);
        linears.emplace_back(lname, prev, widths[i], rng);
        norms.emplace_back(lname + "/bn", widths[i]);
        prev = widths[i];
    }
}

ad::Var MlpLayer::forward(const ad::Var& x, bool training, bool update_running) {
    ad::Var h = x;
    for (size_t i = 0; i < linears.size(); ++i) {
        h = linears[i](h);
        h = norms[i].apply(h, training, update_running);
        h = ad::relu(h);
    }
    return h;
}

std::vector<Parameter*> MlpLayer::params() {
    std::vector<Parameter*> out;
    for (size_t i = 0; i < linears.size(); ++i) {
        append_params(out, linears[i].params());
        append_params(out, norms[i].params());
    }
    return out;
}

}  // namespace prnet
