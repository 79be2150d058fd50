#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "prnet/backbone.hpp"
#include "prnet/gradcheck.hpp"
#include "prnet/layers.hpp"
#include "prnet/ops.hpp"
#include "prnet/rng.hpp"

using namespace prnet;

namespace {

Tensor randn(std::vector<size_t> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
    return t;
}

}  // namespace

TEST_CASE("tensor basics") {
    Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
    Tensor b = Tensor::matrix(2, 2, {5, 6, 7, 8});
    Tensor c = matmul(a, b);
    CHECK(c.at(0, 0) == 19);  // 1*5 + 2*7
    CHECK(c.at(0, 1) == 22);
    CHECK(c.at(1, 0) == 43);
    CHECK(c.at(1, 1) == 50);

    Tensor t = transpose(a);
    CHECK(t.at(0, 1) == 3);
    CHECK(t.at(1, 0) == 2);

    CHECK_THROWS_AS(matmul(a, Tensor({3, 2})), ShapeMismatch);
    CHECK_THROWS_AS(a.reshaped({3}), ShapeMismatch);
    CHECK(a.reshaped({4}).dim(0) == 4);

    Tensor h = hadamard(a, b);
    CHECK(h.at(1, 1) == 32);
}

TEST_CASE("matmul against index-summed oracle") {
    Rng rng(3);
    Tensor a = randn({4, 6}, rng);
    Tensor b = randn({6, 5}, rng);
    Tensor c = matmul(a, b);
    for (size_t i = 0; i < 4; ++i) {
        for (size_t j = 0; j < 5; ++j) {
            double s = 0.0;
            for (size_t k = 0; k < 6; ++k) s += a.at(i, k) * b.at(k, j);
            CHECK(c.at(i, j) == doctest::Approx(s).epsilon(1e-12));
        }
    }
}

TEST_CASE("affine hand cases") {
    // w = identity, b = 0 leaves the input alone
    Tensor x = Tensor::matrix(1, 2, {1, 2});
    Tensor w = Tensor::matrix(2, 2, {1, 0, 0, 1});
    Tensor b({2});
    Tensor y = affine_forward(x, w, b);
    CHECK(y.at(0, 0) == 1);
    CHECK(y.at(0, 1) == 2);

    b = Tensor::row({3, 3});
    y = affine_forward(x, w, b);
    CHECK(y.at(0, 0) == 4);
    CHECK(y.at(0, 1) == 5);
}

TEST_CASE("relu hand cases") {
    Tensor x = Tensor::row({-3, 2, 0});
    Tensor y = relu_forward(x);
    CHECK(y[0] == 0);
    CHECK(y[1] == 2);
    CHECK(y[2] == 0);
}

TEST_CASE("conv identity and averaging kernels") {
    // 1x1 kernel with identity weights copies the input
    Tensor x({1, 3, 3, 1});
    for (size_t i = 0; i < 9; ++i) x[i] = static_cast<double>(i + 1);
    Tensor w1({1, 1, 1, 1});
    w1[0] = 1.0;
    Tensor b1({1});
    Conv2dSpec id_spec{1, Padding::Valid};
    Tensor y = conv2d_forward(x, w1, b1, id_spec);
    for (size_t i = 0; i < 9; ++i) CHECK(y[i] == x[i]);

    // 3x3 averaging kernel, valid padding: single output = mean * 9 / 9 = mean
    Tensor w9({3, 3, 1, 1});
    for (size_t i = 0; i < 9; ++i) w9[i] = 1.0 / 9.0;
    Conv2dSpec avg_spec{1, Padding::Valid};
    Tensor m = conv2d_forward(x, w9, b1, avg_spec);
    CHECK(m.size() == 1);
    CHECK(m[0] == doctest::Approx(5.0).epsilon(1e-12));  // mean of 1..9
}

TEST_CASE("batch norm closed forms") {
    BatchNormLayer bn("bn", 1);

    // constant column: normalized to zero, so the output is beta
    bn.beta.value[0] = 0.7;
    Tensor x = Tensor::matrix(3, 1, {4, 4, 4});
    ad::Var y = bn.apply(ad::leaf(x), true, false);
    for (size_t i = 0; i < 3; ++i) CHECK(y->value[i] == doctest::Approx(0.7).epsilon(1e-12));

    // {-1, +1} column: unit variance preserved up to epsilon
    bn.beta.value[0] = 0.0;
    Tensor x2 = Tensor::matrix(2, 1, {-1, 1});
    ad::Var y2 = bn.apply(ad::leaf(x2), true, false);
    const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
    CHECK(y2->value[0] == doctest::Approx(-expect).epsilon(1e-12));
    CHECK(y2->value[1] == doctest::Approx(expect).epsilon(1e-12));

    // training mode needs at least two rows
    CHECK_THROWS_AS(bn.apply(ad::leaf(Tensor::matrix(1, 1, {3})), true, false), DegenerateBatch);
}

TEST_CASE("lstm zero parameters zero state") {
    Rng rng(1);
    LstmLayer lstm("l", 2, 3, rng);
    lstm.wx.value.fill(0.0);
    lstm.wh.value.fill(0.0);
    lstm.b.value.fill(0.0);
    Tensor x = Tensor::matrix(1, 2, {0.3, -0.4});
    ad::Var h = lstm.run({ad::leaf(x)});
    // gates 0.5, candidate tanh(0) = 0, so h' = c' = 0
    for (size_t i = 0; i < 3; ++i) CHECK(h->value[i] == 0.0);
}

TEST_CASE("softmax cross entropy closed forms") {
    Tensor uniform({1, 4});
    auto res = softmax_cross_entropy(uniform, {0});
    CHECK(res.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    double rowsum = 0.0;
    for (size_t k = 0; k < 4; ++k) rowsum += res.probs.at(0, k);
    CHECK(rowsum == doctest::Approx(1.0).epsilon(1e-12));

    Tensor two = Tensor::matrix(1, 2, {1, 0});
    auto r2 = softmax_cross_entropy(two, {0});
    CHECK(r2.loss == doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));

    // a huge margin on the true class drives the loss to zero
    Tensor margin = Tensor::matrix(1, 2, {60, 0});
    CHECK(softmax_cross_entropy(margin, {0}).loss < 1e-12);

    CHECK_THROWS_AS(softmax_cross_entropy(two, {5}), LabelOutOfRange);
}

TEST_CASE("sgd step arithmetic and freezing") {
    Parameter p("p", Tensor::row({1.0}));
    p.grad[0] = 0.5;
    sgd_step({&p}, 0.1);
    CHECK(p.value[0] == doctest::Approx(0.95).epsilon(1e-15));

    // lr = 0 is the identity
    p.grad[0] = 123.0;
    sgd_step({&p}, 0.0);
    CHECK(p.value[0] == doctest::Approx(0.95).epsilon(1e-15));

    // frozen parameters never move
    p.frozen = true;
    sgd_step({&p}, 0.1);
    CHECK(p.value[0] == doctest::Approx(0.95).epsilon(1e-15));
}

TEST_CASE("grad_check primitive cases") {
    // f(x) = x^2 at 3: central differences are exact for quadratics
    Tensor x = Tensor::row({3.0});
    Tensor analytic = Tensor::row({6.0});
    auto sq = [](const Tensor& t) { return t[0] * t[0]; };
    GradCheckReport r = grad_check(sq, x, analytic);
    CHECK(r.max_rel_err < 1e-9);

    // relu at -1 is locally constant: both sides zero
    Tensor xm = Tensor::row({-1.0});
    Tensor zero = Tensor::row({0.0});
    auto rl = [](const Tensor& t) { return t[0] > 0.0 ? t[0] : 0.0; };
    CHECK(grad_check(rl, xm, zero).max_rel_err == 0.0);

    // non-finite objectives are an error
    auto bad = [](const Tensor&) { return std::numeric_limits<double>::quiet_NaN(); };
    CHECK_THROWS_AS(grad_check(bad, x, analytic), NonFiniteValue);
}

TEST_CASE("graph backward on a composite expression") {
    // d/dx of sum(relu(x W + b) * c) via the graph vs central differences
    Rng rng(7);
    Tensor x = randn({2, 3}, rng);
    AffineLayer lin("lin", 3, 4, rng);
    Tensor c = randn({2, 4}, rng, 0.001);
    auto model = [&](const ad::Var& v) { return ad::weighted_sum(ad::relu(lin(v)), c); };
    GradCheckReport r = ad::grad_check_graph(model, x);
    CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("gradient battery spot checks") {
    // the full 10-seed battery is the acceptance gate; here a cheap sample
    for (const char* name : {"affine", "lstm", "joint"}) {
        TargetReport r = run_gradcheck_target(name, 2);
        CAPTURE(name);
        CHECK(r.max_rel_err < kGradTolerance);
    }
    CHECK_THROWS_AS(run_gradcheck_target("no_such_module", 1), ValidationError);
    CHECK(gradcheck_targets().size() == 14);
}

TEST_CASE("forward determinism") {
    Rng rng1(11), rng2(11);
    BackboneConfig cfg = BackboneConfig::desk_small(4);
    cfg.input_size = 28;
    cfg.stem_filters = 4;
    cfg.stages = {{1, 4}, {1, 8}};
    Backbone b1(cfg, rng1), b2(cfg, rng2);
    Rng rx(5);
    Tensor x = randn({2, 28, 28, 3}, rx, 0.1);
    auto o1 = b1.forward(ad::leaf(x), false);
    auto o2 = b2.forward(ad::leaf(x), false);
    CHECK(bit_equal(o1.logits->value, o2.logits->value));
    CHECK(bit_equal(o1.f_g->value, o2.f_g->value));
}
