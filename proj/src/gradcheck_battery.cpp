#include <algorithm>
#include <cmath>
#include <functional>

#include "prnet/backbone.hpp"
#include "prnet/eval.hpp"
#include "prnet/gradcheck.hpp"
#include "prnet/layers.hpp"
#include "prnet/losses.hpp"
#include "prnet/prn.hpp"
#include "prnet/rng.hpp"

namespace prnet {

namespace {

// Finite differences must not step across a relu or hinge kink; samples whose
// slack is below this are redrawn. h = 1e-5 moves any preactivation of these
// tiny instances by orders of magnitude less.
constexpr double kKinkSlack = 1e-3;
constexpr size_t kMaxDraws = 64;

// Module probes project the output to a scalar with weights this size. Small
// weights keep the objective's rounding noise (eps * |f| / 2h) below the 1e-8
// error floor, which matters for directions whose true gradient is an exact
// cancellation: a bias feeding straight into batch norm differentiates to
// zero analytically but to pure float noise numerically. Relative errors of
// ordinary directions are scale-invariant, so nothing else moves.
constexpr double kProbeScale = 1e-3;

Tensor randn(std::vector<size_t> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
    return t;
}

struct Built {
    ad::Var root;
    std::vector<ad::Var> input_leaves;  // aligned with the input slots
};

// Checks every input slot and every parameter of one rebuildable scalar
// objective. The builder must read inputs/parameters from their storage so a
// perturbed slot flows into a fresh graph.
double check_probe(const std::function<Built()>& build, const std::vector<Tensor*>& inputs,
                   const std::vector<Parameter*>& params) {
    Built base = build();
    ad::backward(base.root);
    for (Parameter* p : params) p->zero_grad();
    ad::accumulate_param_grads(base.root);

    double worst = 0.0;
    auto check_slot = [&](Tensor* slot, const Tensor& analytic) {
        const Tensor saved = *slot;
        auto f = [&](const Tensor& t) {
            *slot = t;
            return build().root->value[0];
        };
        GradCheckReport r = grad_check(f, saved, analytic);
        *slot = saved;
        worst = std::max(worst, r.max_rel_err);
    };
    for (size_t i = 0; i < inputs.size(); ++i) {
        base.input_leaves[i]->ensure_grad();
        check_slot(inputs[i], base.input_leaves[i]->grad);
    }
    for (Parameter* p : params) check_slot(&p->value, p->grad);
    return worst;
}

// Runs the forward once with kink tracking on; true when every relu input
// clears the kink by kKinkSlack.
bool clears_relu(const std::function<Built()>& build) {
    ad::monitor_relu_kink(true);
    build();
    const double gap = ad::relu_kink_gap();
    ad::monitor_relu_kink(false);
    return gap > kKinkSlack;
}

Rng draw_rng(uint64_t seed, uint64_t salt, uint64_t attempt) {
    return Rng(seed * 1000003 + attempt * 7919 + salt);
}

[[noreturn]] void no_clear_sample(const char* target) {
    throw NumericalError(std::string(target) + ": no kink-free sample after " +
                         std::to_string(kMaxDraws) + " draws");
}

double run_affine(uint64_t seed) {
    Rng rng = draw_rng(seed, 11, 0);
    Tensor x = randn({3, 4}, rng);
    AffineLayer lin("lin", 4, 3, rng);
    Tensor pw = randn({3, 3}, rng, kProbeScale);
    auto build = [&]() -> Built {
        ad::Var xv = ad::leaf(x, true);
        return {ad::weighted_sum(lin(xv), pw), {xv}};
    };
    return check_probe(build, {&x}, lin.params());
}

double run_conv(uint64_t seed) {
    Rng rng = draw_rng(seed, 23, 0);
    // stride and padding alternate across seeds so both code paths get hit
    const size_t stride = 1 + seed % 2;
    const Padding pad = (seed % 4 < 2) ? Padding::Same : Padding::Valid;
    Tensor x = randn({2, 5, 5, 2}, rng);
    Conv2dLayer conv("conv", 3, 2, 3, stride, pad, rng);
    ad::Var y0 = conv(ad::leaf(x, false));
    Tensor pw = randn(y0->value.shape(), rng, kProbeScale);
    auto build = [&]() -> Built {
        ad::Var xv = ad::leaf(x, true);
        return {ad::weighted_sum(conv(xv), pw), {xv}};
    };
    return check_probe(build, {&x}, conv.params());
}

double run_bottleneck(uint64_t seed) {
    for (uint64_t attempt = 0; attempt < kMaxDraws; ++attempt) {
        Rng rng = draw_rng(seed, 37, attempt);
        const size_t stride = 1 + seed % 2;
        Tensor x = randn({2, 4, 4, 3}, rng);
        Bottleneck block("block", 3, 2, 2, stride, rng);
        ad::Var y0 = block.forward(ad::leaf(x, false), true, false);
        Tensor pw = randn(y0->value.shape(), rng, kProbeScale);
        auto build = [&]() -> Built {
            ad::Var xv = ad::leaf(x, true);
            return {ad::weighted_sum(block.forward(xv, true, false), pw), {xv}};
        };
        if (!clears_relu(build)) continue;
        return check_probe(build, {&x}, block.params());
    }
    no_clear_sample("bottleneck");
}

double run_batchnorm(uint64_t seed) {
    Rng rng = draw_rng(seed, 41, 0);
    Tensor x = randn({5, 4}, rng);
    BatchNormLayer bn("bn", 4);
    // nontrivial scale/shift so their gradients are not checked at identity
    bn.gamma.value = randn({4}, rng, 0.5);
    bn.beta.value = randn({4}, rng, 0.5);
    for (size_t i = 0; i < 4; ++i) bn.gamma.value[i] += 1.0;
    Tensor pw = randn({5, 4}, rng, kProbeScale);
    auto build = [&]() -> Built {
        ad::Var xv = ad::leaf(x, true);
        return {ad::weighted_sum(bn.apply(xv, true, false), pw), {xv}};
    };
    return check_probe(build, {&x}, bn.params());
}

double run_relu_chain(uint64_t seed) {
    for (uint64_t attempt = 0; attempt < kMaxDraws; ++attempt) {
        Rng rng = draw_rng(seed, 53, attempt);
        Tensor x = randn({3, 4}, rng);
        AffineLayer l1("l1", 4, 5, rng);
        AffineLayer l2("l2", 5, 3, rng);
        Tensor pw = randn({3, 3}, rng, kProbeScale);
        auto build = [&]() -> Built {
            ad::Var xv = ad::leaf(x, true);
            ad::Var h = ad::relu(l1(xv));
            return {ad::weighted_sum(ad::relu(l2(h)), pw), {xv}};
        };
        if (!clears_relu(build)) continue;
        std::vector<Parameter*> params = l1.params();
        append_params(params, l2.params());
        return check_probe(build, {&x}, params);
    }
    no_clear_sample("relu_chain");
}

double run_lstm(uint64_t seed) {
    Rng rng = draw_rng(seed, 67, 0);
    Tensor x0 = randn({2, 3}, rng);
    Tensor x1 = randn({2, 3}, rng);
    Tensor x2 = randn({2, 3}, rng);
    LstmLayer lstm("lstm", 3, 4, rng);
    Tensor pw = randn({2, 4}, rng, kProbeScale);
    auto build = [&]() -> Built {
        ad::Var v0 = ad::leaf(x0, true);
        ad::Var v1 = ad::leaf(x1, true);
        ad::Var v2 = ad::leaf(x2, true);
        return {ad::weighted_sum(lstm.run({v0, v1, v2}), pw), {v0, v1, v2}};
    };
    return check_probe(build, {&x0, &x1, &x2}, lstm.params());
}

double run_softmax_ce(uint64_t seed) {
    Rng rng = draw_rng(seed, 71, 0);
    Tensor logits = randn({4, 5}, rng, 2.0);
    std::vector<size_t> labels(4);
    for (size_t& l : labels) l = rng.index(5);
    auto build = [&]() -> Built {
        ad::Var lv = ad::leaf(logits, true);
        return {ad::softmax_ce(lv, labels), {lv}};
    };
    return check_probe(build, {&logits}, {});
}

// The pair pathway: gather both members of every landmark pair, concatenate,
// push through the shared relation MLP, and sum per face.
double run_relation_mlp(uint64_t seed) {
    const size_t batch = 2, n = 4, channels = 3;
    const auto pairs = enumerate_pairs(n);
    std::vector<size_t> idx_a, idx_b;
    for (size_t b = 0; b < batch; ++b) {
        for (const auto& [i, j] : pairs) {
            idx_a.push_back(b * n + i);
            idx_b.push_back(b * n + j);
        }
    }
    for (uint64_t attempt = 0; attempt < kMaxDraws; ++attempt) {
        Rng rng = draw_rng(seed, 83, attempt);
        Tensor locals = randn({batch * n, channels}, rng);
        MlpLayer g("g", 2 * channels, {4, 4}, rng);
        Tensor pw = randn({batch, 4}, rng, kProbeScale);
        auto build = [&]() -> Built {
            ad::Var lv = ad::leaf(locals, true);
            ad::Var cat = ad::concat_cols({ad::gather_rows(lv, idx_a), ad::gather_rows(lv, idx_b)});
            ad::Var rel = g.forward(cat, true, false);
            return {ad::weighted_sum(ad::sum_row_groups(rel, pairs.size()), pw), {lv}};
        };
        if (!clears_relu(build)) continue;
        return check_probe(build, {&locals}, g.params());
    }
    no_clear_sample("relation_mlp");
}

double run_prediction_mlp(uint64_t seed) {
    for (uint64_t attempt = 0; attempt < kMaxDraws; ++attempt) {
        Rng rng = draw_rng(seed, 97, attempt);
        Tensor agg = randn({3, 5}, rng);
        MlpLayer f("f", 5, {4, 3}, rng);
        Tensor pw = randn({3, 3}, rng, kProbeScale);
        auto build = [&]() -> Built {
            ad::Var av = ad::leaf(agg, true);
            return {ad::weighted_sum(f.forward(av, true, false), pw), {av}};
        };
        if (!clears_relu(build)) continue;
        return check_probe(build, {&agg}, f.params());
    }
    no_clear_sample("prediction_mlp");
}

double run_identity_encoder(uint64_t seed) {
    RelationConfig rc;
    rc.g_layers = {4};
    rc.f_layers = {4};
    rc.lstm_hidden = 4;
    rc.sid_width = 3;
    rc.embed_dim = 4;
    rc.landmark_count = 4;
    const size_t batch = 2, channels = 3, classes = 5;
    for (uint64_t attempt = 0; attempt < kMaxDraws; ++attempt) {
        Rng rng = draw_rng(seed, 101, attempt);
        Tensor locals = randn({batch * rc.landmark_count, channels}, rng);
        IdentityEncoder enc("enc", channels, rc, classes, rng);
        Tensor pw_s = randn({batch, rc.sid_width}, rng, kProbeScale);
        Tensor pw_c = randn({batch, classes}, rng, kProbeScale);
        auto build = [&]() -> Built {
            ad::Var lv = ad::leaf(locals, true);
            IdentityEncoder::Out out = enc.forward(lv, batch);
            // both heads contribute so the state path and the class path get checked
            ad::Var root = ad::combine(
                {{1.0, ad::weighted_sum(out.sid, pw_s)}, {0.5, ad::weighted_sum(out.logits, pw_c)}});
            return {root, {lv}};
        };
        if (!clears_relu(build)) continue;
        return check_probe(build, {&locals}, enc.params());
    }
    no_clear_sample("identity_encoder");
}

double run_fusion(uint64_t seed) {
    for (uint64_t attempt = 0; attempt < kMaxDraws; ++attempt) {
        Rng rng = draw_rng(seed, 113, attempt);
        Tensor fg = randn({3, 4}, rng);
        Tensor rel = randn({3, 3}, rng);
        FusionModel fus("fus", 4, 3, 4, rng);
        Tensor pw = randn({3, 4}, rng, kProbeScale);
        auto build = [&]() -> Built {
            ad::Var fgv = ad::leaf(fg, true);
            ad::Var relv = ad::leaf(rel, true);
            return {ad::weighted_sum(fus.forward(fgv, relv, true, false), pw), {fgv, relv}};
        };
        if (!clears_relu(build)) continue;
        return check_probe(build, {&fg, &rel}, fus.params());
    }
    no_clear_sample("fusion");
}

const std::vector<TripletIdx> kProbeTriplets = {{0, 1, 2}, {3, 4, 5}, {1, 0, 5}, {4, 3, 2}};

// Slack of the hinge argument 1 - dn/(dp + margin) and of both norms; the
// loss is only differentiable away from all three kinks.
bool clears_hinge(const Tensor& emb, const std::vector<TripletIdx>& triplets, double margin) {
    for (const TripletIdx& t : triplets) {
        const double dp = std::sqrt(sq_l2(emb, t.anchor, t.positive));
        const double dn = std::sqrt(sq_l2(emb, t.anchor, t.negative));
        if (dp < kKinkSlack || dn < kKinkSlack) return false;
        if (std::fabs(1.0 - dn / (dp + margin)) < kKinkSlack) return false;
    }
    return true;
}

double run_triplet_ratio(uint64_t seed) {
    const double margin = 0.1;
    const bool mean = seed % 2 == 0;
    for (uint64_t attempt = 0; attempt < kMaxDraws; ++attempt) {
        Rng rng = draw_rng(seed, 127, attempt);
        Tensor emb = randn({6, 4}, rng);
        if (!clears_hinge(emb, kProbeTriplets, margin)) continue;
        auto build = [&]() -> Built {
            ad::Var ev = ad::leaf(emb, true);
            return {triplet_ratio_loss(ev, kProbeTriplets, margin, mean), {ev}};
        };
        return check_probe(build, {&emb}, {});
    }
    no_clear_sample("triplet_ratio");
}

double run_pairwise(uint64_t seed) {
    const bool mean = seed % 2 == 0;
    Rng rng = draw_rng(seed, 131, 0);
    Tensor emb = randn({6, 4}, rng);
    auto build = [&]() -> Built {
        ad::Var ev = ad::leaf(emb, true);
        return {pairwise_loss(ev, kProbeTriplets, mean), {ev}};
    };
    return check_probe(build, {&emb}, {});
}

double run_joint(uint64_t seed) {
    const double margin = 0.1;
    const bool mean = seed % 2 == 0;
    const LossWeights weights{0.7, 0.4, 1.3};
    const std::vector<size_t> labels = {0, 0, 1, 1, 3};
    const std::vector<TripletIdx> triplets = {{0, 1, 2}, {2, 3, 4}, {1, 0, 4}};
    for (uint64_t attempt = 0; attempt < kMaxDraws; ++attempt) {
        Rng rng = draw_rng(seed, 139, attempt);
        Tensor emb = randn({5, 3}, rng);
        Tensor logits = randn({5, 4}, rng, 2.0);
        if (!clears_hinge(emb, triplets, margin)) continue;
        auto build = [&]() -> Built {
            ad::Var ev = ad::leaf(emb, true);
            ad::Var lv = ad::leaf(logits, true);
            JointLoss jl = joint_loss(ev, lv, labels, triplets, margin, weights, mean);
            return {jl.total, {ev, lv}};
        };
        return check_probe(build, {&emb, &logits}, {});
    }
    no_clear_sample("joint");
}

struct Entry {
    const char* name;
    double (*run)(uint64_t seed);
};

constexpr Entry kBattery[] = {
    {"affine", run_affine},
    {"conv", run_conv},
    {"bottleneck", run_bottleneck},
    {"batchnorm", run_batchnorm},
    {"relu_chain", run_relu_chain},
    {"lstm", run_lstm},
    {"softmax_ce", run_softmax_ce},
    {"relation_mlp", run_relation_mlp},
    {"prediction_mlp", run_prediction_mlp},
    {"identity_encoder", run_identity_encoder},
    {"fusion", run_fusion},
    {"triplet_ratio", run_triplet_ratio},
    {"pairwise", run_pairwise},
    {"joint", run_joint},
};

}  // namespace

std::vector<std::string> gradcheck_targets() {
    std::vector<std::string> names;
    for (const Entry& e : kBattery) names.emplace_back(e.name);
    return names;
}

TargetReport run_gradcheck_target(const std::string& name, size_t seeds) {
    for (const Entry& e : kBattery) {
        if (name != e.name) continue;
        TargetReport report;
        report.target = name;
        report.seeds_run = seeds;
        for (uint64_t s = 1; s <= seeds; ++s) {
            const double err = e.run(s);
            if (err > report.max_rel_err) {
                report.max_rel_err = err;
                report.worst_seed = s;
            }
        }
        return report;
    }
    throw ValidationError("unknown gradcheck target: " + name);
}

std::vector<TargetReport> run_gradcheck(const std::string& target, size_t seeds) {
    std::vector<TargetReport> reports;
    if (target == "all") {
        for (const Entry& e : kBattery) reports.push_back(run_gradcheck_target(e.name, seeds));
    } else {
        reports.push_back(run_gradcheck_target(target, seeds));
    }
    return reports;
}

}  // namespace prnet
