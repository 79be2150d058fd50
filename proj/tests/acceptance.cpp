// Acceptance gate: one line per criterion, nonzero exit if any fail.
// Heavier criteria (5 and 6) train small models end to end and dominate the
// runtime; everything else finishes in seconds.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "prnet/eval.hpp"
#include "prnet/gradcheck.hpp"
#include "prnet/train.hpp"

using namespace prnet;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool check_gradient_fidelity(std::string& detail) {
    auto t0 = Clock::now();
    std::vector<TargetReport> reports = run_gradcheck("all", 10);
    double worst = 0.0;
    std::string worst_name;
    bool ok = true;
    for (const TargetReport& r : reports) {
        if (r.max_rel_err > worst) {
            worst = r.max_rel_err;
            worst_name = r.target;
        }
        ok = ok && r.pass();
    }
    double elapsed = seconds_since(t0);
    ok = ok && elapsed < 120.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%zu targets, worst %.3e (%s), %.1fs", reports.size(), worst,
                  worst_name.c_str(), elapsed);
    detail = buf;
    return ok;
}

bool check_pair_enumeration(std::string& detail) {
    auto p68 = enumerate_pairs(68);
    bool ok = p68.size() == 2278 && std::is_sorted(p68.begin(), p68.end()) &&
              p68.front() == std::pair<size_t, size_t>{0, 1} &&
              p68.back() == std::pair<size_t, size_t>{66, 67};
    for (auto [i, j] : p68) ok = ok && i < j;
    for (size_t n = 2; n <= 100 && ok; ++n) {
        auto ps = enumerate_pairs(n);
        ok = ps.size() == n * (n - 1) / 2 && std::is_sorted(ps.begin(), ps.end()) &&
             std::adjacent_find(ps.begin(), ps.end()) == ps.end();
    }
    detail = "68 -> " + std::to_string(p68.size()) + " pairs, counts hold for n in [2,100]";
    return ok;
}

bool check_aggregation_invariance(std::string& detail) {
    Rng rng(5);
    auto pairs = enumerate_pairs(10);
    size_t checked = 0;
    bool ok = true;
    for (int set = 0; set < 10; ++set) {
        std::vector<Relation> rel;
        for (auto [i, j] : pairs) {
            Tensor v({6});
            for (size_t k = 0; k < 6; ++k) v[k] = rng.normal();
            rel.push_back({i, j, v});
        }
        Tensor ref = aggregate(rel);
        for (int shuffle = 0; shuffle < 100; ++shuffle) {
            std::vector<Relation> mixed = rel;
            rng.shuffle(mixed);
            ok = ok && bit_equal(aggregate(mixed), ref);
            ++checked;
        }
    }
    detail = std::to_string(checked) + " shuffles bit-identical";
    return ok;
}

bool check_loss_values(std::string& detail) {
    auto tri = [](double ax, double px, double nx) {
        return Triplet{Tensor::row({ax, 0.0}), Tensor::row({px, 0.0}), Tensor::row({nx, 0.0})};
    };
    bool ok = std::fabs(triplet_ratio_loss({tri(0, 1, 0)}, 1.0) - 1.0) < 1e-12;
    ok = ok && std::fabs(triplet_ratio_loss({tri(0, 1, 2)}, 1.0)) < 1e-12;
    ok = ok && std::fabs(triplet_ratio_loss({tri(0, 2, 1)}, 1.0) - 2.0 / 3.0) < 1e-12;
    ok = ok && std::fabs(pairwise_loss({tri(1, 1, 0)})) < 1e-12;
    ok = ok && std::fabs(pairwise_loss({tri(0, 5, 0)}) - 25.0) < 1e-12;

    // doubling every embedding scales the pairwise term by exactly four
    Rng rng(7);
    for (int i = 0; i < 50 && ok; ++i) {
        Tensor a({4}), p({4}), n({4});
        for (size_t k = 0; k < 4; ++k) {
            a[k] = rng.normal();
            p[k] = rng.normal();
            n[k] = rng.normal();
        }
        Tensor a2 = a, p2 = p, n2 = n;
        for (size_t k = 0; k < 4; ++k) {
            a2[k] *= 2.0;
            p2[k] *= 2.0;
            n2[k] *= 2.0;
        }
        double base = pairwise_loss({{a, p, n}});
        double scaled = pairwise_loss({{a2, p2, n2}});
        ok = ok && std::fabs(scaled - 4.0 * base) <= 1e-9 * std::max(1.0, std::fabs(4.0 * base));
    }
    detail = "hinge cases 1, 0, 2/3; distances 0, 25; 2x input -> 4x pairwise";
    return ok;
}

bool check_desk_training(std::string& detail) {
    auto t0 = Clock::now();
    DataGenConfig dc;
    dc.num_ids = 16;
    dc.per_id = 40;
    dc.image_size = 56;
    dc.seed = 11;
    Dataset data = gen_dataset(dc);

    ModelConfig mc;
    mc.backbone = BackboneConfig::desk_small(16);
    mc.variant = Variant::A;
    mc.init_seed = 7;
    FaceModel model(mc);
    Trainer trainer(model, data);

    StageOptions opt;
    opt.lr = 0.1;
    opt.momentum = 0.9;
    opt.batch = 32;
    opt.epochs = 30;
    opt.weights = {1.0, 0.1, 1.0};
    opt.mean_reduction = true;
    opt.stop_acc = 0.90;

    StageResult r = trainer.train_stage(Stage::Backbone, opt);
    bool finite = true;
    for (const LossRecord& rec : r.log)
        finite = finite && std::isfinite(rec.joint) && std::isfinite(rec.l_t) &&
                 std::isfinite(rec.l_p) && std::isfinite(rec.l_s);
    double elapsed = seconds_since(t0);
    bool ok = finite && r.val_acc >= 0.90 && r.epochs_run <= 30 && elapsed < 600.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "val acc %.3f after %zu epoch(s), losses finite, %.0fs",
                  r.val_acc, r.epochs_run, elapsed);
    detail = buf;
    return ok;
}

bool check_variant_trend(std::string& detail) {
    auto t0 = Clock::now();
    TrendOptions opt;
    opt.data.num_ids = 20;
    opt.data.per_id = 18;
    opt.data.image_size = 28;
    opt.data.brightness = 0.25;
    opt.data.noise = 0.02;
    opt.data.color_spread = 0.18;
    opt.data.deform = 4.5;
    opt.model.backbone.input_size = 28;
    opt.model.backbone.stem_filters = 12;
    opt.model.backbone.stages = {{1, 12}, {1, 24}};
    opt.model.relation.g_layers = {24, 24};
    opt.model.relation.f_layers = {24, 24};
    opt.model.relation.lstm_hidden = 24;
    opt.model.relation.sid_width = 12;
    opt.model.relation.embed_dim = 24;
    opt.model.relation.landmark_count = 9;
    for (StageOptions& s : opt.stage) {
        s.lr = 0.08;
        s.lr_decay = 0.93;
        s.batch = 32;
        s.epochs = 28;
        s.weights = {1.0, 0.1, 1.0};
        s.mean_reduction = true;
        s.stop_acc = 0.995;
    }
    opt.seeds = {11, 12, 13, 14, 15};

    TrendResult r = trend_check(opt);
    size_t plus = 0, cb = 0;
    for (const TrendSeedRow& row : r.rows) {
        plus += row.acc_prnplus >= row.acc_prn;
        cb += row.acc_c >= row.acc_b;
    }
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "conditioned>=plain %zu/5, fused-C>=fused-B %zu/5, medians close %s, %.0fs",
                  plus, cb, r.c_close_to_a ? "yes" : "no", seconds_since(t0));
    detail = buf;
    return r.pass;
}

bool check_eval_oracles(std::string& detail) {
    Rng rng(101);
    size_t verify_checked = 0, identify_checked = 0;
    bool ok = true;
    for (int instance = 0; instance < 50 && ok; ++instance) {
        size_t ids = 3 + rng.index(6);
        size_t n = std::min<size_t>(200, 2 * ids + 10 + rng.index(60));
        size_t dim = 2 + rng.index(5);
        bool quantize = instance % 3 == 0;  // force exact score ties
        Tensor emb = oracle::random_embeddings(n, dim, rng, quantize);
        std::vector<size_t> labels = oracle::random_labels(n, ids, rng);

        EvalReport v = verify_pairs(emb, all_pairs(labels));
        auto want = oracle::tar_at_far(emb, all_pairs(labels), kFarPoints);
        for (size_t k = 0; k < want.size(); ++k) ok = ok && v.tar_at_far[k].second == want[k];
        for (size_t k = 1; k < v.tar_at_far.size(); ++k)
            ok = ok && v.tar_at_far[k].second >= v.tar_at_far[k - 1].second;
        ++verify_checked;

        // split the same instance into gallery and probes
        size_t gsize = std::max<size_t>(ids, n / 2);
        Tensor gallery({gsize, dim}), probes({n - gsize, dim});
        std::vector<size_t> glab(labels.begin(), labels.begin() + gsize);
        std::vector<size_t> plab(labels.begin() + gsize, labels.end());
        for (size_t i = 0; i < gsize * dim; ++i) gallery[i] = emb[i];
        for (size_t i = 0; i < (n - gsize) * dim; ++i) probes[i] = emb[gsize * dim + i];
        // shift a few probe labels outside the gallery's set for unmated rows
        for (size_t i = 0; i < plab.size(); i += 4) plab[i] = ids + 1 + i;

        EvalReport id = identify(gallery, glab, probes, plab);
        auto want_rank = oracle::rank_n(gallery, glab, probes, plab,
                                        std::vector<size_t>(kRankPoints));
        for (size_t k = 0; k < want_rank.size(); ++k) ok = ok && id.rank_n[k].second == want_rank[k];
        auto want_open = oracle::tpir_at_fpir(gallery, glab, probes, plab, kFpirPoints);
        for (size_t k = 0; k < want_open.size(); ++k)
            ok = ok && id.tpir_at_fpir[k].second == want_open[k];
        for (size_t k = 1; k < id.rank_n.size(); ++k)
            ok = ok && id.rank_n[k].second >= id.rank_n[k - 1].second;
        for (size_t k = 1; k < id.tpir_at_fpir.size(); ++k)
            ok = ok && id.tpir_at_fpir[k].second >= id.tpir_at_fpir[k - 1].second;
        ++identify_checked;
    }
    detail = std::to_string(verify_checked) + " verification + " +
             std::to_string(identify_checked) + " identification instances match exactly";
    return ok;
}

bool check_alignment_rows(std::string& detail) {
    Rng rng(41);
    double worst_row = 0.0, worst_rot = 0.0;
    bool ok = true;
    for (int trial = 0; trial < 100; ++trial) {
        LandmarkSet lm = face_template();
        SimilarityTransform pose;
        pose.rotation = rng.uniform(-0.6, 0.6);
        pose.scale = rng.uniform(0.7, 1.6);
        pose.dx = rng.uniform(-20.0, 20.0);
        pose.dy = rng.uniform(-20.0, 20.0);
        lm = pose.apply(lm);
        for (auto& p : lm.points) {
            p.x += rng.uniform(-0.8, 0.8);
            p.y += rng.uniform(-0.8, 0.8);
        }
        LandmarkSet aligned = align_face(lm, 140.0).aligned;
        double eye = std::fabs(aligned.eye_centroid().y - 42.0);
        double mouth = std::fabs(aligned.mouth_centroid().y - 91.0);
        worst_row = std::max({worst_row, eye, mouth});
        ok = ok && eye < 1e-6 && mouth < 1e-6;

        // an extra rotation of the input must not move the aligned output
        SimilarityTransform extra;
        extra.rotation = rng.uniform(-1.0, 1.0);
        LandmarkSet spun = align_face(extra.apply(lm), 140.0).aligned;
        for (size_t i = 0; i < kLandmarkCount; ++i) {
            double dx = std::fabs(spun.points[i].x - aligned.points[i].x);
            double dy = std::fabs(spun.points[i].y - aligned.points[i].y);
            worst_rot = std::max({worst_rot, dx, dy});
            ok = ok && dx < 1e-6 && dy < 1e-6;
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "100 sets: worst row error %.2e, worst rotation drift %.2e", worst_row,
                  worst_rot);
    detail = buf;
    return ok;
}

bool check_checkpoint_fidelity(std::string& detail) {
    DataGenConfig dc;
    dc.num_ids = 4;
    dc.per_id = 10;
    dc.image_size = 28;
    dc.seed = 21;
    Dataset data = gen_dataset(dc);

    ModelConfig mc;
    mc.backbone = BackboneConfig::desk_small(4);
    mc.backbone.input_size = 28;
    mc.backbone.stem_filters = 6;
    mc.backbone.stages = {{1, 6}, {1, 12}};
    mc.relation.g_layers = {8, 8};
    mc.relation.f_layers = {8, 8};
    mc.relation.lstm_hidden = 8;
    mc.relation.sid_width = 4;
    mc.relation.embed_dim = 12;
    mc.relation.landmark_count = 5;
    mc.variant = Variant::C;
    mc.init_seed = 5;
    FaceModel model(mc);
    Trainer trainer(model, data);

    StageOptions opt;
    opt.epochs = 1;
    opt.batch = 8;
    opt.lr = 0.05;
    opt.weights = {1.0, 0.1, 1.0};
    opt.mean_reduction = true;

    trainer.train_stage(Stage::Backbone, opt);
    trainer.train_stage(Stage::Encoder, opt);
    uint64_t frozen = model.backbone.checksum();
    trainer.train_stage(Stage::Prn, opt);
    bool backbone_intact = model.backbone.checksum() == frozen;
    trainer.train_stage(Stage::Fusion, opt);
    backbone_intact = backbone_intact && model.backbone.checksum() == frozen;

    Tensor emb = trainer.embeddings(true);
    const char* path = "acceptance_roundtrip.ckpt";
    model.save(path);
    FaceModel back = FaceModel::load(path);
    Trainer tb(back, data);
    bool bitexact = bit_equal(tb.embeddings(true), emb);
    std::remove(path);

    detail = std::string("reloaded forwards ") + (bitexact ? "bit-exact" : "DIFFER") +
             ", frozen backbone checksum " + (backbone_intact ? "unchanged" : "CHANGED");
    return bitexact && backbone_intact;
}

}  // namespace

int main() {
    struct Criterion {
        const char* label;
        bool (*fn)(std::string&);
    };
    const Criterion criteria[] = {
        {"gradient fidelity", check_gradient_fidelity},
        {"pair enumeration", check_pair_enumeration},
        {"aggregation order invariance", check_aggregation_invariance},
        {"loss closed forms", check_loss_values},
        {"desk-scale training", check_desk_training},
        {"variant accuracy trend", check_variant_trend},
        {"metric oracles", check_eval_oracles},
        {"alignment rows", check_alignment_rows},
        {"checkpoint fidelity", check_checkpoint_fidelity},
    };

    int failures = 0;
    for (size_t i = 0; i < std::size(criteria); ++i) {
        std::string detail;
        bool ok = false;
        try {
            ok = criteria[i].fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("criterion %zu (%s): %s  [%s]\n", i + 1, criteria[i].label,
                    ok ? "PASS" : "FAIL", detail.c_str());
        std::fflush(stdout);
        failures += !ok;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures ? 1 : 0;
}
