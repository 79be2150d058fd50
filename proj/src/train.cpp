#include "prnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

#include "prnet/error.hpp"

namespace prnet {

namespace {

constexpr size_t kEvalChunk = 32;

Tensor stack_images(const std::vector<SampleRecord>& split, const std::vector<size_t>& idx) {
    const size_t s = split.at(idx.at(0)).image.dim(0);
    const size_t stride = s * s * 3;
    Tensor out({idx.size(), s, s, 3});
    for (size_t i = 0; i < idx.size(); ++i) {
        const Tensor& img = split[idx[i]].image;
        require_shape(img, {s, s, 3}, "image");
        std::memcpy(out.data() + i * stride, img.data(), stride * sizeof(double));
    }
    return out;
}

Tensor gather_mat(const Tensor& src, const std::vector<size_t>& rows) {
    const size_t c = src.dim(1);
    Tensor out({rows.size(), c});
    for (size_t i = 0; i < rows.size(); ++i) {
        std::memcpy(out.data() + i * c, src.data() + rows[i] * c, c * sizeof(double));
    }
    return out;
}

// Gathers `block` consecutive rows per face, e.g. the per-landmark rows of a
// [faces*block, c] cache.
Tensor gather_block_rows(const Tensor& src, const std::vector<size_t>& faces, size_t block) {
    const size_t c = src.dim(1);
    Tensor out({faces.size() * block, c});
    for (size_t i = 0; i < faces.size(); ++i) {
        std::memcpy(out.data() + i * block * c, src.data() + faces[i] * block * c,
                    block * c * sizeof(double));
    }
    return out;
}

// A valid triplet needs a repeated label plus any second label.
bool batch_has_triplet(const std::vector<size_t>& labels) {
    std::vector<size_t> sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    bool dup = false;
    for (size_t i = 1; i < sorted.size(); ++i) dup = dup || sorted[i] == sorted[i - 1];
    return dup && sorted.front() != sorted.back();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

size_t argmax_row(const Tensor& m, size_t r) {
    size_t best = 0;
    for (size_t j = 1; j < m.dim(1); ++j) {
        if (m.at(r, j) > m.at(r, best)) best = j;
    }
    return best;
}

}  // namespace

StageOptions StageOptions::from_config(const Config& cfg, Stage stage) {
    StageOptions opt;
    opt.lr = cfg.get_double("train", "lr", opt.lr);
    opt.lr_decay = cfg.get_double("train", "lr_decay", opt.lr_decay);
    opt.momentum = cfg.get_double("train", "momentum", opt.momentum);
    opt.batch = cfg.get_size("train", "batch", opt.batch);
    opt.epochs = cfg.get_size("train", "epochs", opt.epochs);
    opt.seed = cfg.get_u64("train", "seed", opt.seed);
    opt.stop_acc = cfg.get_double("train", "stop_acc", opt.stop_acc);
    // Touch every stage's override keys so a config written for a full run
    // passes the unknown-key check when stages train one at a time.
    const size_t base_epochs = opt.epochs;
    const double base_lr = opt.lr;
    for (Stage s : {Stage::Backbone, Stage::Encoder, Stage::Prn, Stage::Fusion}) {
        const size_t epochs = cfg.get_size("train", "epochs_" + stage_name(s), base_epochs);
        const double lr = cfg.get_double("train", "lr_" + stage_name(s), base_lr);
        if (s == stage) {
            opt.epochs = epochs;
            opt.lr = lr;
        }
    }
    opt.mining = parse_mining(cfg.get_str("mining", "strategy", "random-k"));
    opt.mine_k = cfg.get_size("mining", "k", opt.mine_k);
    opt.mine_seed = cfg.get_u64("mining", "seed", opt.mine_seed);
    const std::string red = cfg.get_str("loss", "reduction", "sum");
    if (red != "sum" && red != "mean") {
        throw InvalidConfig("reduction must be sum or mean, got " + red);
    }
    opt.mean_reduction = red == "mean";
    return opt;
}

std::string format_loss_record(const LossRecord& rec) {
    char buf[192];
    std::snprintf(buf, sizeof buf, "%zu, %.9g, %.9g, %.9g, %.9g, %zu", rec.step, rec.l_t, rec.l_p,
                  rec.l_s, rec.joint, rec.active);
    return buf;
}

Trainer::Trainer(FaceModel& model, const Dataset& data) : m_(model), data_(data) {
    if (data_.image_size != m_.cfg.backbone.input_size) {
        throw ValidationError("dataset image size " + std::to_string(data_.image_size) +
                              " does not match backbone input size " +
                              std::to_string(m_.cfg.backbone.input_size));
    }
    if (data_.train.empty() || data_.val.empty()) {
        throw ValidationError("both dataset splits must be nonempty");
    }
}

void Trainer::check_prereq(Stage stage) const {
    if (!m_.needs(stage)) {
        throw InvalidConfig("variant " + variant_name(m_.cfg.variant) + " has no stage " +
                            stage_name(stage));
    }
    auto need = [&](Stage s) {
        if (!m_.done[static_cast<size_t>(s)]) {
            throw MissingPrerequisite("stage " + stage_name(stage) + " requires a trained " +
                                      stage_name(s) + " stage");
        }
    };
    switch (stage) {
        case Stage::Backbone:
            break;
        case Stage::Encoder:
            need(Stage::Backbone);
            break;
        case Stage::Prn:
            need(Stage::Backbone);
            if (m_.prn->conditioned()) need(Stage::Encoder);
            break;
        case Stage::Fusion:
            need(Stage::Backbone);
            if (m_.needs(Stage::Encoder)) need(Stage::Encoder);
            need(Stage::Prn);
            break;
    }
}

void Trainer::ensure_backbone_cache() {
    const size_t c = m_.local_channels();
    const std::vector<size_t> sub = m_.subset();
    const size_t nl = sub.size();
    const RoiSpec spec = m_.roi();
    const size_t g = m_.cfg.backbone.fmap_size();
    for (int v = 0; v < 2; ++v) {
        if (fg_[v]) continue;
        const auto& split = v ? data_.val : data_.train;
        const size_t n = split.size();
        Tensor fg({n, c});
        Tensor loc({n * nl, c});
        for (size_t b0 = 0; b0 < n; b0 += kEvalChunk) {
            const size_t b1 = std::min(n, b0 + kEvalChunk);
            std::vector<size_t> idx(b1 - b0);
            std::iota(idx.begin(), idx.end(), b0);
            auto out = m_.backbone.forward(ad::leaf(stack_images(split, idx)), false, false);
            std::memcpy(fg.data() + b0 * c, out.f_g->value.data(),
                        out.f_g->value.size() * sizeof(double));
            const Tensor& fmv = out.fmap->value;  // [B,G,G,C]
            const size_t stride = g * g * c;
            for (size_t b = b0; b < b1; ++b) {
                Tensor fm({g, g, c});
                std::memcpy(fm.data(), fmv.data() + (b - b0) * stride, stride * sizeof(double));
                LocalFeatureSet lf = extract_local_features(fm, split[b].landmarks, spec);
                for (size_t k = 0; k < nl; ++k) {
                    std::memcpy(loc.data() + (b * nl + k) * c, lf.features.data() + sub[k] * c,
                                c * sizeof(double));
                }
            }
        }
        fg_[v] = std::move(fg);
        locals_[v] = std::move(loc);
    }
}

void Trainer::ensure_sid_cache() {
    if (!m_.encoder) {
        throw InvalidConfig("variant " + variant_name(m_.cfg.variant) +
                            " has no identity encoder");
    }
    ensure_backbone_cache();
    const size_t nl = m_.subset().size();
    const size_t s = m_.encoder->sid_width();
    for (int v = 0; v < 2; ++v) {
        if (sid_[v]) continue;
        const size_t n = (v ? data_.val : data_.train).size();
        Tensor sid({n, s});
        for (size_t b0 = 0; b0 < n; b0 += kEvalChunk) {
            const size_t b1 = std::min(n, b0 + kEvalChunk);
            std::vector<size_t> faces(b1 - b0);
            std::iota(faces.begin(), faces.end(), b0);
            auto loc = ad::leaf(gather_block_rows(*locals_[v], faces, nl));
            auto out = m_.encoder->forward(loc, faces.size());
            std::memcpy(sid.data() + b0 * s, out.sid->value.data(),
                        out.sid->value.size() * sizeof(double));
        }
        sid_[v] = std::move(sid);
    }
}

void Trainer::ensure_rel_cache() {
    if (!m_.prn) {
        throw InvalidConfig("variant " + variant_name(m_.cfg.variant) + " has no relation module");
    }
    ensure_backbone_cache();
    if (m_.prn->conditioned()) ensure_sid_cache();
    const size_t nl = m_.subset().size();
    const size_t r = m_.prn->out_dim();
    for (int v = 0; v < 2; ++v) {
        if (rel_[v]) continue;
        const size_t n = (v ? data_.val : data_.train).size();
        Tensor rel({n, r});
        for (size_t b0 = 0; b0 < n; b0 += kEvalChunk) {
            const size_t b1 = std::min(n, b0 + kEvalChunk);
            std::vector<size_t> faces(b1 - b0);
            std::iota(faces.begin(), faces.end(), b0);
            auto loc = ad::leaf(gather_block_rows(*locals_[v], faces, nl));
            ad::Var sidv;
            const ad::Var* sp = nullptr;
            if (m_.prn->conditioned()) {
                sidv = ad::leaf(gather_mat(*sid_[v], faces));
                sp = &sidv;
            }
            auto out = m_.prn->forward(loc, faces.size(), sp, false, false);
            std::memcpy(rel.data() + b0 * r, out->value.data(), out->value.size() * sizeof(double));
        }
        rel_[v] = std::move(rel);
    }
}

void Trainer::drop_caches_from(Stage stage) {
    const int s = static_cast<int>(stage);
    for (int v = 0; v < 2; ++v) {
        if (s <= 0) {
            fg_[v].reset();
            locals_[v].reset();
        }
        if (s <= 1) sid_[v].reset();
        if (s <= 2) rel_[v].reset();
    }
}

Trainer::Flow Trainer::stage_forward(Stage stage, const std::vector<size_t>& idx, bool val,
                                     bool training) {
    const auto& split = val ? data_.val : data_.train;
    const int si = val ? 1 : 0;
    const size_t nl = m_.subset().size();
    switch (stage) {
        case Stage::Backbone: {
            auto out = m_.backbone.forward(ad::leaf(stack_images(split, idx)), training, training);
            return {out.f_g, out.logits};
        }
        case Stage::Encoder: {
            ensure_backbone_cache();
            auto loc = ad::leaf(gather_block_rows(*locals_[si], idx, nl));
            auto out = m_.encoder->forward(loc, idx.size());
            return {out.sid, out.logits};
        }
        case Stage::Prn: {
            ensure_backbone_cache();
            auto loc = ad::leaf(gather_block_rows(*locals_[si], idx, nl));
            ad::Var sidv;
            const ad::Var* sp = nullptr;
            if (m_.prn->conditioned()) {
                ensure_sid_cache();
                sidv = ad::leaf(gather_mat(*sid_[si], idx));
                sp = &sidv;
            }
            auto rel = m_.prn->forward(loc, idx.size(), sp, training, training);
            return {rel, (*m_.prn_head)(rel)};
        }
        case Stage::Fusion: {
            ensure_backbone_cache();
            ensure_rel_cache();
            auto fg = ad::leaf(gather_mat(*fg_[si], idx));
            auto rel = ad::leaf(gather_mat(*rel_[si], idx));
            auto emb = m_.fusion->forward(fg, rel, training, training);
            return {emb, (*m_.fusion_head)(emb)};
        }
    }
    throw InvalidConfig("unknown stage");
}

StageResult Trainer::train_stage(Stage stage, const StageOptions& opt) {
    check_prereq(stage);
    // Embedding extraction works on any identities, but the softmax heads
    // only train against the label space they were built for.
    if (data_.num_ids != m_.num_classes()) {
        throw ValidationError("dataset has " + std::to_string(data_.num_ids) +
                              " identities but the class head expects " +
                              std::to_string(m_.num_classes()));
    }
    if (opt.batch < 2) throw InvalidConfig("batch size must be at least 2");
    if (opt.epochs == 0) throw InvalidConfig("epochs must be positive");
    StageResult res = run_loop(stage, opt);
    m_.done[static_cast<size_t>(stage)] = true;
    drop_caches_from(stage);
    return res;
}

StageResult Trainer::run_loop(Stage stage, const StageOptions& opt) {
    StageResult res;
    m_.freeze_below(stage);
    auto params = m_.stage_params(stage);
    zero_grads(params);

    LossWeights weights = opt.weights;
    // The encoder is a plain identity classifier; its state vector is not a
    // metric embedding, so the distance terms stay off.
    if (stage == Stage::Encoder) weights = {0.0, 0.0, 1.0};
    const bool metric_terms = weights.w_triplet != 0.0 || weights.w_pairwise != 0.0;
    const double margin = m_.cfg.relation.margin;

    Rng order_rng(opt.seed);
    Rng mine_rng(opt.mine_seed);
    std::vector<size_t> order(data_.train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<Tensor> vel(params.size());
    for (size_t i = 0; i < params.size(); ++i) vel[i] = Tensor(params[i]->value.shape());
    size_t step = 0;
    double lr = opt.lr;
    for (size_t epoch = 0; epoch < opt.epochs; ++epoch) {
        if (epoch > 0) lr *= opt.lr_decay;
        Rng erng = order_rng.fork(epoch + 1);
        erng.shuffle(order);
        for (size_t b0 = 0; b0 < order.size(); b0 += opt.batch) {
            const size_t b1 = std::min(order.size(), b0 + opt.batch);
            std::vector<size_t> idx(order.begin() + b0, order.begin() + b1);
            if (idx.size() < 2) continue;
            std::vector<size_t> labels(idx.size());
            for (size_t i = 0; i < idx.size(); ++i) labels[i] = data_.train[idx[i]].label;
            if (metric_terms && !batch_has_triplet(labels)) continue;

            Flow f = stage_forward(stage, idx, false, true);
            std::vector<TripletIdx> trips;
            if (metric_terms) {
                Rng brng = mine_rng.fork(step + 1);
                trips = mine_triplets(f.emb->value, labels, opt.mining, brng, opt.mine_k);
            }
            JointLoss jl =
                joint_loss(f.emb, f.logits, labels, trips, margin, weights, opt.mean_reduction);
            if (!std::isfinite(jl.report.joint)) {
                throw DivergedLoss("non-finite joint loss at step " + std::to_string(step));
            }
            ad::backward(jl.total);
            ad::accumulate_param_grads(jl.total);
            for (size_t i = 0; i < params.size(); ++i) {
                vel[i] *= opt.momentum;
                vel[i] += params[i]->grad;
                params[i]->value -= vel[i] * lr;
            }
            zero_grads(params);
            res.log.push_back(
                {step, jl.report.l_t, jl.report.l_p, jl.report.l_s, jl.report.joint,
                 jl.report.active});
            ++step;
        }
        res.epochs_run = epoch + 1;
        res.val_acc = accuracy(stage, true);
        if (res.val_acc >= opt.stop_acc) break;
    }
    return res;
}

double Trainer::accuracy(Stage stage, bool val) {
    if (!m_.needs(stage)) {
        throw InvalidConfig("variant " + variant_name(m_.cfg.variant) + " has no stage " +
                            stage_name(stage));
    }
    const auto& split = val ? data_.val : data_.train;
    size_t hits = 0;
    for (size_t b0 = 0; b0 < split.size(); b0 += kEvalChunk) {
        const size_t b1 = std::min(split.size(), b0 + kEvalChunk);
        std::vector<size_t> idx(b1 - b0);
        std::iota(idx.begin(), idx.end(), b0);
        Flow f = stage_forward(stage, idx, val, false);
        for (size_t i = 0; i < idx.size(); ++i) {
            hits += argmax_row(f.logits->value, i) == split[idx[i]].label;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(split.size());
}

Tensor Trainer::embeddings(bool val) {
    ensure_backbone_cache();
    const int si = val ? 1 : 0;
    if (m_.cfg.variant == Variant::A) return *fg_[si];
    ensure_rel_cache();
    const auto& split = val ? data_.val : data_.train;
    const size_t e = m_.fusion->out_dim();
    Tensor emb({split.size(), e});
    for (size_t b0 = 0; b0 < split.size(); b0 += kEvalChunk) {
        const size_t b1 = std::min(split.size(), b0 + kEvalChunk);
        std::vector<size_t> idx(b1 - b0);
        std::iota(idx.begin(), idx.end(), b0);
        Flow f = stage_forward(Stage::Fusion, idx, val, false);
        std::memcpy(emb.data() + b0 * e, f.emb->value.data(),
                    f.emb->value.size() * sizeof(double));
    }
    return emb;
}

std::vector<size_t> Trainer::labels(bool val) const {
    const auto& split = val ? data_.val : data_.train;
    std::vector<size_t> out(split.size());
    for (size_t i = 0; i < split.size(); ++i) out[i] = split[i].label;
    return out;
}

const Tensor& Trainer::fg(bool val) {
    ensure_backbone_cache();
    return *fg_[val ? 1 : 0];
}

const Tensor& Trainer::locals(bool val) {
    ensure_backbone_cache();
    return *locals_[val ? 1 : 0];
}

const Tensor& Trainer::sid(bool val) {
    ensure_sid_cache();
    return *sid_[val ? 1 : 0];
}

const Tensor& Trainer::rel(bool val) {
    ensure_rel_cache();
    return *rel_[val ? 1 : 0];
}

namespace {

StateDict backbone_state(FaceModel& m) {
    StateDict sd;
    for (Parameter* p : m.backbone.params()) sd.push_back({p->name, &p->value});
    for (auto& entry : m.backbone.aux_state()) sd.push_back(entry);
    return sd;
}

}  // namespace

TrendResult trend_check(const TrendOptions& opt) {
    if (opt.seeds.empty()) throw InvalidConfig("trend check needs at least one seed");
    TrendResult res;
    for (uint64_t seed : opt.seeds) {
        DataGenConfig dc = opt.data;
        dc.seed = seed;
        Dataset data = gen_dataset(dc);

        ModelConfig mc = opt.model;
        mc.backbone.num_classes = data.num_ids;
        mc.init_seed = seed;
        mc.variant = Variant::C;
        FaceModel model_c(mc);
        Trainer tc(model_c, data);
        TrendSeedRow row;
        row.seed = seed;
        tc.train_stage(Stage::Backbone, opt.stage[0]);
        row.acc_a = tc.accuracy(Stage::Backbone, true);
        tc.train_stage(Stage::Encoder, opt.stage[1]);
        tc.train_stage(Stage::Prn, opt.stage[2]);
        row.acc_prnplus = tc.accuracy(Stage::Prn, true);
        tc.train_stage(Stage::Fusion, opt.stage[3]);
        row.acc_c = tc.accuracy(Stage::Fusion, true);

        // Model B reuses the seed's trained backbone so the relation heads
        // differ only in identity-state conditioning.
        ModelConfig mb = mc;
        mb.variant = Variant::B;
        FaceModel model_b(mb);
        copy_state(backbone_state(model_c), backbone_state(model_b));
        model_b.done[static_cast<size_t>(Stage::Backbone)] = true;
        Trainer tb(model_b, data);
        tb.train_stage(Stage::Prn, opt.stage[2]);
        row.acc_prn = tb.accuracy(Stage::Prn, true);
        tb.train_stage(Stage::Fusion, opt.stage[3]);
        row.acc_b = tb.accuracy(Stage::Fusion, true);

        res.rows.push_back(row);
    }

    size_t plus_wins = 0, c_wins = 0;
    std::vector<double> accs_a, accs_c;
    for (const TrendSeedRow& r : res.rows) {
        plus_wins += r.acc_prnplus >= r.acc_prn ? 1 : 0;
        c_wins += r.acc_c >= r.acc_b ? 1 : 0;
        accs_a.push_back(r.acc_a);
        accs_c.push_back(r.acc_c);
    }
    const size_t n = res.rows.size();
    res.prnplus_wins = 2 * plus_wins >= n + 1;
    res.c_beats_b = 2 * c_wins >= n + 1;
    res.c_close_to_a = median(accs_c) >= median(accs_a) - 0.01;
    res.pass = res.prnplus_wins && res.c_beats_b && res.c_close_to_a;
    return res;
}

}  // namespace prnet
