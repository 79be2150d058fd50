#include "prnet/prn.hpp"

#include <algorithm>

#include "prnet/error.hpp"

namespace prnet {

std::vector<std::pair<size_t, size_t>> enumerate_pairs(size_t n) {
    if (n < 2) throw TooFewLandmarks("pair enumeration needs at least 2 landmarks, got " +
                                     std::to_string(n));
    std::vector<std::pair<size_t, size_t>> pairs;
    pairs.reserve(n * (n - 1) / 2);
    for (size_t i = 0; i + 1 < n; ++i)
        for (size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    return pairs;
}

std::vector<size_t> landmark_subset(size_t total, size_t count) {
    if (count == 0 || count > total) {
        throw InvalidConfig("landmark subset size " + std::to_string(count) + " out of [1, " +
                            std::to_string(total) + "]");
    }
    std::vector<size_t> idx(count);
    for (size_t i = 0; i < count; ++i) idx[i] = i * total / count;
    return idx;
}

RelationConfig RelationConfig::paper_full() {
    RelationConfig cfg;
    cfg.g_layers = {1000, 1000, 1000};
    cfg.f_layers = {1000, 1000, 1000};
    cfg.lstm_hidden = 2048;
    cfg.sid_width = 256;
    cfg.embed_dim = 1024;
    cfg.landmark_count = 68;
    return cfg;
}

void RelationConfig::validate() const {
    if (g_layers.empty() || f_layers.empty()) throw InvalidConfig("relation MLPs need layers");
    for (size_t w : g_layers)
        if (w == 0) throw InvalidConfig("g_layers widths must be positive");
    for (size_t w : f_layers)
        if (w == 0) throw InvalidConfig("f_layers widths must be positive");
    if (lstm_hidden == 0 || sid_width == 0 || embed_dim == 0) {
        throw InvalidConfig("relation widths must be positive");
    }
    if (landmark_count < 2) throw InvalidConfig("landmark_count must be at least 2");
    if (margin <= 0.0) throw InvalidConfig("margin must be positive");
    if (w_triplet < 0.0 || w_pairwise < 0.0 || w_softmax < 0.0) {
        throw InvalidConfig("loss weights must be non-negative");
    }
    if (w_triplet + w_pairwise + w_softmax == 0.0) {
        throw InvalidConfig("at least one loss weight must be positive");
    }
}

Tensor aggregate(std::vector<Relation> relations) {
    if (relations.empty()) throw EmptyRelationList("aggregate over empty relation list");
    std::sort(relations.begin(), relations.end(), [](const Relation& a, const Relation& b) {
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    Tensor out(relations.front().value.shape());
    for (const Relation& r : relations) {
        if (!r.value.same_shape(out))
            throw ShapeMismatch("relation vectors disagree: " + r.value.shape_str() + " vs " +
                                out.shape_str());
        for (size_t k = 0; k < out.size(); ++k) out[k] += r.value[k];
    }
    return out;
}

PrnModel::PrnModel(const std::string& name, size_t local_channels, const RelationConfig& cfg,
                   bool conditioned, Rng& rng)
    : n_(cfg.landmark_count),
      channels_(local_channels),
      sid_width_(cfg.sid_width),
      conditioned_(conditioned),
      pairs_(enumerate_pairs(cfg.landmark_count)),
      g_(name + "/relation", 2 * local_channels + (conditioned ? cfg.sid_width : 0), cfg.g_layers,
         rng),
      f_(name + "/predict", cfg.g_layers.back(), cfg.f_layers, rng) {
    cfg.validate();
}

ad::Var PrnModel::forward(const ad::Var& locals, size_t batch, const ad::Var* sid, bool training,
                          bool update_running) {
    if (locals->value.rank() != 2 || locals->value.dim(0) != batch * n_ ||
        locals->value.dim(1) != channels_) {
        throw ShapeMismatch("local features must be [" + std::to_string(batch * n_) + "," +
                            std::to_string(channels_) + "], got " + locals->value.shape_str());
    }
    if (conditioned_) {
        if (sid == nullptr) throw MissingRelationalFeature("conditioned relation needs sid");
        if ((*sid)->value.rank() != 2 || (*sid)->value.dim(0) != batch ||
            (*sid)->value.dim(1) != sid_width_) {
            throw ShapeMismatch("sid must be [" + std::to_string(batch) + "," +
                                std::to_string(sid_width_) + "], got " +
                                (*sid)->value.shape_str());
        }
    }

    const size_t p = pairs_.size();
    std::vector<size_t> left(batch * p), right(batch * p), face(batch * p);
    for (size_t b = 0; b < batch; ++b) {
        for (size_t k = 0; k < p; ++k) {
            left[b * p + k] = b * n_ + pairs_[k].first;
            right[b * p + k] = b * n_ + pairs_[k].second;
            face[b * p + k] = b;
        }
    }
    ad::Var fi = ad::gather_rows(locals, std::move(left));
    ad::Var fj = ad::gather_rows(locals, std::move(right));
    std::vector<ad::Var> parts = {fi, fj};
    // Identity state appended after the pair keeps the unconditioned layout a
    // strict prefix, so zeroing its weight block reproduces the plain model.
    if (conditioned_) parts.push_back(ad::gather_rows(*sid, std::move(face)));
    ad::Var pair_in = ad::concat_cols(parts);

    ad::Var rel = g_.forward(pair_in, training, update_running);  // [B*P, R]
    ad::Var agg = ad::sum_row_groups(rel, p);                     // [B, R]
    return f_.forward(agg, training, update_running);             // [B, R']
}

std::vector<Parameter*> PrnModel::params() {
    std::vector<Parameter*> out;
    append_params(out, g_.params());
    append_params(out, f_.params());
    return out;
}

std::vector<std::pair<std::string, Tensor*>> PrnModel::aux_state() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (MlpLayer* mlp : {&g_, &f_})
        for (BatchNormLayer& bn : mlp->norms) {
            auto aux = bn.aux_state();
            out.insert(out.end(), aux.begin(), aux.end());
        }
    return out;
}

IdentityEncoder::IdentityEncoder(const std::string& name, size_t local_channels,
                                 const RelationConfig& cfg, size_t num_classes, Rng& rng)
    : n_(cfg.landmark_count),
      lstm_(name + "/lstm", local_channels, cfg.lstm_hidden, rng),
      fc_state_(name + "/state", cfg.lstm_hidden, cfg.sid_width, rng),
      fc_class_(name + "/class", cfg.sid_width, num_classes, rng) {
    if (num_classes == 0) throw InvalidConfig("encoder needs at least one class");
}

IdentityEncoder::Out IdentityEncoder::forward(const ad::Var& locals, size_t batch) {
    if (locals->value.rank() != 2 || locals->value.dim(0) != batch * n_) {
        throw ShapeMismatch("encoder locals must be [" + std::to_string(batch * n_) +
                            ",C], got " + locals->value.shape_str());
    }
    std::vector<ad::Var> steps;
    steps.reserve(n_);
    for (size_t t = 0; t < n_; ++t) {
        std::vector<size_t> rows(batch);
        for (size_t b = 0; b < batch; ++b) rows[b] = b * n_ + t;
        steps.push_back(ad::gather_rows(locals, std::move(rows)));
    }
    ad::Var h = lstm_.run(steps);
    ad::Var sid = ad::relu(fc_state_(h));
    ad::Var logits = fc_class_(sid);
    return {sid, logits};
}

std::vector<Parameter*> IdentityEncoder::params() {
    std::vector<Parameter*> out;
    append_params(out, lstm_.params());
    append_params(out, fc_state_.params());
    append_params(out, fc_class_.params());
    return out;
}

Variant parse_variant(const std::string& s) {
    if (s == "A" || s == "a") return Variant::A;
    if (s == "B" || s == "b") return Variant::B;
    if (s == "C" || s == "c") return Variant::C;
    throw InvalidConfig("unknown model variant: " + s);
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::A: return "A";
        case Variant::B: return "B";
        case Variant::C: return "C";
    }
    return "?";
}

FusionModel::FusionModel(const std::string& name, size_t fg_dim, size_t rel_dim, size_t embed_dim,
                         Rng& rng)
    : fc_(name + "/fc", fg_dim + rel_dim, embed_dim, rng), bn_(name + "/bn", embed_dim) {}

ad::Var FusionModel::forward(const ad::Var& f_g, const ad::Var& relational, bool training,
                             bool update_running) {
    ad::Var joint = ad::concat_cols({f_g, relational});
    return ad::relu(bn_.apply(fc_(joint), training, update_running));
}

std::vector<Parameter*> FusionModel::params() {
    std::vector<Parameter*> out;
    append_params(out, fc_.params());
    append_params(out, bn_.params());
    return out;
}

std::vector<std::pair<std::string, Tensor*>> FusionModel::aux_state() { return bn_.aux_state(); }

}  // namespace prnet
