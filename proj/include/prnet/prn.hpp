#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "prnet/layers.hpp"

namespace prnet {

// All (i, j) with i < j in lexicographic order; n landmarks give n(n-1)/2 pairs.
std::vector<std::pair<size_t, size_t>> enumerate_pairs(size_t n);

// Evenly spaced subset of `count` indices out of `total` landmarks, ascending.
std::vector<size_t> landmark_subset(size_t total, size_t count);

struct RelationConfig {
    std::vector<size_t> g_layers = {32, 32};  // relation MLP widths
    std::vector<size_t> f_layers = {32, 32};  // prediction MLP widths
    size_t lstm_hidden = 32;
    size_t sid_width = 16;    // identity state length
    size_t embed_dim = 48;    // fused embedding length
    size_t landmark_count = 17;
    double margin = 0.1;
    double w_triplet = 1.0;
    double w_pairwise = 1.0;
    double w_softmax = 1.0;

    // Full-scale reference values; documented, not desk-tested.
    static RelationConfig paper_full();
    void validate() const;
    size_t relational_dim() const { return f_layers.back(); }
};

struct Relation {
    size_t i = 0, j = 0;
    Tensor value;
};

// Sum of relation vectors in ascending (i, j) key order regardless of
// presentation order; bit-deterministic.
Tensor aggregate(std::vector<Relation> relations);

// Relation MLP over all landmark pairs followed by sum aggregation and the
// prediction MLP. Optionally conditions every pair on an identity state
// vector appended after the two local features.
class PrnModel {
public:
    PrnModel(const std::string& name, size_t local_channels, const RelationConfig& cfg,
             bool conditioned, Rng& rng);

    // locals: [B*N, C], faces stacked in landmark order; sid: [B, S] when
    // conditioned, ignored otherwise. Returns the relational feature [B, R'].
    ad::Var forward(const ad::Var& locals, size_t batch, const ad::Var* sid, bool training,
                    bool update_running = true);

    bool conditioned() const { return conditioned_; }
    size_t landmark_count() const { return n_; }
    size_t pair_count() const { return pairs_.size(); }
    size_t out_dim() const { return f_.out_dim(); }
    std::vector<Parameter*> params();
    std::vector<std::pair<std::string, Tensor*>> aux_state();

private:
    size_t n_;
    size_t channels_;
    size_t sid_width_;
    bool conditioned_;
    std::vector<std::pair<size_t, size_t>> pairs_;
    MlpLayer g_, f_;
};

// LSTM over the landmark-ordered feature sequence; the final hidden state
// feeds a bottleneck FC whose activation is the identity state, then a class
// head that trains the encoder with softmax.
class IdentityEncoder {
public:
    IdentityEncoder(const std::string& name, size_t local_channels, const RelationConfig& cfg,
                    size_t num_classes, Rng& rng);

    struct Out {
        ad::Var sid;     // [B, S]
        ad::Var logits;  // [B, num_classes]
    };
    Out forward(const ad::Var& locals, size_t batch);

    size_t sid_width() const { return fc_state_.out_dim(); }
    std::vector<Parameter*> params();

private:
    size_t n_;
    LstmLayer lstm_;
    AffineLayer fc_state_, fc_class_;
};

enum class Variant { A, B, C };

Variant parse_variant(const std::string& s);
std::string variant_name(Variant v);

// Joint embedding head: concat(f_g, relational) -> affine+BN+ReLU. Variant A
// bypasses it (embedding = f_g).
class FusionModel {
public:
    FusionModel(const std::string& name, size_t fg_dim, size_t rel_dim, size_t embed_dim,
                Rng& rng);

    ad::Var forward(const ad::Var& f_g, const ad::Var& relational, bool training,
                    bool update_running = true);

    size_t out_dim() const { return fc_.out_dim(); }
    std::vector<Parameter*> params();
    std::vector<std::pair<std::string, Tensor*>> aux_state();

private:
    AffineLayer fc_;
    BatchNormLayer bn_;
};

}  // namespace prnet
