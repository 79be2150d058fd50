#pragma once

#include <cstddef>
#include <vector>

#include "prnet/graph.hpp"
#include "prnet/rng.hpp"
#include "prnet/tensor.hpp"

namespace prnet {

struct Triplet {
    Tensor anchor, positive, negative;  // equal-length embedding vectors
};

// Row indices into an embedding matrix.
struct TripletIdx {
    size_t anchor = 0, positive = 0, negative = 0;
};

struct TripletGrads {
    std::vector<Tensor> danchor, dpositive, dnegative;
};

// Hinge on 1 - |a-n| / (|a-p| + m) with unsquared norms, summed over triplets
// (averaged when mean is set). Subgradient 0 at the hinge and at zero-norm
// kinks. Optional analytic gradients per triplet.
double triplet_ratio_loss(const std::vector<Triplet>& triplets, double margin,
                          TripletGrads* grads = nullptr, bool mean = false);

// Sum of squared anchor-positive distances.
double pairwise_loss(const std::vector<Triplet>& triplets, TripletGrads* grads = nullptr,
                     bool mean = false);

// Graph forms over an embedding matrix [B, E].
ad::Var triplet_ratio_loss(const ad::Var& emb, const std::vector<TripletIdx>& triplets,
                           double margin, bool mean = false);
ad::Var pairwise_loss(const ad::Var& emb, const std::vector<TripletIdx>& triplets,
                      bool mean = false);

// Number of triplets with a strictly positive hinge term.
size_t count_active(const Tensor& emb, const std::vector<TripletIdx>& triplets, double margin);

enum class Mining { AllValid, RandomK, SemiHard };

Mining parse_mining(const std::string& s);

// Deterministic given the rng state. AllValid enumerates every (a,p,n) with
// label(a) = label(p), a != p, label(n) != label(a), ascending index order.
// RandomK draws k (p, n) choices per anchor. SemiHard picks, per (a,p), the
// closest negative at least as far as the positive, else the farthest one.
std::vector<TripletIdx> mine_triplets(const Tensor& emb, const std::vector<size_t>& labels,
                                      Mining strategy, Rng& rng, size_t k = 4);

struct LossWeights {
    double w_triplet = 1.0;
    double w_pairwise = 1.0;
    double w_softmax = 1.0;
};

struct LossReport {
    double l_t = 0.0, l_p = 0.0, l_s = 0.0;
    double joint = 0.0;
    size_t triplets = 0;
    size_t active = 0;
};

struct JointLoss {
    ad::Var total;  // scalar node
    LossReport report;
};

// joint = w_t * l_t + w_p * l_p + w_s * l_s; softmax term is the batch-mean
// cross entropy of logits vs labels, triplet terms follow the mean switch.
JointLoss joint_loss(const ad::Var& emb, const ad::Var& logits, const std::vector<size_t>& labels,
                     const std::vector<TripletIdx>& triplets, double margin,
                     const LossWeights& weights, bool mean = false);

}  // namespace prnet
