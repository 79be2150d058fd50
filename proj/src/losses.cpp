#include "prnet/losses.hpp"

#include <algorithm>
#include <cmath>

#include "prnet/error.hpp"

namespace prnet {

namespace {

double l2_norm(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double l2_norm_rows(const Tensor& emb, size_t r0, size_t r1) {
    size_t e = emb.dim(1);
    double s = 0.0;
    for (size_t k = 0; k < e; ++k) {
        double d = emb.at(r0, k) - emb.at(r1, k);
        s += d * d;
    }
    return std::sqrt(s);
}

void check_triplet(const Triplet& t) {
    if (!t.anchor.same_shape(t.positive) || !t.anchor.same_shape(t.negative)) {
        throw ShapeMismatch("triplet embeddings disagree in shape");
    }
}

void check_indices(const Tensor& emb, const std::vector<TripletIdx>& triplets) {
    if (emb.rank() != 2) throw ShapeMismatch("embedding matrix must be [B,E]");
    for (const TripletIdx& t : triplets) {
        if (t.anchor >= emb.dim(0) || t.positive >= emb.dim(0) || t.negative >= emb.dim(0)) {
            throw ValidationError("triplet index out of range");
        }
    }
}

}  // namespace

double triplet_ratio_loss(const std::vector<Triplet>& triplets, double margin,
                          TripletGrads* grads, bool mean) {
    if (triplets.empty()) throw EmptyTripletSet("triplet ratio loss over empty set");
    if (margin <= 0.0) throw ValidationError("margin must be positive");
    const double w = mean ? 1.0 / static_cast<double>(triplets.size()) : 1.0;
    if (grads) {
        grads->danchor.clear();
        grads->dpositive.clear();
        grads->dnegative.clear();
    }
    double loss = 0.0;
    for (const Triplet& t : triplets) {
        check_triplet(t);
        Tensor da(t.anchor.shape()), dp(t.anchor.shape()), dn(t.anchor.shape());
        double pos = l2_norm(t.anchor, t.positive);
        double neg = l2_norm(t.anchor, t.negative);
        double denom = pos + margin;
        double term = 1.0 - neg / denom;
        if (term > 0.0) {
            loss += w * term;
            // d(term)/d(neg) = -1/denom; d(term)/d(pos) = neg/denom^2.
            double g_neg = -w / denom;
            double g_pos = w * neg / (denom * denom);
            for (size_t k = 0; k < t.anchor.size(); ++k) {
                if (neg > 0.0) {
                    double u = (t.anchor[k] - t.negative[k]) / neg;
                    da[k] += g_neg * u;
                    dn[k] -= g_neg * u;
                }
                if (pos > 0.0) {
                    double u = (t.anchor[k] - t.positive[k]) / pos;
                    da[k] += g_pos * u;
                    dp[k] -= g_pos * u;
                }
            }
        }
        if (grads) {
            grads->danchor.push_back(std::move(da));
            grads->dpositive.push_back(std::move(dp));
            grads->dnegative.push_back(std::move(dn));
        }
    }
    return loss;
}

double pairwise_loss(const std::vector<Triplet>& triplets, TripletGrads* grads, bool mean) {
    if (triplets.empty()) throw EmptyTripletSet("pairwise loss over empty set");
    const double w = mean ? 1.0 / static_cast<double>(triplets.size()) : 1.0;
    if (grads) {
        grads->danchor.clear();
        grads->dpositive.clear();
        grads->dnegative.clear();
    }
    double loss = 0.0;
    for (const Triplet& t : triplets) {
        check_triplet(t);
        Tensor da(t.anchor.shape()), dp(t.anchor.shape());
        double s = 0.0;
        for (size_t k = 0; k < t.anchor.size(); ++k) {
            double d = t.anchor[k] - t.positive[k];
            s += d * d;
            da[k] = w * 2.0 * d;
            dp[k] = -w * 2.0 * d;
        }
        loss += w * s;
        if (grads) {
            grads->danchor.push_back(std::move(da));
            grads->dpositive.push_back(std::move(dp));
            grads->dnegative.push_back(Tensor(t.anchor.shape()));
        }
    }
    return loss;
}

ad::Var triplet_ratio_loss(const ad::Var& emb, const std::vector<TripletIdx>& triplets,
                           double margin, bool mean) {
    if (triplets.empty()) throw EmptyTripletSet("triplet ratio loss over empty set");
    if (margin <= 0.0) throw ValidationError("margin must be positive");
    check_indices(emb->value, triplets);
    const Tensor& e = emb->value;
    const double w = mean ? 1.0 / static_cast<double>(triplets.size()) : 1.0;
    double loss = 0.0;
    for (const TripletIdx& t : triplets) {
        double pos = l2_norm_rows(e, t.anchor, t.positive);
        double neg = l2_norm_rows(e, t.anchor, t.negative);
        double term = 1.0 - neg / (pos + margin);
        if (term > 0.0) loss += w * term;
    }
    auto list = triplets;
    return ad::make_node(Tensor::scalar(loss), {emb}, [emb, list, margin, w](ad::Node& self) {
        const Tensor& e = emb->value;
        const size_t cols = e.dim(1);
        Tensor d(e.shape());
        for (const TripletIdx& t : list) {
            double pos = l2_norm_rows(e, t.anchor, t.positive);
            double neg = l2_norm_rows(e, t.anchor, t.negative);
            double denom = pos + margin;
            if (1.0 - neg / denom <= 0.0) continue;
            double g_neg = -w / denom;
            double g_pos = w * neg / (denom * denom);
            for (size_t k = 0; k < cols; ++k) {
                if (neg > 0.0) {
                    double u = (e.at(t.anchor, k) - e.at(t.negative, k)) / neg;
                    d.at(t.anchor, k) += g_neg * u;
                    d.at(t.negative, k) -= g_neg * u;
                }
                if (pos > 0.0) {
                    double u = (e.at(t.anchor, k) - e.at(t.positive, k)) / pos;
                    d.at(t.anchor, k) += g_pos * u;
                    d.at(t.positive, k) -= g_pos * u;
                }
            }
        }
        double upstream = self.grad[0];
        for (size_t i = 0; i < d.size(); ++i) d[i] *= upstream;
        ad::add_grad(emb, d);
    });
}

ad::Var pairwise_loss(const ad::Var& emb, const std::vector<TripletIdx>& triplets, bool mean) {
    if (triplets.empty()) throw EmptyTripletSet("pairwise loss over empty set");
    check_indices(emb->value, triplets);
    const Tensor& e = emb->value;
    const double w = mean ? 1.0 / static_cast<double>(triplets.size()) : 1.0;
    double loss = 0.0;
    for (const TripletIdx& t : triplets) {
        double s = 0.0;
        for (size_t k = 0; k < e.dim(1); ++k) {
            double d = e.at(t.anchor, k) - e.at(t.positive, k);
            s += d * d;
        }
        loss += w * s;
    }
    auto list = triplets;
    return ad::make_node(Tensor::scalar(loss), {emb}, [emb, list, w](ad::Node& self) {
        const Tensor& e = emb->value;
        Tensor d(e.shape());
        for (const TripletIdx& t : list) {
            for (size_t k = 0; k < e.dim(1); ++k) {
                double diff = e.at(t.anchor, k) - e.at(t.positive, k);
                d.at(t.anchor, k) += w * 2.0 * diff;
                d.at(t.positive, k) -= w * 2.0 * diff;
            }
        }
        double upstream = self.grad[0];
        for (size_t i = 0; i < d.size(); ++i) d[i] *= upstream;
        ad::add_grad(emb, d);
    });
}

size_t count_active(const Tensor& emb, const std::vector<TripletIdx>& triplets, double margin) {
    check_indices(emb, triplets);
    size_t n = 0;
    for (const TripletIdx& t : triplets) {
        double pos = l2_norm_rows(emb, t.anchor, t.positive);
        double neg = l2_norm_rows(emb, t.anchor, t.negative);
        if (1.0 - neg / (pos + margin) > 0.0) ++n;
    }
    return n;
}

Mining parse_mining(const std::string& s) {
    if (s == "all-valid") return Mining::AllValid;
    if (s == "random-k") return Mining::RandomK;
    if (s == "semi-hard") return Mining::SemiHard;
    throw InvalidConfig("unknown mining strategy: " + s);
}

std::vector<TripletIdx> mine_triplets(const Tensor& emb, const std::vector<size_t>& labels,
                                      Mining strategy, Rng& rng, size_t k) {
    if (emb.rank() != 2 || emb.dim(0) != labels.size()) {
        throw ShapeMismatch("embeddings [B,E] must match label count");
    }
    const size_t n = labels.size();
    std::vector<TripletIdx> out;
    auto positives_of = [&](size_t a) {
        std::vector<size_t> v;
        for (size_t i = 0; i < n; ++i)
            if (i != a && labels[i] == labels[a]) v.push_back(i);
        return v;
    };
    auto negatives_of = [&](size_t a) {
        std::vector<size_t> v;
        for (size_t i = 0; i < n; ++i)
            if (labels[i] != labels[a]) v.push_back(i);
        return v;
    };

    for (size_t a = 0; a < n; ++a) {
        std::vector<size_t> pos = positives_of(a);
        std::vector<size_t> neg = negatives_of(a);
        if (pos.empty() || neg.empty()) continue;
        switch (strategy) {
            case Mining::AllValid:
                for (size_t p : pos)
                    for (size_t q : neg) out.push_back({a, p, q});
                break;
            case Mining::RandomK:
                for (size_t s = 0; s < k; ++s) {
                    out.push_back({a, pos[rng.index(pos.size())], neg[rng.index(neg.size())]});
                }
                break;
            case Mining::SemiHard:
                for (size_t p : pos) {
                    double dp = l2_norm_rows(emb, a, p);
                    size_t best = neg[0];
                    double best_d = 0.0;
                    bool found = false;
                    for (size_t q : neg) {
                        double dn = l2_norm_rows(emb, a, q);
                        if (dn >= dp && (!found || dn < best_d)) {
                            best = q;
                            best_d = dn;
                            found = true;
                        }
                    }
                    if (!found) {
                        // no negative beyond the positive radius: take the farthest
                        best = neg[0];
                        best_d = l2_norm_rows(emb, a, neg[0]);
                        for (size_t q : neg) {
                            double dn = l2_norm_rows(emb, a, q);
                            if (dn > best_d) {
                                best = q;
                                best_d = dn;
                            }
                        }
                    }
                    out.push_back({a, p, best});
                }
                break;
        }
    }
    if (out.empty()) throw NoValidTriplet("no valid (anchor, positive, negative) exists");
    return out;
}

JointLoss joint_loss(const ad::Var& emb, const ad::Var& logits, const std::vector<size_t>& labels,
                     const std::vector<TripletIdx>& triplets, double margin,
                     const LossWeights& weights, bool mean) {
    const bool need_triplets = weights.w_triplet > 0.0 || weights.w_pairwise > 0.0;
    if (need_triplets && triplets.empty()) {
        throw EmptyTripletSet("joint loss with triplet weights needs triplets");
    }

    std::vector<std::pair<double, ad::Var>> terms;
    LossReport report;
    report.triplets = triplets.size();
    if (!triplets.empty()) {
        ad::Var lt = triplet_ratio_loss(emb, triplets, margin, mean);
        ad::Var lp = pairwise_loss(emb, triplets, mean);
        report.l_t = lt->value[0];
        report.l_p = lp->value[0];
        report.active = count_active(emb->value, triplets, margin);
        terms.push_back({weights.w_triplet, lt});
        terms.push_back({weights.w_pairwise, lp});
    }
    ad::Var ls = ad::softmax_ce(logits, labels);
    report.l_s = ls->value[0];
    terms.push_back({weights.w_softmax, ls});

    JointLoss out;
    out.total = ad::combine(terms);
    report.joint = out.total->value[0];
    out.report = report;
    return out;
}

}  // namespace prnet
