#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "prnet/losses.hpp"
#include "prnet/rng.hpp"

using namespace prnet;

namespace {

Triplet collinear(double ax, double px, double nx) {
    return {Tensor::row({ax, 0.0}), Tensor::row({px, 0.0}), Tensor::row({nx, 0.0})};
}

Tensor randn(std::vector<size_t> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
    return t;
}

}  // namespace

TEST_CASE("triplet ratio hand values") {
    const double m = 1.0;

    // negative on top of the anchor: |a-n| = 0, hinge is full
    CHECK(triplet_ratio_loss({collinear(0, 1, 0)}, m) == doctest::Approx(1.0).epsilon(1e-12));

    // |a-n| = |a-p| + m exactly: hinge at zero
    CHECK(triplet_ratio_loss({collinear(0, 1, 2)}, m) == doctest::Approx(0.0).epsilon(1e-12));

    // |a-p| = 2, |a-n| = 1: 1 - 1/3 = 2/3
    CHECK(triplet_ratio_loss({collinear(0, 2, 1)}, m) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    // far negative: clamped at zero, not negative
    CHECK(triplet_ratio_loss({collinear(0, 1, 50)}, m) == 0.0);

    // per-term range is [0, 1]
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        Triplet t{randn({4}, rng), randn({4}, rng), randn({4}, rng)};
        double l = triplet_ratio_loss({t}, 0.3);
        CHECK(l >= 0.0);
        CHECK(l <= 1.0 + 1e-15);
    }

    // sum over triplets, mean divides by the count
    std::vector<Triplet> three = {collinear(0, 1, 0), collinear(0, 2, 1), collinear(0, 1, 2)};
    double sum = triplet_ratio_loss(three, m);
    CHECK(sum == doctest::Approx(1.0 + 2.0 / 3.0).epsilon(1e-12));
    CHECK(triplet_ratio_loss(three, m, nullptr, true) ==
          doctest::Approx(sum / 3.0).epsilon(1e-12));

    CHECK_THROWS_AS(triplet_ratio_loss({}, m), EmptyTripletSet);
}

TEST_CASE("ratio loss reacts to scale unlike a difference hinge") {
    // doubling all embeddings changes the ratio term because the margin
    // stays fixed; a plain difference hinge would be translation-covariant
    std::vector<Triplet> t = {collinear(0, 2, 1)};
    std::vector<Triplet> t2 = {collinear(0, 4, 2)};
    double l1 = triplet_ratio_loss(t, 1.0);
    double l2 = triplet_ratio_loss(t2, 1.0);
    CHECK(l1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(l2 == doctest::Approx(3.0 / 5.0).epsilon(1e-12));
    CHECK(l1 != l2);
}

TEST_CASE("pairwise hand values and homogeneity") {
    // anchor == positive
    CHECK(pairwise_loss({collinear(1, 1, 0)}) == 0.0);

    // |a-p|^2 = 25
    CHECK(pairwise_loss({collinear(0, 5, 0)}) == doctest::Approx(25.0).epsilon(1e-12));

    // degree-2 homogeneity: scaling embeddings by c scales the loss by c^2
    Rng rng(7);
    for (int i = 0; i < 50; ++i) {
        Tensor a = randn({5}, rng), p = randn({5}, rng), n = randn({5}, rng);
        Tensor a2 = a, p2 = p, n2 = n;
        for (size_t k = 0; k < 5; ++k) {
            a2[k] *= 2.0;
            p2[k] *= 2.0;
            n2[k] *= 2.0;
        }
        double base = pairwise_loss({{a, p, n}});
        double scaled = pairwise_loss({{a2, p2, n2}});
        CHECK(scaled == doctest::Approx(4.0 * base).epsilon(1e-9));

        double c = rng.uniform(0.1, 3.0);
        Tensor ac = a, pc = p, nc = n;
        for (size_t k = 0; k < 5; ++k) {
            ac[k] *= c;
            pc[k] *= c;
            nc[k] *= c;
        }
        CHECK(pairwise_loss({{ac, pc, nc}}) == doctest::Approx(c * c * base).epsilon(1e-9));
    }

    // mean over triplets
    std::vector<Triplet> two = {collinear(0, 5, 0), collinear(0, 1, 0)};
    CHECK(pairwise_loss(two) == doctest::Approx(26.0).epsilon(1e-12));
    CHECK(pairwise_loss(two, nullptr, true) == doctest::Approx(13.0).epsilon(1e-12));
}

TEST_CASE("graph losses agree with the direct forms") {
    Rng rng(11);
    Tensor emb = randn({6, 4}, rng);
    std::vector<TripletIdx> idx = {{0, 1, 2}, {3, 4, 5}, {1, 0, 4}};
    std::vector<Triplet> direct;
    for (auto t : idx)
        direct.push_back({emb.row_slice(t.anchor), emb.row_slice(t.positive),
                          emb.row_slice(t.negative)});

    ad::Var e = ad::leaf(emb);
    CHECK(triplet_ratio_loss(e, idx, 0.2)->value[0] ==
          doctest::Approx(triplet_ratio_loss(direct, 0.2)).epsilon(1e-12));
    CHECK(pairwise_loss(e, idx)->value[0] ==
          doctest::Approx(pairwise_loss(direct)).epsilon(1e-12));
    CHECK(pairwise_loss(e, idx, true)->value[0] ==
          doctest::Approx(pairwise_loss(direct, nullptr, true)).epsilon(1e-12));
}

TEST_CASE("joint loss composition") {
    Rng rng(13);
    Tensor emb = randn({4, 3}, rng);
    Tensor logits = randn({4, 5}, rng);
    std::vector<size_t> labels = {0, 0, 1, 2};
    std::vector<TripletIdx> idx = {{0, 1, 2}, {1, 0, 3}};

    // weights (0, 0, 1): softmax alone
    JointLoss s_only = joint_loss(ad::leaf(emb), ad::leaf(logits), labels, idx, 0.1, {0, 0, 1});
    auto ce = softmax_cross_entropy(logits, labels);
    CHECK(s_only.total->value[0] == doctest::Approx(ce.loss).epsilon(1e-12));
    CHECK(s_only.report.l_s == doctest::Approx(ce.loss).epsilon(1e-12));

    // weights (1, 1, 1): the piecewise sum
    JointLoss all = joint_loss(ad::leaf(emb), ad::leaf(logits), labels, idx, 0.1, {1, 1, 1});
    std::vector<Triplet> direct;
    for (auto t : idx)
        direct.push_back({emb.row_slice(t.anchor), emb.row_slice(t.positive),
                          emb.row_slice(t.negative)});
    double expect = triplet_ratio_loss(direct, 0.1) + pairwise_loss(direct) + ce.loss;
    CHECK(all.total->value[0] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(all.report.joint == doctest::Approx(expect).epsilon(1e-12));
    CHECK(all.report.triplets == 2);

    // weights scale the gradient linearly: grad(w * L) = w * grad(L)
    auto grad_of = [&](double w_t) {
        ad::Var e = ad::leaf(emb);
        e->ensure_grad();
        JointLoss j = joint_loss(e, ad::leaf(logits), labels, idx, 0.1, {w_t, 0, 0});
        ad::backward(j.total);
        return e->grad;
    };
    Tensor g1 = grad_of(1.0);
    Tensor g3 = grad_of(3.0);
    for (size_t i = 0; i < g1.size(); ++i)
        CHECK(g3[i] == doctest::Approx(3.0 * g1[i]).epsilon(1e-12));
}

TEST_CASE("count_active matches the hinge") {
    Tensor emb = Tensor::matrix(3, 2, {0, 0, 1, 0, 2, 0});
    // (0,1,2): |a-n| = 2, |a-p| + m = 2 -> inactive at the boundary
    CHECK(count_active(emb, {{0, 1, 2}}, 1.0) == 0);
    // (0,1,1): negative is the positive row, |a-n| = 1 < 2 -> active
    CHECK(count_active(emb, {{0, 1, 1}}, 1.0) == 1);
    CHECK(count_active(emb, {{0, 1, 2}, {0, 1, 1}}, 1.0) == 1);
}

TEST_CASE("mining strategies") {
    CHECK(parse_mining("all-valid") == Mining::AllValid);
    CHECK(parse_mining("random-k") == Mining::RandomK);
    CHECK(parse_mining("semi-hard") == Mining::SemiHard);
    CHECK_THROWS_AS(parse_mining("hardest"), ValidationError);

    Rng rng(17);
    Tensor emb = randn({8, 4}, rng);
    std::vector<size_t> labels = {0, 0, 1, 1, 2, 2, 0, 1};

    // every strategy returns valid triplets
    for (Mining m : {Mining::AllValid, Mining::RandomK, Mining::SemiHard}) {
        Rng r(99);
        auto trip = mine_triplets(emb, labels, m, r, 3);
        CHECK(!trip.empty());
        for (auto t : trip) {
            CHECK(labels[t.anchor] == labels[t.positive]);
            CHECK(t.anchor != t.positive);
            CHECK(labels[t.anchor] != labels[t.negative]);
        }
    }

    // all-valid enumerates the full count: per anchor, (same-label - 1) * diff-label
    Rng r0(1);
    auto all = mine_triplets(emb, labels, Mining::AllValid, r0);
    size_t expect = 0;
    for (size_t a = 0; a < labels.size(); ++a) {
        size_t same = 0, diff = 0;
        for (size_t i = 0; i < labels.size(); ++i) {
            if (i == a) continue;
            (labels[i] == labels[a] ? same : diff)++;
        }
        expect += same * diff;
    }
    CHECK(all.size() == expect);

    // deterministic for a fixed rng seed
    Rng ra(42), rb(42);
    auto ta = mine_triplets(emb, labels, Mining::RandomK, ra, 4);
    auto tb = mine_triplets(emb, labels, Mining::RandomK, rb, 4);
    REQUIRE(ta.size() == tb.size());
    for (size_t i = 0; i < ta.size(); ++i) {
        CHECK(ta[i].anchor == tb[i].anchor);
        CHECK(ta[i].positive == tb[i].positive);
        CHECK(ta[i].negative == tb[i].negative);
    }

    // single-identity batches cannot produce a negative
    std::vector<size_t> mono(4, 0);
    Rng rm(5);
    CHECK_THROWS_AS(mine_triplets(randn({4, 3}, rm), mono, Mining::AllValid, rm), NoValidTriplet);
}
