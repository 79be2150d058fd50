#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>

#include "doctest.h"
#include "prnet/prn.hpp"
#include "prnet/rng.hpp"

using namespace prnet;

namespace {

Tensor randn(std::vector<size_t> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
    return t;
}

}  // namespace

TEST_CASE("pair enumeration") {
    auto p68 = enumerate_pairs(68);
    CHECK(p68.size() == 2278);
    CHECK(p68.front() == std::pair<size_t, size_t>{0, 1});
    CHECK(p68.back() == std::pair<size_t, size_t>{66, 67});
    CHECK(std::is_sorted(p68.begin(), p68.end()));

    auto p2 = enumerate_pairs(2);
    REQUIRE(p2.size() == 1);
    CHECK(p2[0] == std::pair<size_t, size_t>{0, 1});

    auto p5 = enumerate_pairs(5);
    CHECK(p5.size() == 10);
    CHECK(p5.front() == std::pair<size_t, size_t>{0, 1});
    CHECK(p5.back() == std::pair<size_t, size_t>{3, 4});

    for (size_t n = 2; n <= 100; ++n) {
        auto ps = enumerate_pairs(n);
        CHECK(ps.size() == n * (n - 1) / 2);
        CHECK(std::is_sorted(ps.begin(), ps.end()));
        CHECK(std::adjacent_find(ps.begin(), ps.end()) == ps.end());
        for (auto [i, j] : ps) CHECK(i < j);
    }

    CHECK_THROWS_AS(enumerate_pairs(1), ValidationError);
}

TEST_CASE("landmark subset is ascending and bracketed") {
    auto sub = landmark_subset(68, 17);
    CHECK(sub.size() == 17);
    CHECK(std::is_sorted(sub.begin(), sub.end()));
    CHECK(std::adjacent_find(sub.begin(), sub.end()) == sub.end());
    CHECK(sub.back() < 68);
    auto all = landmark_subset(68, 68);
    for (size_t i = 0; i < 68; ++i) CHECK(all[i] == i);
}

TEST_CASE("aggregation order independence") {
    Rng rng(5);
    auto pairs = enumerate_pairs(8);
    std::vector<Relation> base;
    for (auto [i, j] : pairs) base.push_back({i, j, randn({4}, rng)});

    Tensor ref = aggregate(base);
    for (int shuffle = 0; shuffle < 100; ++shuffle) {
        std::vector<Relation> mixed = base;
        rng.shuffle(mixed);
        CHECK(bit_equal(aggregate(mixed), ref));
    }

    // fresh relation sets, same property
    for (int set = 0; set < 10; ++set) {
        std::vector<Relation> rel;
        for (auto [i, j] : pairs) rel.push_back({i, j, randn({3}, rng)});
        Tensor r0 = aggregate(rel);
        for (int shuffle = 0; shuffle < 100; ++shuffle) {
            std::vector<Relation> mixed = rel;
            rng.shuffle(mixed);
            CHECK(bit_equal(aggregate(mixed), r0));
        }
    }
}

TEST_CASE("aggregation closed forms") {
    // single relation: the sum is the relation itself
    Tensor v = Tensor::row({1.5, -2.0});
    Tensor single = aggregate({{0, 1, v}});
    CHECK(bit_equal(single, v));

    // 2278 unit vectors sum to 2278 in every coordinate
    std::vector<Relation> units;
    for (auto [i, j] : enumerate_pairs(68)) units.push_back({i, j, Tensor::row({1.0, 1.0, 1.0})});
    Tensor s = aggregate(units);
    for (size_t k = 0; k < 3; ++k) CHECK(s[k] == 2278.0);

    CHECK_THROWS_AS(aggregate({}), EmptyRelationList);
}

TEST_CASE("relation module shapes and degenerate sizes") {
    Rng rng(9);
    RelationConfig cfg;
    cfg.g_layers = {6, 6};
    cfg.f_layers = {6, 5};
    cfg.landmark_count = 2;  // a single pair still works
    PrnModel prn("p", 3, cfg, false, rng);
    CHECK(prn.pair_count() == 1);
    Tensor locals = randn({2 * 2, 3}, rng);  // batch 2, n 2
    ad::Var out = prn.forward(ad::leaf(locals), 2, nullptr, false);
    CHECK(out->value.dim(0) == 2);
    CHECK(out->value.dim(1) == 5);
}

TEST_CASE("duplicate relations sum to a counted multiple") {
    // identical features at every landmark make every pair relation equal,
    // so the aggregate is pair_count times the single relation.
    Rng rng(13);
    Tensor r = randn({4}, rng);
    std::vector<Relation> six;
    for (auto [i, j] : enumerate_pairs(4)) six.push_back({i, j, r});
    Tensor summed = aggregate(six);
    for (size_t k = 0; k < 4; ++k) CHECK(summed[k] == doctest::Approx(6.0 * r[k]).epsilon(1e-12));
}

TEST_CASE("identity conditioning changes relations") {
    Rng rng(17);
    RelationConfig cfg;
    cfg.g_layers = {6, 6};
    cfg.f_layers = {6, 4};
    cfg.sid_width = 3;
    cfg.landmark_count = 4;
    PrnModel prn("p", 3, cfg, true, rng);

    Tensor locals = randn({2 * 4, 3}, rng);
    Tensor sid_a = randn({2, 3}, rng);
    Tensor sid_b = sid_a;
    sid_b.at(0, 1) += 0.5;

    ad::Var va = ad::leaf(sid_a), vb = ad::leaf(sid_b);
    ad::Var la = ad::leaf(locals);
    Tensor out_a = prn.forward(la, 2, &va, false)->value;
    Tensor out_b = prn.forward(la, 2, &vb, false)->value;
    CHECK_FALSE(bit_equal(out_a, out_b));

    // zeroing the sid input column weights reduces to the unconditioned map
    // on the same g weights restricted to the local block; cheaper check:
    // identical sids give identical outputs
    Tensor out_a2 = prn.forward(la, 2, &va, false)->value;
    CHECK(bit_equal(out_a, out_a2));
}

TEST_CASE("identity encoder state reacts to sequence order") {
    Rng rng(19);
    RelationConfig cfg;
    cfg.lstm_hidden = 6;
    cfg.sid_width = 4;
    cfg.landmark_count = 5;
    IdentityEncoder enc("e", 3, cfg, 7, rng);
    CHECK(enc.sid_width() == 4);

    Tensor locals = randn({1 * 5, 3}, rng);
    auto out = enc.forward(ad::leaf(locals), 1);
    CHECK(out.sid->value.dim(1) == 4);
    CHECK(out.logits->value.dim(1) == 7);
    // post-ReLU activation: never negative
    for (size_t i = 0; i < out.sid->value.size(); ++i) CHECK(out.sid->value[i] >= 0.0);

    // reversing the landmark sequence must change the state (LSTM is ordered)
    Tensor rev({5, 3});
    for (size_t i = 0; i < 5; ++i)
        for (size_t c = 0; c < 3; ++c) rev.at(i, c) = locals.at(4 - i, c);
    auto out_r = enc.forward(ad::leaf(rev), 1);
    CHECK_FALSE(bit_equal(out.sid->value, out_r.sid->value));
}

TEST_CASE("pair weights are shared across pairs") {
    // one PrnModel over n=3 has the same parameter count as over n=30:
    // relations reuse g, aggregation is parameter-free.
    Rng rng1(23), rng2(23);
    RelationConfig a;
    a.g_layers = {8};
    a.f_layers = {6};
    a.landmark_count = 3;
    RelationConfig b = a;
    b.landmark_count = 30;
    PrnModel small("p", 4, a, false, rng1);
    PrnModel large("p", 4, b, false, rng2);
    auto count = [](std::vector<Parameter*> ps) {
        size_t n = 0;
        for (auto* p : ps) n += p->value.size();
        return n;
    };
    CHECK(count(small.params()) == count(large.params()));
    CHECK(small.pair_count() == 3);
    CHECK(large.pair_count() == 435);
}

TEST_CASE("fusion output shape") {
    Rng rng(29);
    FusionModel fuse("f", 64, 32, 48, rng);
    CHECK(fuse.out_dim() == 48);
    Tensor fg = randn({3, 64}, rng);
    Tensor rel = randn({3, 32}, rng);
    ad::Var out = fuse.forward(ad::leaf(fg), ad::leaf(rel), true, false);
    CHECK(out->value.dim(0) == 3);
    CHECK(out->value.dim(1) == 48);
    // BN + ReLU output: nonnegative
    for (size_t i = 0; i < out->value.size(); ++i) CHECK(out->value[i] >= 0.0);
}

TEST_CASE("variant parsing") {
    CHECK(parse_variant("A") == Variant::A);
    CHECK(parse_variant("b") == Variant::B);
    CHECK(parse_variant("C") == Variant::C);
    CHECK(variant_name(Variant::B) == "B");
    CHECK_THROWS_AS(parse_variant("D"), ValidationError);
}

TEST_CASE("relation config validation") {
    RelationConfig cfg;
    cfg.landmark_count = 1;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    RelationConfig neg;
    neg.margin = -0.5;
    CHECK_THROWS_AS(neg.validate(), ValidationError);
    RelationConfig empty;
    empty.g_layers = {};
    CHECK_THROWS_AS(empty.validate(), ValidationError);
    RelationConfig ref = RelationConfig::paper_full();
    ref.validate();
    CHECK(ref.landmark_count == 68);
}
