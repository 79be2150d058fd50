#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "prnet/dataset.hpp"
#include "prnet/geometry.hpp"
#include "prnet/rng.hpp"

using namespace prnet;

namespace {

// Template under a random pose plus small per-point jitter: a plausible
// in-the-wild annotation that is never degenerate.
LandmarkSet random_face(Rng& rng) {
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
    return lm;
}

}  // namespace

TEST_CASE("alignment pins eye and mouth rows") {
    // symmetric upright face: rotation must come out zero
    LandmarkSet lm = face_template();
    AlignResult res = align_face(lm, 140.0);
    CHECK(std::fabs(res.transform.rotation) < 1e-12);
    CHECK(res.aligned.eye_centroid().y == doctest::Approx(42.0).epsilon(1e-9));
    CHECK(res.aligned.mouth_centroid().y == doctest::Approx(91.0).epsilon(1e-9));
    // horizontal centering on the jaw endpoints' midpoint
    double mid = 0.5 * (res.aligned.points[LandmarkRegions::leftmost].x +
                        res.aligned.points[LandmarkRegions::rightmost].x);
    CHECK(mid == doctest::Approx(70.0).epsilon(1e-9));
}

TEST_CASE("alignment rows hold over random faces") {
    Rng rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        LandmarkSet lm = random_face(rng);
        AlignResult res = align_face(lm, 140.0);
        CAPTURE(trial);
        CHECK(std::fabs(res.aligned.eye_centroid().y - 42.0) < 1e-6);
        CHECK(std::fabs(res.aligned.mouth_centroid().y - 91.0) < 1e-6);
    }
}

TEST_CASE("alignment is rotation invariant") {
    Rng rng(43);
    for (int trial = 0; trial < 20; ++trial) {
        LandmarkSet lm = random_face(rng);
        SimilarityTransform rot;
        rot.rotation = rng.uniform(-1.0, 1.0);
        LandmarkSet spun = rot.apply(lm);
        LandmarkSet a = align_face(lm, 140.0).aligned;
        LandmarkSet b = align_face(spun, 140.0).aligned;
        for (size_t i = 0; i < kLandmarkCount; ++i) {
            CHECK(std::fabs(a.points[i].x - b.points[i].x) < 1e-6);
            CHECK(std::fabs(a.points[i].y - b.points[i].y) < 1e-6);
        }
    }
}

TEST_CASE("similarity transform round trip") {
    Rng rng(47);
    SimilarityTransform t;
    t.rotation = 0.37;
    t.scale = 1.9;
    t.dx = -4.2;
    t.dy = 11.0;
    for (int i = 0; i < 25; ++i) {
        Point p{rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0)};
        Point q = t.invert(t.apply(p));
        CHECK(std::fabs(q.x - p.x) < 1e-9);
        CHECK(std::fabs(q.y - p.y) < 1e-9);
    }
}

TEST_CASE("degenerate landmark sets are rejected") {
    LandmarkSet lm = face_template();
    lm.points.pop_back();
    CHECK_THROWS_AS(lm.validate(), ValidationError);

    LandmarkSet flat = face_template();
    // collapse the eye line onto the mouth line: no vertical extent to scale by
    for (auto& p : flat.points) p.y = 10.0;
    CHECK_THROWS_AS(align_face(flat, 140.0), DegenerateLandmarks);

    LandmarkSet nan_set = face_template();
    nan_set.points[3].x = std::nan("");
    CHECK_THROWS_AS(nan_set.validate(), NonFiniteValue);
}

TEST_CASE("roi projection corners and centre") {
    RoiSpec spec;  // 140 px, 9x9 grid
    auto tl = roi_project({0.0, 0.0}, spec);
    CHECK(tl.first == 0);
    CHECK(tl.second == 0);
    auto br = roi_project({139.0, 139.0}, spec);
    CHECK(br.first == 8);
    CHECK(br.second == 8);
    auto mid = roi_project({70.0, 70.0}, spec);
    CHECK(mid.first == 4);
    CHECK(mid.second == 4);
    // row indexes y, col indexes x
    auto off = roi_project({139.0, 0.0}, spec);
    CHECK(off.first == 0);
    CHECK(off.second == 8);

    CHECK_THROWS_AS(roi_project({-1.0, 5.0}, spec), OutOfBounds);
    CHECK_THROWS_AS(roi_project({5.0, 141.0}, spec), OutOfBounds);
}

TEST_CASE("local feature extraction") {
    RoiSpec spec;
    LandmarkSet lm = align_face(face_template(), 140.0).aligned;

    Tensor zeros({9, 9, 4});
    LocalFeatureSet z = extract_local_features(zeros, lm, spec);
    CHECK(z.count() == 68);
    CHECK(z.channels() == 4);
    for (size_t i = 0; i < z.features.size(); ++i) CHECK(z.features[i] == 0.0);

    // one-hot cell: only landmarks projecting into that cell see it
    Tensor hot({9, 9, 1});
    auto [r0, c0] = roi_project(lm.points[30], spec);  // nose tip region
    hot[(r0 * 9 + c0) * 1] = 2.5;
    LocalFeatureSet h = extract_local_features(hot, lm, spec);
    CHECK(h.features.at(30, 0) == 2.5);
    for (size_t i = 0; i < kLandmarkCount; ++i) {
        auto cell = roi_project(lm.points[i], spec);
        if (cell == std::pair<size_t, size_t>{r0, c0}) {
            CHECK(h.features.at(i, 0) == 2.5);  // same-cell landmarks share features
        } else {
            CHECK(h.features.at(i, 0) == 0.0);
        }
    }

    CHECK_THROWS_AS(extract_local_features(Tensor({5, 5, 4}), lm, spec), ShapeMismatch);
}

TEST_CASE("landmark file io") {
    LandmarkSet lm = align_face(face_template(), 140.0).aligned;
    const char* path = "lm_roundtrip.txt";
    write_landmarks(lm, path);
    LandmarkSet back = read_landmarks(path);
    for (size_t i = 0; i < kLandmarkCount; ++i) {
        CHECK(back.points[i].x == lm.points[i].x);  // %.17g survives the round trip
        CHECK(back.points[i].y == lm.points[i].y);
    }
    std::remove(path);

    const char* bad = "lm_bad.txt";
    {
        std::ofstream out(bad);
        out << "1 2\n3 4\n";  // far too few lines
    }
    CHECK_THROWS_AS(read_landmarks(bad), ValidationError);
    {
        std::ofstream out(bad);
        for (int i = 0; i < 67; ++i) out << i << " " << i << "\n";
        out << "not a number\n";
    }
    CHECK_THROWS_AS(read_landmarks(bad), ValidationError);
    std::remove(bad);
    CHECK_THROWS_AS(read_landmarks("definitely_missing.txt"), ValidationError);
}
