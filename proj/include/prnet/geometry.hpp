#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "prnet/tensor.hpp"

namespace prnet {

inline constexpr size_t kLandmarkCount = 68;

struct Point {
    double x = 0.0;
    double y = 0.0;
};

// Index ranges of the standard 68-point annotation, [begin, end).
struct LandmarkRegions {
    static constexpr std::pair<size_t, size_t> jaw{0, 17};
    static constexpr std::pair<size_t, size_t> left_eye{36, 42};
    static constexpr std::pair<size_t, size_t> right_eye{42, 48};
    static constexpr std::pair<size_t, size_t> mouth{48, 68};
    static constexpr size_t leftmost = 0;    // jaw endpoint
    static constexpr size_t rightmost = 16;  // jaw endpoint
};

struct LandmarkSet {
    std::vector<Point> points;  // exactly 68, standard order

    void validate() const;  // throws ValidationError
    Point centroid(std::pair<size_t, size_t> range) const;
    Point eye_centroid() const;    // mean over both eye regions
    Point mouth_centroid() const;  // mean over the mouth region
    Point face_center() const;     // midpoint of leftmost and rightmost landmarks
};

// rotation about the origin, then uniform scale, then translation.
struct SimilarityTransform {
    double rotation = 0.0;  // radians
    double scale = 1.0;
    double dx = 0.0;
    double dy = 0.0;
    double output_size = 0.0;  // pixels, square target frame

    Point apply(const Point& p) const;
    Point invert(const Point& p) const;
    LandmarkSet apply(const LandmarkSet& lm) const;
};

struct RoiSpec {
    double input_size = 140.0;  // pixels, square
    size_t fmap_size = 9;       // cells, square
    size_t region_image = 16;   // m: window in image pixels (informational)
    size_t region_fmap = 1;     // m': window in feature-map cells

    void validate() const;
};

struct AlignResult {
    SimilarityTransform transform;
    LandmarkSet aligned;
};

// Upright-rotates on the eye line, centers horizontally on the jaw endpoints'
// midpoint, and fixes the vertical scale so the eye centroid lands at 30% and
// the mouth centroid at 65% of the output height.
AlignResult align_face(const LandmarkSet& lm, double output_size);

// floor(coord * fmap / input) per axis, clamped to the grid.
// Returns (row, col) where row indexes y and col indexes x.
std::pair<size_t, size_t> roi_project(const Point& p, const RoiSpec& spec);

// Per-landmark feature vectors from a [G,G,C] feature map, landmark order.
struct LocalFeatureSet {
    Tensor features;  // [N, C]

    size_t count() const { return features.dim(0); }
    size_t channels() const { return features.dim(1); }
    Tensor feature(size_t i) const { return features.row_slice(i); }
};

LocalFeatureSet extract_local_features(const Tensor& fmap, const LandmarkSet& lm,
                                       const RoiSpec& spec);

// Landmark text file: 68 lines of "x y". Throws ValidationError on malformed input.
LandmarkSet read_landmarks(const std::string& path);
void write_landmarks(const LandmarkSet& lm, const std::string& path);

}  // namespace prnet
