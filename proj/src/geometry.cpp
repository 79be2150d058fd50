#include "prnet/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "prnet/error.hpp"

namespace prnet {

void LandmarkSet::validate() const {
    if (points.size() != kLandmarkCount) {
        throw TooFewLandmarks("landmark set has " + std::to_string(points.size()) +
                              " points, expected " + std::to_string(kLandmarkCount));
    }
    for (size_t i = 0; i < points.size(); ++i) {
        if (!std::isfinite(points[i].x) || !std::isfinite(points[i].y)) {
            throw NonFiniteValue("landmark " + std::to_string(i) + " is not finite");
        }
    }
}

Point LandmarkSet::centroid(std::pair<size_t, size_t> range) const {
    double sx = 0.0, sy = 0.0;
    for (size_t i = range.first; i < range.second; ++i) {
        sx += points[i].x;
        sy += points[i].y;
    }
    double n = static_cast<double>(range.second - range.first);
    return {sx / n, sy / n};
}

Point LandmarkSet::eye_centroid() const {
    // Both eyes have six points, so the joint mean equals the mean of the
    // concatenated ranges.
    double sx = 0.0, sy = 0.0;
    for (size_t i = LandmarkRegions::left_eye.first; i < LandmarkRegions::right_eye.second; ++i) {
        sx += points[i].x;
        sy += points[i].y;
    }
    double n = static_cast<double>(LandmarkRegions::right_eye.second -
                                   LandmarkRegions::left_eye.first);
    return {sx / n, sy / n};
}

Point LandmarkSet::mouth_centroid() const { return centroid(LandmarkRegions::mouth); }

Point LandmarkSet::face_center() const {
    const Point& a = points[LandmarkRegions::leftmost];
    const Point& b = points[LandmarkRegions::rightmost];
    return {(a.x + b.x) / 2.0, (a.y + b.y) / 2.0};
}

Point SimilarityTransform::apply(const Point& p) const {
    double c = std::cos(rotation), s = std::sin(rotation);
    double rx = c * p.x - s * p.y;
    double ry = s * p.x + c * p.y;
    return {scale * rx + dx, scale * ry + dy};
}

Point SimilarityTransform::invert(const Point& p) const {
    double ux = (p.x - dx) / scale;
    double uy = (p.y - dy) / scale;
    double c = std::cos(rotation), s = std::sin(rotation);
    return {c * ux + s * uy, -s * ux + c * uy};
}

LandmarkSet SimilarityTransform::apply(const LandmarkSet& lm) const {
    LandmarkSet out;
    out.points.reserve(lm.points.size());
    for (const Point& p : lm.points) out.points.push_back(apply(p));
    return out;
}

void RoiSpec::validate() const {
    if (input_size <= 0.0) throw ValidationError("roi input_size must be positive");
    if (fmap_size == 0) throw ValidationError("roi fmap_size must be positive");
    if (region_fmap == 0) throw ValidationError("roi region_fmap must be positive");
}

AlignResult align_face(const LandmarkSet& lm, double output_size) {
    lm.validate();
    if (output_size <= 0.0) throw ValidationError("alignment output size must be positive");

    Point le = lm.centroid(LandmarkRegions::left_eye);
    Point re = lm.centroid(LandmarkRegions::right_eye);

    SimilarityTransform t;
    t.output_size = output_size;
    // Rotate the eye line level; left eye stays on the left.
    t.rotation = -std::atan2(re.y - le.y, re.x - le.x);

    // Vertical anchors are fixed fractions of the output frame.
    double eye_target = 0.30 * output_size;
    double mouth_target = 0.65 * output_size;

    SimilarityTransform rot_only;
    rot_only.rotation = t.rotation;
    Point eye_r = rot_only.apply(lm.eye_centroid());
    Point mouth_r = rot_only.apply(lm.mouth_centroid());

    double gap = mouth_r.y - eye_r.y;
    if (gap <= 0.0) {
        throw DegenerateLandmarks("eye-mouth vertical gap is not positive after rotation");
    }
    t.scale = (mouth_target - eye_target) / gap;

    Point center_r = rot_only.apply(lm.face_center());
    t.dx = output_size / 2.0 - t.scale * center_r.x;
    t.dy = eye_target - t.scale * eye_r.y;

    return {t, t.apply(lm)};
}

std::pair<size_t, size_t> roi_project(const Point& p, const RoiSpec& spec) {
    spec.validate();
    if (p.x < 0.0 || p.y < 0.0 || p.x > spec.input_size || p.y > spec.input_size) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "point (%g, %g) outside [0, %g] frame", p.x, p.y,
                      spec.input_size);
        throw OutOfBounds(buf);
    }
    double ratio = static_cast<double>(spec.fmap_size) / spec.input_size;
    auto to_cell = [&](double v) {
        auto c = static_cast<long long>(std::floor(v * ratio));
        if (c < 0) c = 0;
        long long hi = static_cast<long long>(spec.fmap_size) - 1;
        if (c > hi) c = hi;
        return static_cast<size_t>(c);
    };
    return {to_cell(p.y), to_cell(p.x)};
}

LocalFeatureSet extract_local_features(const Tensor& fmap, const LandmarkSet& lm,
                                       const RoiSpec& spec) {
    lm.validate();
    if (fmap.rank() != 3) throw ShapeMismatch("feature map must be [G,G,C], got " + fmap.shape_str());
    if (fmap.dim(0) != spec.fmap_size || fmap.dim(1) != spec.fmap_size) {
        throw ShapeMismatch("feature map grid " + fmap.shape_str() + " does not match roi spec grid " +
                            std::to_string(spec.fmap_size));
    }
    size_t channels = fmap.dim(2);
    size_t n = lm.points.size();
    Tensor out({n, channels});

    // m'-cell square window centred on the projected cell; average over the
    // window cells that fall inside the grid.
    long long half = static_cast<long long>(spec.region_fmap) / 2;
    long long grid = static_cast<long long>(spec.fmap_size);
    for (size_t i = 0; i < n; ++i) {
        auto [row, col] = roi_project(lm.points[i], spec);
        long long r0 = static_cast<long long>(row) - half;
        long long c0 = static_cast<long long>(col) - half;
        size_t used = 0;
        for (long long r = r0; r < r0 + static_cast<long long>(spec.region_fmap); ++r) {
            if (r < 0 || r >= grid) continue;
            for (long long c = c0; c < c0 + static_cast<long long>(spec.region_fmap); ++c) {
                if (c < 0 || c >= grid) continue;
                ++used;
                size_t base = (static_cast<size_t>(r) * spec.fmap_size + static_cast<size_t>(c)) * channels;
                for (size_t ch = 0; ch < channels; ++ch) {
                    out[i * channels + ch] += fmap[base + ch];
                }
            }
        }
        double inv = 1.0 / static_cast<double>(used);
        for (size_t ch = 0; ch < channels; ++ch) out[i * channels + ch] *= inv;
    }
    return {out};
}

LandmarkSet read_landmarks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open landmark file: " + path);
    LandmarkSet lm;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // Skip trailing blank lines, reject blank lines in the middle later
        // via the count check.
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        Point p;
        std::string extra;
        if (!(ss >> p.x >> p.y) || (ss >> extra)) {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": expected \"x y\", got \"" + line + "\"");
        }
        lm.points.push_back(p);
    }
    lm.validate();
    return lm;
}

void write_landmarks(const LandmarkSet& lm, const std::string& path) {
    lm.validate();
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open landmark file for writing: " + path);
    char buf[64];
    for (const Point& p : lm.points) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", p.x, p.y);
        out << buf;
    }
}

}  // namespace prnet
