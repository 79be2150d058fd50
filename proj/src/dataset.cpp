#include "prnet/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "prnet/binio.hpp"
#include "prnet/config.hpp"
#include "prnet/error.hpp"

namespace prnet {

namespace {

constexpr size_t kLatentDim = 8;
constexpr double kTemplateEyeY = 38.0;
constexpr double kFaceCenterX = 50.0;

void deform_identity(LandmarkSet& lm, const std::vector<double>& z, double strength) {
    // Aspect stretch about the eye line, then a smooth low-frequency warp.
    for (Point& p : lm.points) {
        p.x = kFaceCenterX + (p.x - kFaceCenterX) * (1.0 + 0.08 * z[6]);
        p.y = kTemplateEyeY + (p.y - kTemplateEyeY) * (1.0 + 0.08 * z[7]);
    }
    for (Point& p : lm.points) {
        double dx = z[0] * std::sin(p.y * 0.063) + z[1] * std::cos(p.x * 0.045 + 0.7) +
                    z[2] * std::sin((p.x + p.y) * 0.031);
        double dy = z[3] * std::sin(p.x * 0.063) + z[4] * std::cos(p.y * 0.045 + 0.3) +
                    z[5] * std::sin((p.x - p.y) * 0.031);
        p.x += strength * dx / 3.0;
        p.y += strength * dy / 3.0;
    }
}

std::vector<std::vector<double>> draw_latents(size_t n, double min_gap, Rng& rng) {
    std::vector<std::vector<double>> latents;
    for (size_t id = 0; id < n; ++id) {
        for (size_t attempt = 0;; ++attempt) {
            if (attempt > 10000) throw InvalidConfig("latent_gap too large for the latent space");
            std::vector<double> z(kLatentDim);
            for (double& v : z) v = rng.uniform(-1.0, 1.0);
            bool ok = true;
            for (const auto& other : latents) {
                double d2 = 0.0;
                for (size_t k = 0; k < kLatentDim; ++k) {
                    double d = z[k] - other[k];
                    d2 += d * d;
                }
                if (d2 < min_gap * min_gap) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                latents.push_back(std::move(z));
                break;
            }
        }
    }
    return latents;
}

// Per-landmark, per-channel color driven by the identity latent through a
// fixed projection; centered on mid-gray with a spread chosen so a global
// brightness shift never clips.
std::vector<std::array<double, 3>> landmark_colors(const std::vector<double>& z,
                                                   const Tensor& proj, double spread) {
    std::vector<std::array<double, 3>> colors(kLandmarkCount);
    for (size_t i = 0; i < kLandmarkCount; ++i) {
        for (size_t ch = 0; ch < 3; ++ch) {
            double s = 0.0;
            for (size_t k = 0; k < kLatentDim; ++k) {
                s += proj[(i * 3 + ch) * kLatentDim + k] * z[k];
            }
            colors[i][ch] = 0.5 + spread * std::tanh(s / std::sqrt(double(kLatentDim)));
        }
    }
    return colors;
}

Tensor render(const LandmarkSet& lm, const std::vector<std::array<double, 3>>& colors,
              size_t size, double brightness, double noise, Rng& rng) {
    const double s = static_cast<double>(size);
    Tensor img({size, size, 3});
    const double bg[3] = {0.45, 0.42, 0.40};
    for (size_t p = 0; p < size * size; ++p)
        for (size_t ch = 0; ch < 3; ++ch) img[p * 3 + ch] = bg[ch];

    // Gaussian blob per landmark, alpha-composited in landmark order within a
    // 3.5 sigma window. Blobs are wide enough to merge into region-sized
    // color fields; identity has to be read from those colors and from the
    // deformed geometry, not from isolated dots.
    const double sigma = 0.06 * s;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    const long long win = static_cast<long long>(std::ceil(3.5 * sigma));
    const long long hi = static_cast<long long>(size) - 1;
    for (size_t i = 0; i < kLandmarkCount; ++i) {
        const Point& c = lm.points[i];
        long long x0 = std::max(0ll, static_cast<long long>(std::floor(c.x)) - win);
        long long x1 = std::min(hi, static_cast<long long>(std::ceil(c.x)) + win);
        long long y0 = std::max(0ll, static_cast<long long>(std::floor(c.y)) - win);
        long long y1 = std::min(hi, static_cast<long long>(std::ceil(c.y)) + win);
        for (long long y = y0; y <= y1; ++y) {
            for (long long x = x0; x <= x1; ++x) {
                double dx = static_cast<double>(x) + 0.5 - c.x;
                double dy = static_cast<double>(y) + 0.5 - c.y;
                double alpha = std::exp(-(dx * dx + dy * dy) * inv2s2);
                size_t base = (static_cast<size_t>(y) * size + static_cast<size_t>(x)) * 3;
                for (size_t ch = 0; ch < 3; ++ch) {
                    img[base + ch] = img[base + ch] * (1.0 - alpha) + colors[i][ch] * alpha;
                }
            }
        }
    }
    for (size_t k = 0; k < img.size(); ++k) {
        double v = img[k] + brightness + noise * rng.normal();
        img[k] = std::min(1.0, std::max(0.0, v));
    }
    return img;
}

void write_split(const std::string& path, const std::vector<SampleRecord>& samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open dataset file for writing: " + path);
    for (const SampleRecord& s : samples) {
        binio::put_u64(out, s.label);
        for (const Point& p : s.landmarks.points) {
            binio::put_f64(out, p.x);
            binio::put_f64(out, p.y);
        }
        for (size_t k = 0; k < s.image.size(); ++k) binio::put_f64(out, s.image[k]);
    }
    if (!out) throw ValidationError("write failed for dataset file: " + path);
}

std::vector<SampleRecord> read_split(const std::string& path, size_t count, size_t size) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open dataset file: " + path);
    std::vector<SampleRecord> out;
    out.reserve(count);
    for (size_t s = 0; s < count; ++s) {
        SampleRecord rec;
        rec.label = binio::get_u64(in);
        rec.landmarks.points.resize(kLandmarkCount);
        for (Point& p : rec.landmarks.points) {
            p.x = binio::get_f64(in);
            p.y = binio::get_f64(in);
        }
        rec.image = Tensor({size, size, 3});
        for (size_t k = 0; k < rec.image.size(); ++k) rec.image[k] = binio::get_f64(in);
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace

LandmarkSet face_template() {
    LandmarkSet lm;
    lm.points.resize(kLandmarkCount);
    constexpr double pi = 3.14159265358979323846;
    // jaw: elliptical arc, left top to right top through the chin
    for (size_t i = 0; i < 17; ++i) {
        double a = pi * static_cast<double>(i) / 16.0;
        lm.points[i] = {50.0 - 40.0 * std::cos(a), 38.0 + 47.0 * std::sin(a)};
    }
    // eyebrows
    for (size_t k = 0; k < 5; ++k) {
        double arc = 2.0 * std::sin(pi * static_cast<double>(k) / 4.0);
        lm.points[17 + k] = {18.0 + 6.0 * static_cast<double>(k), 27.0 - arc};
        lm.points[22 + k] = {58.0 + 6.0 * static_cast<double>(k), 27.0 - arc};
    }
    // nose bridge and base
    for (size_t k = 0; k < 4; ++k) lm.points[27 + k] = {50.0, 36.0 + 5.0 * static_cast<double>(k)};
    for (size_t k = 0; k < 5; ++k) {
        double arc = 1.5 * std::sin(pi * static_cast<double>(k) / 4.0);
        lm.points[31 + k] = {42.0 + 4.0 * static_cast<double>(k), 56.0 + arc};
    }
    // eyes: hexagons centered (30, 38) and (70, 38)
    const double ex[6] = {-8.0, -4.0, 4.0, 8.0, 4.0, -4.0};
    const double ey[6] = {0.0, -3.0, -3.0, 0.0, 3.0, 3.0};
    for (size_t k = 0; k < 6; ++k) {
        lm.points[36 + k] = {30.0 + ex[k], 38.0 + ey[k]};
        lm.points[42 + k] = {70.0 + ex[k], 38.0 + ey[k]};
    }
    // mouth: outer 12-point and inner 8-point ellipses centered (50, 68)
    for (size_t k = 0; k < 12; ++k) {
        double a = pi + 2.0 * pi * static_cast<double>(k) / 12.0;
        lm.points[48 + k] = {50.0 + 16.0 * std::cos(a), 68.0 + 8.0 * std::sin(a)};
    }
    for (size_t k = 0; k < 8; ++k) {
        double a = pi + 2.0 * pi * static_cast<double>(k) / 8.0;
        lm.points[60 + k] = {50.0 + 10.0 * std::cos(a), 68.0 + 4.0 * std::sin(a)};
    }
    return lm;
}

void DataGenConfig::validate() const {
    if (num_ids < 2) throw InvalidConfig("need at least 2 identities");
    if (per_id < 2) throw InvalidConfig("need at least 2 samples per identity");
    if (image_size < 8) throw InvalidConfig("image_size too small");
    if (rot_range < 0 || shift_range < 0 || jitter < 0 || brightness < 0 || noise < 0 ||
        deform < 0 || latent_gap < 0 || color_spread <= 0) {
        throw InvalidConfig("nuisance ranges must be non-negative");
    }
    // keeps palette + brightness inside [0, 1]: shifted colors never clip, so
    // within-image color differences carry the identity signal exactly
    if (color_spread + brightness > 0.5 + 1e-12) {
        throw InvalidConfig("color_spread + brightness must stay within 0.5");
    }
}

Dataset gen_dataset(const DataGenConfig& cfg) {
    cfg.validate();
    Rng root(cfg.seed);
    Rng latent_rng = root.fork(0xA11CE);
    auto latents = draw_latents(cfg.num_ids, cfg.latent_gap, latent_rng);

    Rng proj_rng = root.fork(0xC0102);
    Tensor proj = Tensor({kLandmarkCount * 3, kLatentDim});
    for (size_t k = 0; k < proj.size(); ++k) proj[k] = proj_rng.normal();

    const LandmarkSet base = face_template();
    Dataset data;
    data.num_ids = cfg.num_ids;
    data.image_size = cfg.image_size;

    const size_t val_per_id = (cfg.per_id + 9) / 10;
    for (size_t id = 0; id < cfg.num_ids; ++id) {
        LandmarkSet id_lm = base;
        deform_identity(id_lm, latents[id], cfg.deform);
        auto colors = landmark_colors(latents[id], proj, cfg.color_spread);

        Rng split_rng = root.fork(0x5917 + id);
        std::vector<size_t> order(cfg.per_id);
        std::iota(order.begin(), order.end(), size_t{0});
        split_rng.shuffle(order);

        for (size_t k = 0; k < cfg.per_id; ++k) {
            Rng srng = root.fork((id << 20) | k);
            LandmarkSet lm = id_lm;
            // expression: open the mouth by lowering below-center lip points
            double open = srng.uniform(0.0, 2.5);
            for (size_t i = 48; i < kLandmarkCount; ++i) {
                if (lm.points[i].y > 68.0) lm.points[i].y += open * (i < 60 ? 1.0 : 0.8);
            }
            for (Point& p : lm.points) {
                p.x += cfg.jitter * srng.normal();
                p.y += cfg.jitter * srng.normal();
            }
            // pose nuisance; alignment undoes it up to the landmark noise
            SimilarityTransform pose;
            pose.rotation = srng.uniform(-cfg.rot_range, cfg.rot_range);
            pose.dx = srng.uniform(-cfg.shift_range, cfg.shift_range);
            pose.dy = srng.uniform(-cfg.shift_range, cfg.shift_range);
            LandmarkSet raw = pose.apply(lm);

            AlignResult aligned = align_face(raw, static_cast<double>(cfg.image_size));
            // jittered jaw endpoints can spill a fraction of a pixel past the
            // frame; samples must keep every landmark inside it
            const double edge = static_cast<double>(cfg.image_size) - 1e-6;
            for (Point& p : aligned.aligned.points) {
                p.x = std::min(std::max(p.x, 0.0), edge);
                p.y = std::min(std::max(p.y, 0.0), edge);
            }
            double b = srng.uniform(-cfg.brightness, cfg.brightness);
            SampleRecord rec;
            rec.image = render(aligned.aligned, colors, cfg.image_size, b, cfg.noise, srng);
            rec.landmarks = aligned.aligned;
            rec.label = id;
            bool is_val = false;
            for (size_t v = 0; v < val_per_id; ++v) is_val |= order[v] == k;
            (is_val ? data.val : data.train).push_back(std::move(rec));
        }
    }
    return data;
}

void save_dataset(const Dataset& data, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream meta(dir + "/meta.txt");
    if (!meta) throw ValidationError("cannot write dataset meta: " + dir);
    meta << "[dataset]\n";
    meta << "num_ids = " << data.num_ids << "\n";
    meta << "image_size = " << data.image_size << "\n";
    meta << "train = " << data.train.size() << "\n";
    meta << "val = " << data.val.size() << "\n";
    write_split(dir + "/train.bin", data.train);
    write_split(dir + "/val.bin", data.val);
}

Dataset load_dataset(const std::string& dir) {
    Config meta = Config::parse_file(dir + "/meta.txt");
    Dataset data;
    data.num_ids = meta.get_size("dataset", "num_ids", 0);
    data.image_size = meta.get_size("dataset", "image_size", 0);
    size_t n_train = meta.get_size("dataset", "train", 0);
    size_t n_val = meta.get_size("dataset", "val", 0);
    meta.check_consumed();
    if (data.num_ids == 0 || data.image_size == 0) {
        throw ValidationError("dataset meta incomplete in " + dir);
    }
    data.train = read_split(dir + "/train.bin", n_train, data.image_size);
    data.val = read_split(dir + "/val.bin", n_val, data.image_size);
    return data;
}

}  // namespace prnet
