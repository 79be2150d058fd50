#include "prnet/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <set>

#include "prnet/error.hpp"

namespace prnet {

double sq_l2(const Tensor& emb, size_t a, size_t b) {
    double s = 0.0;
    for (size_t k = 0; k < emb.dim(1); ++k) {
        double d = emb.at(a, k) - emb.at(b, k);
        s += d * d;
    }
    return s;
}

std::vector<PairLabel> all_pairs(const std::vector<size_t>& labels) {
    std::vector<PairLabel> out;
    for (size_t i = 0; i + 1 < labels.size(); ++i)
        for (size_t j = i + 1; j < labels.size(); ++j)
            out.push_back({i, j, labels[i] == labels[j]});
    return out;
}

namespace {

std::vector<double> sweep_thresholds(const std::vector<double>& scores) {
    std::set<double> distinct(scores.begin(), scores.end());
    std::vector<double> out;
    out.push_back(distinct.empty() ? -1.0 : *distinct.begin() - 1.0);  // reject-all sentinel
    out.insert(out.end(), distinct.begin(), distinct.end());
    return out;
}

}  // namespace

EvalReport verify_pairs(const Tensor& emb, const std::vector<PairLabel>& pairs) {
    if (emb.rank() != 2) throw ShapeMismatch("embeddings must be [N,E]");
    std::vector<double> same, diff;
    for (const PairLabel& p : pairs) {
        if (p.a >= emb.dim(0) || p.b >= emb.dim(0)) throw ValidationError("pair index out of range");
        (p.same ? same : diff).push_back(sq_l2(emb, p.a, p.b));
    }
    if (same.empty() || diff.empty()) {
        throw DegenerateLabelSet("verification needs both same and different pairs");
    }

    std::vector<double> scores = same;
    scores.insert(scores.end(), diff.begin(), diff.end());
    const std::vector<double> thresholds = sweep_thresholds(scores);
    EvalReport report;
    for (double far_point : kFarPoints) {
        double best_tar = 0.0, best_t = thresholds.front();
        for (double t : thresholds) {
            size_t acc_same = 0, acc_diff = 0;
            for (double s : same) acc_same += s <= t;
            for (double s : diff) acc_diff += s <= t;
            double tar = static_cast<double>(acc_same) / static_cast<double>(same.size());
            double far = static_cast<double>(acc_diff) / static_cast<double>(diff.size());
            if (far <= far_point && tar > best_tar) {
                best_tar = tar;
                best_t = t;
            }
        }
        report.tar_at_far.push_back({far_point, best_tar});
        report.tar_threshold.push_back({far_point, best_t});
    }
    return report;
}

EvalReport identify(const Tensor& gallery, const std::vector<size_t>& gallery_labels,
                    const Tensor& probes, const std::vector<size_t>& probe_labels) {
    // an empty gallery arrives as a default tensor; report it as such rather
    // than as a rank complaint
    if (gallery.size() == 0 && gallery_labels.empty()) {
        throw EmptyGallery("identification needs a nonempty gallery");
    }
    if (gallery.rank() != 2 || probes.rank() != 2) throw ShapeMismatch("embeddings must be [N,E]");
    if (gallery.dim(0) != gallery_labels.size() || probes.dim(0) != probe_labels.size()) {
        throw ShapeMismatch("labels must match embedding rows");
    }
    if (gallery.dim(1) != probes.dim(1)) throw ShapeMismatch("gallery/probe widths differ");

    const size_t g = gallery.dim(0), n = probes.dim(0);
    std::set<size_t> enrolled(gallery_labels.begin(), gallery_labels.end());

    // per probe: gallery order by (distance, index), nearest first
    std::vector<std::vector<size_t>> order(n);
    std::vector<double> min_dist(n);
    std::vector<size_t> nearest(n);
    for (size_t p = 0; p < n; ++p) {
        std::vector<double> d(g);
        for (size_t i = 0; i < g; ++i) {
            double s = 0.0;
            for (size_t k = 0; k < gallery.dim(1); ++k) {
                double diff = probes.at(p, k) - gallery.at(i, k);
                s += diff * diff;
            }
            d[i] = s;
        }
        order[p].resize(g);
        for (size_t i = 0; i < g; ++i) order[p][i] = i;
        std::stable_sort(order[p].begin(), order[p].end(),
                         [&](size_t a, size_t b) { return d[a] < d[b]; });
        nearest[p] = order[p][0];
        min_dist[p] = d[order[p][0]];
    }

    EvalReport report;
    for (size_t rank : kRankPoints) {
        size_t hits = 0;
        for (size_t p = 0; p < n; ++p) {
            size_t upto = std::min(rank, g);
            for (size_t r = 0; r < upto; ++r) {
                if (gallery_labels[order[p][r]] == probe_labels[p]) {
                    ++hits;
                    break;
                }
            }
        }
        report.rank_n.push_back({rank, n == 0 ? 0.0 : static_cast<double>(hits) / n});
    }

    std::vector<size_t> mated, unmated;
    for (size_t p = 0; p < n; ++p) (enrolled.count(probe_labels[p]) ? mated : unmated).push_back(p);

    const std::vector<double> thresholds = sweep_thresholds(min_dist);
    for (double fpir_point : kFpirPoints) {
        double best_tpir = 0.0, best_t = thresholds.front();
        for (double t : thresholds) {
            size_t tp = 0, fp = 0;
            for (size_t p : mated) {
                if (min_dist[p] <= t && gallery_labels[nearest[p]] == probe_labels[p]) ++tp;
            }
            for (size_t p : unmated) fp += min_dist[p] <= t;
            double tpir = mated.empty() ? 0.0 : static_cast<double>(tp) / mated.size();
            double fpir = unmated.empty() ? 0.0 : static_cast<double>(fp) / unmated.size();
            if (fpir <= fpir_point && tpir > best_tpir) {
                best_tpir = tpir;
                best_t = t;
            }
        }
        report.tpir_at_fpir.push_back({fpir_point, best_tpir});
        report.tpir_threshold.push_back({fpir_point, best_t});
    }
    return report;
}

void write_report(std::ostream& out, const EvalReport& report) {
    char buf[128];
    auto line = [&](const char* metric, double point, double value) {
        std::snprintf(buf, sizeof(buf), "%s, %.9g, %.9g\n", metric, point, value);
        out << buf;
    };
    for (auto [p, v] : report.tar_at_far) line("tar_at_far", p, v);
    for (auto [p, v] : report.tar_threshold) line("tar_threshold", p, v);
    for (auto [p, v] : report.rank_n) line("rank_n", static_cast<double>(p), v);
    for (auto [p, v] : report.tpir_at_fpir) line("tpir_at_fpir", p, v);
    for (auto [p, v] : report.tpir_threshold) line("tpir_threshold", p, v);
}

}  // namespace prnet
