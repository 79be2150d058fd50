#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "prnet/tensor.hpp"

namespace prnet {

struct PairLabel {
    size_t a = 0, b = 0;
    bool same = false;
};

inline const std::vector<double> kFarPoints = {1e-5, 1e-4, 1e-3, 1e-2};
inline const std::vector<size_t> kRankPoints = {1, 5, 10};
inline const std::vector<double> kFpirPoints = {0.01, 0.1};

struct EvalReport {
    // (operating point, value) rows, one entry per requested point
    std::vector<std::pair<double, double>> tar_at_far;
    std::vector<std::pair<double, double>> tar_threshold;  // threshold behind each TAR row
    std::vector<std::pair<size_t, double>> rank_n;
    std::vector<std::pair<double, double>> tpir_at_fpir;
    std::vector<std::pair<double, double>> tpir_threshold;
};

double sq_l2(const Tensor& emb, size_t a, size_t b);

// Verification: score = squared L2 distance, accept when score <= threshold.
// Thresholds swept over one below-minimum sentinel plus every distinct score;
// TAR at FAR point f is the best TAR among thresholds whose FAR <= f.
EvalReport verify_pairs(const Tensor& emb, const std::vector<PairLabel>& pairs);

// Identification. Rank-N: fraction of probes whose label appears among the N
// nearest gallery rows (ties resolved toward the lower gallery index).
// Open-set sweep: a probe is accepted when its nearest distance <= threshold;
// TPIR counts mated probes accepted with the correct nearest label, FPIR
// counts accepted unmated probes.
EvalReport identify(const Tensor& gallery, const std::vector<size_t>& gallery_labels,
                    const Tensor& probes, const std::vector<size_t>& probe_labels);

// Every unordered sample pair, same = labels match.
std::vector<PairLabel> all_pairs(const std::vector<size_t>& labels);

// Line-delimited records: "metric, operating_point, value".
void write_report(std::ostream& out, const EvalReport& report);

}  // namespace prnet
