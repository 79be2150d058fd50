#pragma once

#include <functional>
#include <string>
#include <vector>

#include "prnet/tensor.hpp"

namespace prnet {

struct GradCheckReport {
    double max_rel_err = 0.0;
    size_t worst_coord = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

// Central finite differences (f(x+h*e) - f(x-h*e)) / 2h against the supplied
// analytic gradient. Relative error uses denominator max(|a|, |n|, 1e-8).
// Throws NonFiniteValue if f evaluates to a non-finite result.
GradCheckReport grad_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                           const Tensor& analytic, double h = 1e-5);

// Reverse-mode gradients are accepted when every coordinate of every checked
// tensor agrees with central differences to this relative error.
inline constexpr double kGradTolerance = 1e-4;

struct TargetReport {
    std::string target;
    double max_rel_err = 0.0;  // worst coordinate over all seeds and tensors
    uint64_t worst_seed = 0;
    size_t seeds_run = 0;
    bool pass() const { return max_rel_err < kGradTolerance; }
};

// Named differentiable units, each checked against central differences on
// small randomized instances: inputs and every trainable tensor. Samples are
// drawn away from relu/hinge kinks so the difference quotient is valid.
std::vector<std::string> gradcheck_targets();

TargetReport run_gradcheck_target(const std::string& name, size_t seeds = 10);

// target may be a battery entry or "all". Throws ValidationError on an
// unknown name.
std::vector<TargetReport> run_gradcheck(const std::string& target, size_t seeds = 10);

}  // namespace prnet
