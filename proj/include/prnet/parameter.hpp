#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prnet/tensor.hpp"

namespace prnet {

// Named trainable tensor with its gradient accumulator. Frozen parameters
// are skipped by sgd_step and excluded from graph differentiation.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool frozen = false;

    Parameter() = default;
    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
        grad = Tensor(value.shape());
    }

    void zero_grad() { grad.fill(0.0); }
};

// value <- value - lr * grad for every non-frozen parameter.
void sgd_step(const std::vector<Parameter*>& params, double lr);

void zero_grads(const std::vector<Parameter*>& params);

// Throws ValidationError on duplicate names.
void check_unique_names(const std::vector<Parameter*>& params);

// FNV-1a over names and value bytes, order-sensitive. Detects any drift in
// parameters that are supposed to stay frozen.
uint64_t params_checksum(const std::vector<Parameter*>& params);

}  // namespace prnet
