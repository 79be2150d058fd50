#include "prnet/parameter.hpp"

#include <set>

namespace prnet {

void sgd_step(const std::vector<Parameter*>& params, double lr) {
    for (Parameter* p : params) {
        if (p->frozen) continue;
        if (!p->grad.same_shape(p->value)) throw ShapeMismatch("gradient shape for " + p->name);
        for (size_t i = 0; i < p->value.size(); ++i) p->value[i] -= lr * p->grad[i];
    }
}

void zero_grads(const std::vector<Parameter*>& params) {
    for (Parameter* p : params) p->zero_grad();
}

void check_unique_names(const std::vector<Parameter*>& params) {
    std::set<std::string> seen;
    for (const Parameter* p : params)
        if (!seen.insert(p->name).second)
            throw ValidationError("duplicate parameter name: " + p->name);
}

uint64_t params_checksum(const std::vector<Parameter*>& params) {
    uint64_t h = 14695981039346656037ull;
    auto mix = [&h](const unsigned char* bytes, size_t n) {
        for (size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    };
    for (const Parameter* p : params) {
        mix(reinterpret_cast<const unsigned char*>(p->name.data()), p->name.size());
        mix(reinterpret_cast<const unsigned char*>(p->value.data()),
            p->value.size() * sizeof(double));
    }
    return h;
}

}  // namespace prnet
