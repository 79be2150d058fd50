#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace prnet {

// Seeded generator used everywhere randomness is needed. Draws are derived
// from raw mt19937_64 output rather than std:: distributions so that the
// same seed produces the same stream on every platform.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; caches the spare draw.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Uniform index in [0, n).
    size_t index(size_t n) { return static_cast<size_t>(uniform() * static_cast<double>(n)); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent child stream, e.g. one per sample or per epoch.
    Rng fork(uint64_t salt) {
        uint64_t s = next_u64() ^ (salt * 0x9e3779b97f4a7c15ull + 0xd1b54a32d192ed03ull);
        return Rng(s);
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace prnet
