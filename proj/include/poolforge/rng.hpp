#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace poolforge {

// mt19937_64 with fully specified draws. The std distributions are
// implementation-defined, which would break byte-reproducibility across
// standard libraries, so sampling is done by hand here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, n) by rejection; unbiased and portable.
    int below(int n) {
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        for (;;) {
            const std::uint64_t v = engine_();
            if (v < limit) return static_cast<int>(v % bound);
        }
    }

    // Uniform double in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; the second value of each pair is cached.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = unit();
        while (u1 <= 0.0) u1 = unit();
        const double u2 = unit();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    // In-place Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(below(i + 1))]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0;
    bool has_spare_ = false;
};

} // namespace poolforge
