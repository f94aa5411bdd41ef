#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mobiprint {

/// Deterministic noise source: one seeded mt19937_64 stream per episode
/// with an explicit draw counter for reproducibility audits. The normal
/// transform is hand-rolled (Box-Muller) because std::normal_distribution
/// sequences differ across standard libraries.
class CountedRng {
public:
    explicit CountedRng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform() {
        ++draws_;
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal; consumes two uniforms per generated pair and
    /// caches the spare.
    double normal() {
        ++draws_;
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::uint64_t draws() const { return draws_; }

private:
    std::mt19937_64 engine_;
    std::uint64_t draws_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mobiprint
