#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace lrss {

/// Uniform draw in (0, 1]. The mapping from raw engine output is spelled out
/// here (rather than using std::uniform_real_distribution) so that streams are
/// bit-identical across standard-library implementations.
inline double uniform_unit(std::mt19937_64& gen) {
    // 53 random mantissa bits; shift into (0, 1] so log() is always safe.
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    return 1.0 - u;
}

/// Standard normal sampler with a fully specified Box-Muller transform,
/// again for cross-platform reproducibility (std::normal_distribution is
/// implementation-defined).
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : gen_(seed) {}
    explicit NormalSampler(std::mt19937_64 gen) : gen_(gen) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_unit(gen_);
        const double u2 = uniform_unit(gen_);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace lrss
