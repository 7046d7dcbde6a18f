#pragma once

#include <cmath>
#include <cstdint>

namespace icrl {

// Counter-based pseudo-random streams. Every draw is a pure function of
// (key, counter), so substreams keyed by (master seed, environment, row,
// variable) can be evaluated in any order or in parallel and still
// reproduce bit-identical values. The output function is the SplitMix64
// finalizer, which passes BigCrush as a bare generator.
namespace rng_detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kSalt = 0xD1B54A32D192ED03ULL;

inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

inline std::uint64_t mix_key(std::uint64_t key, std::uint64_t v) {
    return mix64(key ^ (mix64(v + kGolden) + (key << 6) + (key >> 2)));
}

}  // namespace rng_detail

// Seed for the env_index-th substream of a master seed. sample_environment
// is contractually equal to sample() on the intervened SCM with this seed.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t stream) {
    using namespace rng_detail;
    return mix_key(mix64(master + kSalt), stream);
}

class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    static CounterRng keyed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
        using namespace rng_detail;
        return CounterRng(mix_key(mix_key(mix64(seed + kSalt), a), b));
    }

    std::uint64_t next_u64() {
        ++counter_;
        return rng_detail::mix64(key_ + counter_ * rng_detail::kGolden);
    }

    // Uniform on the open interval (0, 1); safe to feed into logs.
    double next_unit() {
        const double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53
        return (static_cast<double>(next_u64() >> 11) + 0.5) * kInv53;
    }

    // Uniform on (-1, 1).
    double next_symmetric() { return 2.0 * next_unit() - 1.0; }

    // Standard normal via Box-Muller; consumes exactly two uniforms.
    double next_normal() {
        const double u1 = next_unit();
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // Zero-mean Laplace with scale b = 1 (variance 2).
    double next_laplace_unit() {
        const double v = next_unit() - 0.5;
        const double s = v < 0.0 ? -1.0 : 1.0;
        return -s * std::log1p(-2.0 * std::abs(v));
    }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace icrl
