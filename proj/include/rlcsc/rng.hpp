#pragma once

#include <cmath>
#include <cstdint>

namespace rlcsc {

// Counter-based splittable generator. The i-th output is a pure function of
// (key, i), so independent streams can be derived with split() and a run is
// reproducible from the seed alone regardless of call interleaving elsewhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(mix(seed ^ kKeyTweak)) {}

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGolden); }

    // Child stream; deterministic in (parent key, tag).
    Rng split(std::uint64_t tag) const { return Rng(raw_key{}, mix(key_ ^ mix(tag + kGolden))); }

    // Uniform in (0, 1], 53-bit resolution.
    double next_unit() {
        const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return u > 0.0 ? u : 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the pair's second value is cached.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Unbiased integer in [0, n) by rejection on the top bits.
    std::uint32_t next_below(std::uint32_t n) {
        const std::uint64_t span = 0x100000000ull;
        const std::uint64_t limit = span - span % n;
        for (;;) {
            const std::uint64_t v = next_u64() >> 32;
            if (v < limit) return static_cast<std::uint32_t>(v % n);
        }
    }

private:
    struct raw_key {};
    Rng(raw_key, std::uint64_t key) : key_(key) {}

    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ull;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return x ^ (x >> 31);
    }

    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
    static constexpr std::uint64_t kKeyTweak = 0x243F6A8885A308D3ull;

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Stream tags used across the project so seeds stay decoupled.
namespace rng_stream {
constexpr std::uint64_t kHeInit = 1;
constexpr std::uint64_t kShuffleBase = 2; // + epoch
constexpr std::uint64_t kProblemGen = 3;
constexpr std::uint64_t kSynthScene = 4;
} // namespace rng_stream

} // namespace rlcsc
