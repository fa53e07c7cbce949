#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace entrobar {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Mixes several integers into one 64-bit key.
inline constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (splitmix64(b) + 0x632be59bd9b4e019ULL + (a << 6) + (a >> 2)));
}

/// Counter-based generator: output k of stream (seed, stream) is a hash of
/// (seed, stream, k), so streams are reproducible whatever the schedule.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(hash_combine(seed, stream)) {}

    std::uint64_t next_u64() { return splitmix64(key_ ^ splitmix64(counter_++)); }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Integer uniform on [0, n).
    std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n; }

    /// Standard normal by Box-Muller.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double t = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace entrobar
