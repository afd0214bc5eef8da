#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace hoca {

// Generator id recorded alongside every seeded output.
inline constexpr const char* kRngId = "smix64ctr-v1";

/// Counter-based generator: output i is the splitmix64 finalizer applied to
/// key + i * golden ratio. State is just (key, counter), so streams can be
/// forked by name and results are bit-reproducible across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = key_ + (++counter_) * 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Uniform in {0, ..., n-1} via Lemire's multiply-shift (n > 0).
    std::size_t below(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Independent substream derived from a label; the parent is unchanged.
    Rng stream(std::string_view label) const {
        std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
        for (char c : label) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        return Rng(mix(key_ ^ h));
    }

    Rng stream(std::uint64_t salt) const { return Rng(mix(key_ ^ (salt + 0x9e3779b97f4a7c15ULL))); }

    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = below(i);
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace hoca
