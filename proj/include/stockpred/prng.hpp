#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace stockpred {

// splitmix64. Every seeded choice in the toolkit goes through this generator:
// it is stateless to seed, trivial to reimplement elsewhere, and produces the
// same stream on every platform, which is what the reproducibility contracts
// lean on.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D4ECB9FF51AFD7ULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in (-limit, +limit).
    double next_symmetric(double limit) { return limit * (2.0 * next_double() - 1.0); }

private:
    std::uint64_t state_;
};

inline std::uint64_t splitmix64_once(std::uint64_t seed) { return SplitMix64(seed).next(); }

// Deterministic sub-stream seed for (master, stream) pairs. Independent
// streams let grid cells train concurrently without sharing generator state.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return SplitMix64(master ^ splitmix64_once(stream + 1)).next();
}

// Fisher-Yates driven by splitmix64, so shuffles are platform-stable too.
template <typename T>
void shuffle_in_place(std::vector<T>& items, SplitMix64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next() % i);
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace stockpred
