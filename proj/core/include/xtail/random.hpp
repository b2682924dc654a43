#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace xtail {

// Mixes a stream tag into a master seed (splitmix64 finalizer), so every
// pipeline stage, Monte Carlo trial, and projection column gets its own
// generator while staying reproducible from one user-visible seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// mt19937_64 plus hand-rolled draw helpers. The standard pins down the raw
// engine output but not the library distributions, and golden values plus
// byte-identical artifacts need draws that are stable across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : m_engine(seed) {}

    std::uint64_t next_u64() { return m_engine(); }

    // Uniform on (0,1), never exactly 0 or 1, so log() stays finite.
    double next_unit();

    // Standard normal via Box-Muller. The sine half is discarded so one draw
    // always costs exactly two engine words regardless of call pattern.
    double next_gaussian();

    // Uniform integer in [0, n) by rejection; n must be positive.
    std::uint64_t next_below(std::uint64_t n);

    // Fisher-Yates; consumes exactly size-1 bounded draws.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(next_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 m_engine;
};

// k distinct values from [0, n), in the order they were drawn.
std::vector<std::uint64_t> sample_distinct(Rng& rng, std::uint64_t n, std::size_t k);

}  // namespace xtail
