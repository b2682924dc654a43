#include "xtail/random.hpp"

#include <cmath>
#include <numbers>
#include <unordered_set>

#include "xtail/common.hpp"

namespace xtail {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master + 0x9E3779B97F4A7C15ull * (stream + 1));
}

double Rng::next_unit() {
    // 53 high bits, centered: (k + 0.5) / 2^53 lies strictly inside (0,1).
    return (static_cast<double>(m_engine() >> 11) + 0.5) * 0x1p-53;
}

double Rng::next_gaussian() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::next_below(std::uint64_t n) {
    if (n == 0) {
        throw Error("internal", "next_below(0)");
    }
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t draw = m_engine();
    while (draw >= limit) {
        draw = m_engine();
    }
    return draw % n;
}

std::vector<std::uint64_t> sample_distinct(Rng& rng, std::uint64_t n, std::size_t k) {
    if (k > n) {
        throw Error("internal", "sample_distinct: k exceeds population");
    }
    std::vector<std::uint64_t> out;
    out.reserve(k);
    std::unordered_set<std::uint64_t> seen;
    while (out.size() < k) {
        const std::uint64_t x = rng.next_below(n);
        if (seen.insert(x).second) {
            out.push_back(x);
        }
    }
    return out;
}

}  // namespace xtail
