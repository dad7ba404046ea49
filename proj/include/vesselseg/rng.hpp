#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace vesselseg {

/// All sampling uses std::mt19937_64, whose output sequence is fixed by the
/// standard. Distributions are implemented here because the std ones are
/// not portable across library implementations.
using Rng = std::mt19937_64;

/// Uniform integer in [0, bound) by rejection. bound must be > 0.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t r = rng();
        if (r >= threshold) return r % bound;
    }
}

/// Fisher-Yates; after the call the first `k` elements are a uniform sample
/// without replacement (k = size shuffles everything).
template <typename T>
void partial_shuffle(std::vector<T>& v, std::size_t k, Rng& rng) {
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
        std::swap(v[i], v[j]);
    }
}

}  // namespace vesselseg
