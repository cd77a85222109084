#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pv/coalition.hpp"
#include "pv/rng.hpp"

namespace pv {

// log C(n, k); lgamma keeps this finite and accurate up to n = 64
inline double log_choose(int n, int k) {
    if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
    if (k == 0 || k == n) return 0.0;
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

inline double choose(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    return std::round(std::exp(log_choose(n, k)));
}

// exact binomial coefficient; fits in uint64 for n <= 64
inline std::uint64_t choose_exact(int n, int k) {
    if (k < 0 || k > n) return 0;
    if (k > n - k) k = n - k;
    unsigned __int128 r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
    }
    return static_cast<std::uint64_t>(r);
}

// uniform k-subset of the set bits of `ground` via a Fisher-Yates prefix
inline std::uint64_t random_combination(Rng& rng, std::uint64_t ground, int k) {
    int g = std::popcount(ground);
    if (k < 0 || k > g)
        throw std::invalid_argument("random_combination: k out of range");
    int pos[64];
    int m = 0;
    for (int i = 0; i < 64; ++i)
        if ((ground >> i) & 1ULL) pos[m++] = i;
    std::uint64_t mask = 0;
    for (int i = 0; i < k; ++i) {
        int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(g - i)));
        std::swap(pos[i], pos[j]);
        mask |= 1ULL << pos[i];
    }
    return mask;
}

inline Coalition random_size_coalition(Rng& rng, int n, int s) {
    return Coalition(random_combination(rng, Coalition::grand(n).mask, s), n);
}

}  // namespace pv
