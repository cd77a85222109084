#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pv {

// A coalition is an n-bit membership mask, n <= 64. Bit i set means
// player i (0-based) is in the coalition.
struct Coalition {
    std::uint64_t mask = 0;
    int n = 0;

    Coalition() = default;
    Coalition(std::uint64_t m, int players) : mask(m), n(players) {
        if (players < 1 || players > 64)
            throw std::invalid_argument("Coalition: n must be in [1, 64]");
        if (players < 64 && (m >> players) != 0)
            throw std::invalid_argument("Coalition: mask has bits above n-1");
    }

    static Coalition empty(int n) { return Coalition(0, n); }
    static Coalition grand(int n) {
        return Coalition(n == 64 ? ~0ULL : ((1ULL << n) - 1), n);
    }
    static Coalition from_members(const std::vector<int>& members, int n) {
        std::uint64_t m = 0;
        for (int i : members) {
            if (i < 0 || i >= n)
                throw std::invalid_argument("Coalition: member out of range");
            m |= 1ULL << i;
        }
        return Coalition(m, n);
    }

    int size() const { return std::popcount(mask); }
    bool contains(int i) const { return (mask >> i) & 1ULL; }
    bool subset_of(const Coalition& other) const {
        return (mask & ~other.mask) == 0;
    }
    Coalition with(int i) const { return Coalition(mask | (1ULL << i), n); }
    Coalition without(int i) const { return Coalition(mask & ~(1ULL << i), n); }
    Coalition complement() const { return Coalition(grand(n).mask ^ mask, n); }

    std::vector<int> members() const {
        std::vector<int> out;
        for (int i = 0; i < n; ++i)
            if (contains(i)) out.push_back(i);
        return out;
    }

    bool operator==(const Coalition& o) const {
        return mask == o.mask && n == o.n;
    }
};

}  // namespace pv
