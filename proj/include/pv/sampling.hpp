#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "pv/coalition.hpp"
#include "pv/combinatorics.hpp"
#include "pv/family.hpp"
#include "pv/rng.hpp"

namespace pv {

// Partitions of the interior coalition range 1 <= |S| <= n-1. Sizes 0 and n
// are excluded from all sampling laws; estimators add the deterministic
// endpoint contribution separately.
enum class PartitionMode { BySize, BySizeMembership };

struct Cell {
    int size;            // coalition size of the cell
    int membership;      // -1 for by-size; 0/1 for "player i not in / in S"
    std::uint64_t card;  // exact cell cardinality
};

class CellPartition {
public:
    static CellPartition by_size(int n) {
        CellPartition p;
        p.n_ = n;
        p.mode_ = PartitionMode::BySize;
        p.player_ = -1;
        for (int s = 1; s <= n - 1; ++s)
            p.cells_.push_back({s, -1, choose_exact(n, s)});
        return p;
    }

    // strata C_{i,s}^{+} and C_{i,s}^{-} for a fixed player i
    static CellPartition by_size_membership(int n, int player) {
        if (player < 0 || player >= n)
            throw std::invalid_argument("partition: player out of range");
        CellPartition p;
        p.n_ = n;
        p.mode_ = PartitionMode::BySizeMembership;
        p.player_ = player;
        for (int s = 1; s <= n - 1; ++s) {
            p.cells_.push_back({s, 0, choose_exact(n - 1, s)});
            p.cells_.push_back({s, 1, choose_exact(n - 1, s - 1)});
        }
        return p;
    }

    int n() const { return n_; }
    PartitionMode mode() const { return mode_; }
    int player() const { return player_; }
    int num_cells() const { return static_cast<int>(cells_.size()); }
    const std::vector<Cell>& cells() const { return cells_; }

    // -1 when S is outside the interior range
    int cell_index(const Coalition& S) const {
        const int s = S.size();
        if (s < 1 || s > n_ - 1) return -1;
        if (mode_ == PartitionMode::BySize) return s - 1;
        return 2 * (s - 1) + (S.contains(player_) ? 1 : 0);
    }

private:
    int n_ = 0;
    PartitionMode mode_ = PartitionMode::BySize;
    int player_ = -1;
    std::vector<Cell> cells_;
};

// Cell-constant law: q(S) = pi_k for S in C_k, sum_k |C_k| pi_k = 1.
class CellLaw {
public:
    CellLaw(std::shared_ptr<const CellPartition> partition,
            std::vector<double> pi)
        : partition_(std::move(partition)), pi_(std::move(pi)) {
        if (static_cast<int>(pi_.size()) != partition_->num_cells())
            throw std::invalid_argument("CellLaw: pi size mismatch");
        double total = 0.0;
        for (int k = 0; k < partition_->num_cells(); ++k) {
            if (pi_[k] < 0.0)
                throw std::invalid_argument("CellLaw: negative probability");
            total += static_cast<double>(partition_->cells()[k].card) * pi_[k];
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("CellLaw: mass " + std::to_string(total));
        cum_.resize(pi_.size());
        double acc = 0.0;
        for (std::size_t k = 0; k < pi_.size(); ++k) {
            acc += static_cast<double>(partition_->cells()[k].card) * pi_[k];
            cum_[k] = acc;
        }
        cum_.back() = 1.0;
    }

    const CellPartition& partition() const { return *partition_; }
    std::shared_ptr<const CellPartition> partition_ptr() const { return partition_; }
    const std::vector<double>& pi() const { return pi_; }

    double prob(const Coalition& S) const {
        const int k = partition_->cell_index(S);
        return k < 0 ? 0.0 : pi_[k];
    }

    double cell_prob(int k) const {
        return static_cast<double>(partition_->cells()[k].card) * pi_[k];
    }

    // draw a cell by its mass, then a uniform coalition within the cell
    Coalition sample(Rng& rng) const {
        const double r = rng.uniform();
        std::size_t k = 0;
        while (k + 1 < cum_.size() && r >= cum_[k]) ++k;
        const Cell& c = partition_->cells()[k];
        const int n = partition_->n();
        if (c.membership < 0) return random_size_coalition(rng, n, c.size);
        const std::uint64_t others =
            Coalition::grand(n).mask & ~(1ULL << partition_->player());
        if (c.membership == 1) {
            std::uint64_t m = random_combination(rng, others, c.size - 1);
            return Coalition(m | (1ULL << partition_->player()), n);
        }
        return Coalition(random_combination(rng, others, c.size), n);
    }

    // unordered complement-pair mass q(S) + q(S^c)
    double pair_mass(const Coalition& S) const {
        return prob(S) + prob(S.complement());
    }

private:
    std::shared_ptr<const CellPartition> partition_;
    std::vector<double> pi_;
    std::vector<double> cum_;
};

enum class NamedLaw { UniformSize, OFA, SVARM, KernelSHAP, LeverageSHAP };

inline NamedLaw parse_law(const std::string& name) {
    if (name == "uniform") return NamedLaw::UniformSize;
    if (name == "ofa") return NamedLaw::OFA;
    if (name == "svarm") return NamedLaw::SVARM;
    if (name == "kernelshap") return NamedLaw::KernelSHAP;
    if (name == "leverageshap") return NamedLaw::LeverageSHAP;
    throw std::invalid_argument("unknown sampling law: " + name);
}

// Size-stratified baseline laws, q(S) = q_s / C(n, s) on interior sizes:
//   uniform / leverageshap   q_s = 1/(n-1)
//   ofa                      q_s ~ {s(n-s)}^{-1/2}
//   svarm                    q_s ~ {min(s, n-s)}^{-1}
//   kernelshap               q_s ~ {s(n-s)}^{-1}   (Shapley kernel mass)
inline CellLaw named_law(NamedLaw kind, int n) {
    if (n < 2) throw std::invalid_argument("named_law: need n >= 2");
    auto part = std::make_shared<CellPartition>(CellPartition::by_size(n));
    std::vector<double> weight(n - 1);
    for (int s = 1; s <= n - 1; ++s) {
        double w;
        switch (kind) {
            case NamedLaw::UniformSize:
            case NamedLaw::LeverageSHAP:
                w = 1.0;
                break;
            case NamedLaw::OFA:
                w = 1.0 / std::sqrt(static_cast<double>(s) * (n - s));
                break;
            case NamedLaw::SVARM:
                w = 1.0 / static_cast<double>(std::min(s, n - s));
                break;
            case NamedLaw::KernelSHAP:
                w = 1.0 / (static_cast<double>(s) * (n - s));
                break;
        }
        weight[s - 1] = w;
    }
    double total = 0.0;
    for (double w : weight) total += w;
    std::vector<double> pi(n - 1);
    for (int s = 1; s <= n - 1; ++s)
        pi[s - 1] = weight[s - 1] / total / choose(n, s);
    return CellLaw(std::move(part), std::move(pi));
}

namespace detail {

// E[X] and E[X^2] for X = sum of c_i over a uniform k-subset of a ground set
// with coefficient sum `sum` and square sum `sq`, ground size g.
inline void subset_sum_moments(double sum, double sq, int g, int k,
                               double& m1, double& m2) {
    if (g <= 0 || k <= 0) {
        m1 = 0.0;
        m2 = 0.0;
        return;
    }
    const double f1 = static_cast<double>(k) / g;
    m1 = f1 * sum;
    double pair = 0.0;
    if (g >= 2)
        pair = static_cast<double>(k) * (k - 1) / (static_cast<double>(g) * (g - 1));
    m2 = f1 * sq + pair * (sum * sum - sq);
}

// Mean over S in the cell of sum_j rho_{a_j}(S)^2, in closed form via
// first and second moments of the within-coalition coefficient sum.
inline double mean_sq_rho(const Cell& cell, const CellPartition& part,
                          const SemivalueFamily& family,
                          const TargetSpec& targets) {
    const int n = part.n();
    const int s = cell.size;
    const double a_in = family.alpha(s - 1);
    const double a_out = family.alpha(s);
    const double c = a_in + a_out;
    double acc = 0.0;
    for (int j = 0; j < targets.d(); ++j) {
        double total = 0.0, sq = 0.0;
        double fixed = 0.0;
        for (int i = 0; i < n; ++i) total += targets.A(i, j);
        if (cell.membership < 0) {
            for (int i = 0; i < n; ++i) sq += targets.A(i, j) * targets.A(i, j);
            double m1, m2;
            subset_sum_moments(total, sq, n, s, m1, m2);
            acc += c * c * m2 - 2.0 * c * a_out * total * m1 +
                   a_out * a_out * total * total;
        } else {
            const int p = part.player();
            double others = 0.0, others_sq = 0.0;
            for (int i = 0; i < n; ++i) {
                if (i == p) continue;
                others += targets.A(i, j);
                others_sq += targets.A(i, j) * targets.A(i, j);
            }
            if (cell.membership == 1) fixed = targets.A(p, j);
            const int draw = cell.membership == 1 ? s - 1 : s;
            double m1, m2;
            subset_sum_moments(others, others_sq, n - 1, draw, m1, m2);
            const double w1 = fixed + m1;                       // E[W]
            const double w2 = fixed * fixed + 2.0 * fixed * m1 + m2;  // E[W^2]
            acc += c * c * w2 - 2.0 * c * a_out * total * w1 +
                   a_out * a_out * total * total;
        }
    }
    return acc;
}

inline CellLaw law_from_moments(std::shared_ptr<const CellPartition> part,
                                const std::vector<double>& M) {
    double denom = 0.0;
    for (int k = 0; k < part->num_cells(); ++k)
        denom += static_cast<double>(part->cells()[k].card) * std::sqrt(M[k]);
    if (denom <= 0.0)
        throw std::invalid_argument("law_from_moments: all moments zero");
    std::vector<double> pi(part->num_cells());
    for (int k = 0; k < part->num_cells(); ++k)
        pi[k] = std::sqrt(M[k]) / denom;
    return CellLaw(std::move(part), std::move(pi));
}

}  // namespace detail

// Pilot-free law: pi_k ~ sqrt(M_k^init) with M_k^init the cell mean of
// sum_j rho_{a_j}(S)^2; closed form, no enumeration.
inline CellLaw init_law(std::shared_ptr<const CellPartition> partition,
                        const SemivalueFamily& family,
                        const TargetSpec& targets) {
    std::vector<double> M(partition->num_cells());
    for (int k = 0; k < partition->num_cells(); ++k)
        M[k] = detail::mean_sq_rho(partition->cells()[k], *partition, family,
                                   targets);
    return detail::law_from_moments(partition, M);
}

struct ResidualMoments {
    std::vector<double> Mhat;           // per-cell residual second moments
    std::vector<std::uint64_t> pilots;  // per-cell pilot counts
};

// Residual-aware update with flooring: the unfloored law is pi ~ sqrt(Mhat);
// the returned law is (1-eps) * unfloored + eps * q_base with
// q_base(S) = 1/(K |C_k|), so q(S) >= eps/(K |C_k|) everywhere.
// All-zero moments fall back to the supplied law unchanged.
inline CellLaw residual_law(std::shared_ptr<const CellPartition> partition,
                            const ResidualMoments& moments, double eps,
                            const CellLaw& fallback) {
    if (!(eps > 0.0 && eps <= 1.0))
        throw std::invalid_argument("residual_law: eps must be in (0,1]");
    const int K = partition->num_cells();
    if (static_cast<int>(moments.Mhat.size()) != K)
        throw std::invalid_argument("residual_law: moment size mismatch");
    double denom = 0.0;
    for (int k = 0; k < K; ++k) {
        if (moments.Mhat[k] < 0.0)
            throw std::invalid_argument("residual_law: negative moment");
        denom += static_cast<double>(partition->cells()[k].card) *
                 std::sqrt(moments.Mhat[k]);
    }
    if (denom <= 0.0) return fallback;
    std::vector<double> pi(K);
    for (int k = 0; k < K; ++k) {
        const double base =
            1.0 / (static_cast<double>(K) *
                   static_cast<double>(partition->cells()[k].card));
        pi[k] = (1.0 - eps) * std::sqrt(moments.Mhat[k]) / denom + eps * base;
    }
    return CellLaw(partition, std::move(pi));
}

}  // namespace pv
