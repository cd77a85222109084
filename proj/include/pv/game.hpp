#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "pv/coalition.hpp"
#include "pv/combinatorics.hpp"
#include "pv/family.hpp"
#include "pv/rng.hpp"

namespace pv {

// Black-box utility; each call costs one query.
using Utility = std::function<double(const Coalition&)>;

// Counts utility evaluations. Concurrent increments are fine; replicate
// studies merge per-worker ledgers afterwards.
class QueryLedger {
public:
    void add(std::uint64_t k = 1) { count_.fetch_add(k, std::memory_order_relaxed); }
    std::uint64_t count() const { return count_.load(std::memory_order_relaxed); }
    void reset() { count_.store(0, std::memory_order_relaxed); }

private:
    std::atomic<std::uint64_t> count_{0};
};

// Memoizing wrapper; its ledger counts distinct coalition masks only.
class CachedUtility {
public:
    explicit CachedUtility(Utility inner) : inner_(std::move(inner)) {}

    double operator()(const Coalition& S) {
        auto it = cache_.find(S.mask);
        if (it != cache_.end()) return it->second;
        double v = inner_(S);
        cache_.emplace(S.mask, v);
        ledger_.add();
        return v;
    }

    QueryLedger& ledger() { return ledger_; }

private:
    Utility inner_;
    std::unordered_map<std::uint64_t, double> cache_;
    QueryLedger ledger_;
};

// Sum-of-unanimity game: u(S) = sum_T theta_T 1(T subseteq S).
// Terms form a multiset; duplicates are allowed.
class SOUGame {
public:
    struct Term {
        std::uint64_t mask;
        double theta;
    };

    SOUGame(int n, std::vector<Term> terms)
        : n_(n), terms_(std::move(terms)), ledger_(std::make_shared<QueryLedger>()) {
        for (const auto& t : terms_)
            if (t.mask == 0)
                throw std::invalid_argument("SOUGame: empty unanimity term");
    }

    int n() const { return n_; }
    const std::vector<Term>& terms() const { return terms_; }
    QueryLedger& ledger() const { return *ledger_; }

    double evaluate(const Coalition& S) const {
        if (S.n != n_)
            throw std::invalid_argument("SOUGame::evaluate: dimension mismatch");
        ledger_->add();
        double acc = 0.0;
        for (const auto& t : terms_)
            if ((t.mask & ~S.mask) == 0) acc += t.theta;
        return acc;
    }

    Utility oracle() const {
        return [this](const Coalition& S) { return evaluate(S); };
    }

    nlohmann::json to_json() const {
        nlohmann::json terms = nlohmann::json::array();
        for (const auto& t : terms_) {
            terms.push_back({{"members", Coalition(t.mask, n_).members()},
                             {"theta", t.theta}});
        }
        return {{"n", n_}, {"terms", terms}};
    }

    static SOUGame from_json(const nlohmann::json& j) {
        int n = j.at("n").get<int>();
        std::vector<Term> terms;
        for (const auto& tj : j.at("terms")) {
            auto members = tj.at("members").get<std::vector<int>>();
            terms.push_back({Coalition::from_members(members, n).mask,
                             tj.at("theta").get<double>()});
        }
        return SOUGame(n, std::move(terms));
    }

private:
    int n_;
    std::vector<Term> terms_;
    std::shared_ptr<QueryLedger> ledger_;  // mutable across const evaluate
};

// Low-order block: every singleton and pair, theta ~ N(0, eta sigma^2 / |low|).
// High-order block: n^2 coalitions with size drawn uniformly in [3, n] and a
// uniform coalition of that size, theta ~ N(0, (1-eta) sigma^2 / n^2).
inline SOUGame sou_generate(int n, double eta, double sigma2, std::uint64_t seed) {
    if (n < 3) throw std::invalid_argument("sou_generate: need n >= 3");
    if (!(eta > 0.0 && eta < 1.0))
        throw std::invalid_argument("sou_generate: eta must be in (0,1)");
    if (sigma2 < 0.0)
        throw std::invalid_argument("sou_generate: sigma2 must be nonnegative");

    Rng rng(seed);
    const std::uint64_t n_low = static_cast<std::uint64_t>(n) + choose_exact(n, 2);
    const double sd_low = std::sqrt(eta * sigma2 / static_cast<double>(n_low));
    const double sd_high = std::sqrt((1.0 - eta) * sigma2 /
                                     (static_cast<double>(n) * n));

    std::vector<SOUGame::Term> terms;
    terms.reserve(n_low + static_cast<std::uint64_t>(n) * n);
    for (int i = 0; i < n; ++i)
        terms.push_back({1ULL << i, sd_low * rng.normal()});
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            terms.push_back({(1ULL << i) | (1ULL << j), sd_low * rng.normal()});
    for (int t = 0; t < n * n; ++t) {
        int s = 3 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 2)));
        std::uint64_t mask = random_size_coalition(rng, n, s).mask;
        terms.push_back({mask, sd_high * rng.normal()});
    }
    return SOUGame(n, std::move(terms));
}

// Closed-form semivalues of a SOU game by linearity over unanimity terms.
// No utility queries.
inline Eigen::VectorXd exact_sou_values(const SOUGame& game,
                                        const SemivalueFamily& family) {
    const int n = game.n();
    if (family.n() != n)
        throw std::invalid_argument("exact_sou_values: family/game mismatch");
    // group terms by size to reuse the per-size unanimity sum
    std::vector<double> size_value(n + 1, -1.0);
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(n);
    for (const auto& t : game.terms()) {
        const int k = std::popcount(t.mask);
        if (size_value[k] < 0.0) {
            double v = 0.0;
            for (int s = k - 1; s <= n - 1; ++s)
                v += std::exp(log_choose(n - k, s - k + 1)) * family.alpha(s);
            size_value[k] = v;
        }
        const double contrib = t.theta * size_value[k];
        std::uint64_t m = t.mask;
        while (m) {
            const int i = std::countr_zero(m);
            phi[i] += contrib;
            m &= m - 1;
        }
    }
    return phi;
}

// Exact values by full 2^n enumeration of the definition. Oracle-grade:
// independent of the closed forms above.
inline Eigen::VectorXd brute_force_values(const Utility& u,
                                          const SemivalueFamily& family,
                                          int n) {
    if (n > 20)
        throw std::invalid_argument("brute_force_values: n must be <= 20");
    const std::uint64_t total = 1ULL << n;
    std::vector<double> table(total);
    for (std::uint64_t m = 0; m < total; ++m)
        table[m] = u(Coalition(m, n));

    Eigen::VectorXd phi = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        const std::uint64_t bit = 1ULL << i;
        double acc = 0.0;
        for (std::uint64_t m = 0; m < total; ++m) {
            if (m & bit) continue;
            acc += family.alpha(std::popcount(m)) * (table[m | bit] - table[m]);
        }
        phi[i] = acc;
    }
    return phi;
}

}  // namespace pv
