#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pv/estimators.hpp"
#include "pv/family.hpp"
#include "pv/game.hpp"
#include "pv/sampling.hpp"
#include "pv/surrogate.hpp"

namespace pv {

// Exact per-draw variance of the AIPW score with a fixed surrogate h:
//   V(A; q, h) = sum_j Var_q[ gamma_{a_j}(S) {u(S) - h(S)} ],
// computed by full enumeration of the interior (n <= 20). h = nullptr
// means the plain weighted score (HT without a surrogate).
inline double first_order_variance(const Utility& u,
                                   const SemivalueFamily& family,
                                   const TargetSpec& targets,
                                   const CellLaw& law,
                                   const SurrogateModel* h = nullptr) {
    const int n = family.n();
    if (n > 14)
        throw std::invalid_argument("first_order_variance: n must be <= 14");
    const int d = targets.d();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd second = Eigen::VectorXd::Zero(d);
    const std::uint64_t total = 1ULL << n;
    for (std::uint64_t m = 1; m + 1 < total; ++m) {
        const Coalition S(m, n);
        const double q = law.prob(S);
        if (q <= 0.0)
            throw std::invalid_argument(
                "first_order_variance: law misses an interior coalition");
        const double r = u(S) - (h ? (*h)(S) : 0.0);
        const Eigen::VectorXd score = rho_vector(family, targets, S) * (r / q);
        mean += q * score;
        second += q * score.cwiseProduct(score);
    }
    return (second - mean.cwiseProduct(mean)).sum();
}

// Exact replication variance of the post-stratified estimator's leading term:
// with the known-probability reweighting, each cell contributes its design
// mass squared over the empirical count; at one draw per expected allocation
// the m * MSE limit is sum over players and cells of pi_cell * Var(gamma u | cell).
inline double hajek_cell_variance(const Utility& u,
                                  const SemivalueFamily& family,
                                  const CellLaw& law) {
    const int n = family.n();
    if (n > 14)
        throw std::invalid_argument("hajek_cell_variance: n must be <= 14");
    if (law.partition().mode() != PartitionMode::BySize)
        throw std::invalid_argument("hajek_cell_variance: need a by-size law");
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int s = 1; s <= n - 1; ++s) {
            const double q = law.pi()[s - 1];
            for (int b = 0; b < 2; ++b) {
                // enumerate the cell (size s, membership b) for player i
                const double g = (b ? family.alpha(s - 1) : -family.alpha(s)) / q;
                double sum = 0.0, sumsq = 0.0;
                std::uint64_t card = 0;
                const std::uint64_t total = 1ULL << n;
                for (std::uint64_t m = 1; m + 1 < total; ++m) {
                    const Coalition S(m, n);
                    if (S.size() != s || S.contains(i) != (b == 1)) continue;
                    const double v = g * u(S);
                    sum += v;
                    sumsq += v * v;
                    ++card;
                }
                if (card == 0) continue;
                const double mean = sum / card;
                const double var = sumsq / card - mean * mean;
                acc += static_cast<double>(card) * q * var;
            }
        }
    }
    return acc;
}

inline double relative_sq_error(const Eigen::VectorXd& est,
                                const Eigen::VectorXd& exact) {
    const double denom = exact.squaredNorm();
    if (denom <= 0.0)
        throw std::invalid_argument("relative_sq_error: exact vector is zero");
    return (est - exact).squaredNorm() / denom;
}

// Area under the cost curve: mean relative squared error across budgets.
inline double aucc(const std::vector<double>& rel_sq_errors) {
    if (rel_sq_errors.empty())
        throw std::invalid_argument("aucc: no budgets");
    double acc = 0.0;
    for (double e : rel_sq_errors) acc += e;
    return acc / static_cast<double>(rel_sq_errors.size());
}

struct MseStudy {
    double mean_sq_error = 0.0;   // mean ||est - exact||^2 over runs
    double variance = 0.0;        // sample variance of per-run squared error
    Eigen::VectorXd mean_estimate;
    std::uint64_t queries = 0;    // total across runs
};

// Replicated error study; runner(r, rng) produces one estimate per run with
// a seed derived from the master seed and the run index.
inline MseStudy mse_study(
    const std::function<EstimateReport(int, Rng&)>& runner,
    const Eigen::VectorXd& exact, int runs, std::uint64_t master_seed) {
    if (runs < 1) throw std::invalid_argument("mse_study: need runs >= 1");
    MseStudy out;
    out.mean_estimate = Eigen::VectorXd::Zero(exact.size());
    std::vector<double> errs(runs);
    for (int r = 0; r < runs; ++r) {
        Rng rng(derive_seed(master_seed, static_cast<std::uint64_t>(r)));
        EstimateReport rep = runner(r, rng);
        errs[r] = (rep.estimates - exact).squaredNorm();
        out.mean_sq_error += errs[r];
        out.mean_estimate += rep.estimates;
        out.queries += rep.queries;
    }
    out.mean_sq_error /= runs;
    out.mean_estimate /= runs;
    if (runs == 1) {
        out.variance = std::numeric_limits<double>::quiet_NaN();
    } else {
        double acc = 0.0;
        for (double e : errs) acc += (e - out.mean_sq_error) * (e - out.mean_sq_error);
        out.variance = acc / (runs - 1);
    }
    return out;
}

}  // namespace pv
