#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "pv/family.hpp"
#include "pv/game.hpp"
#include "pv/sampling.hpp"
#include "pv/surrogate.hpp"

namespace pv {

struct EstimateReport {
    Eigen::VectorXd estimates;                 // R^d
    std::uint64_t queries = 0;                 // utility evaluations consumed
    std::uint64_t seed = 0;
    std::string method;
    std::vector<Eigen::VectorXd> fold_estimates;
    std::vector<double> law_pi;                // final sampling law snapshot
    bool condition_warning = false;
};

struct EstimatorConfig {
    std::uint64_t budget = 1000;   // total utility evaluations, endpoints included
    double pilot_fraction = 0.2;   // stage-1 share of the sampled budget
    int folds = 2;
    double floor_eps = 0.2;
    double lambda_surrogate = 0.0;  // 0 = scale-relative default
    double lambda_wls = 0.0;        // 0 = default (n-1)/n * 1e-6 * m
    std::string basis = "fo";
    bool reuse_pilot = false;       // Algorithm "simple version": discarded
    bool unweighted_fit = false;    // RegressionMSR-style approximation loss
    std::uint64_t seed = 1;
};

// Deterministic endpoint contribution sum_i a_i {alpha_{n-1} u([n]) - alpha_0 u(0)};
// costs exactly two queries. For Shapley this is the efficiency term
// {u([n]) - u(0)}/n per player.
inline Eigen::VectorXd endpoint_term(const Utility& u,
                                     const SemivalueFamily& family,
                                     const TargetSpec& targets) {
    const int n = family.n();
    const double u_full = u(Coalition::grand(n));
    const double u_empty = u(Coalition::empty(n));
    const double scale = family.alpha(n - 1) * u_full - family.alpha(0) * u_empty;
    return targets.column_sums() * scale;
}

// Endpoint part of tau_A(h); the sampled correction only covers interior
// sizes, so surrogate estimators must remove this from the closed-form tau.
inline Eigen::VectorXd model_endpoint_term(const SurrogateModel& h,
                                           const SemivalueFamily& family,
                                           const TargetSpec& targets) {
    const int n = family.n();
    const double scale = family.alpha(n - 1) * h(Coalition::grand(n)) -
                         family.alpha(0) * h(Coalition::empty(n));
    return targets.column_sums() * scale;
}

namespace detail {

inline void check_support(const CellLaw& law) {
    for (double p : law.pi())
        if (p <= 0.0)
            throw std::invalid_argument(
                "sampling law has a zero-probability interior cell");
}

// round-robin fold of index t
inline int fold_of(long t, int folds) { return static_cast<int>(t % folds); }

}  // namespace detail

// Horvitz-Thompson: endpoint term + (1/m) sum rho_A(S_t) u(S_t) / q(S_t)
inline EstimateReport ht_estimate(const Utility& u, const SemivalueFamily& family,
                                  const TargetSpec& targets, const CellLaw& law,
                                  long m, Rng& rng) {
    detail::check_support(law);
    Eigen::VectorXd est = endpoint_term(u, family, targets);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(targets.d());
    for (long t = 0; t < m; ++t) {
        const Coalition S = law.sample(rng);
        acc += rho_vector(family, targets, S) * (u(S) / law.prob(S));
    }
    est += acc / static_cast<double>(m);
    EstimateReport rep;
    rep.estimates = est;
    rep.queries = static_cast<std::uint64_t>(m) + 2;
    rep.method = "ht";
    rep.law_pi = law.pi();
    return rep;
}

// Cell structure for the post-stratified estimator. The trivial whole-support
// cell reproduces the plain weighted mean exactly; the membership split
// guarantees cellwise sign compatibility of gamma for per-player targets.
enum class HajekCells { Trivial, SizeMembership };

// Hajek post-stratification: within each cell replace the empirical frequency
// by the known design probability; empty cells contribute zero.
inline EstimateReport hajek_estimate(const Utility& u,
                                     const SemivalueFamily& family,
                                     const TargetSpec& targets,
                                     const CellLaw& law, HajekCells cells,
                                     long m, Rng& rng) {
    detail::check_support(law);
    const int n = family.n();
    if (law.partition().mode() != PartitionMode::BySize)
        throw std::invalid_argument("hajek_estimate: law must be size-stratified");

    Eigen::VectorXd est = endpoint_term(u, family, targets);

    if (cells == HajekCells::Trivial) {
        // single interior cell of total mass one: identical to the plain
        // weighted mean on the same sample stream
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(targets.d());
        for (long t = 0; t < m; ++t) {
            const Coalition S = law.sample(rng);
            acc += rho_vector(family, targets, S) * (u(S) / law.prob(S));
        }
        est += acc / static_cast<double>(m);
    } else {
        if (targets.d() != n || !targets.A.isIdentity(1e-12))
            throw std::invalid_argument(
                "hajek_estimate: membership cells need identity targets");
        // per player i: cells (s, i in S); gamma is constant on each cell
        std::vector<std::vector<double>> sums(n,
                                              std::vector<double>(2 * (n - 1), 0.0));
        std::vector<std::vector<long>> counts(n, std::vector<long>(2 * (n - 1), 0));
        for (long t = 0; t < m; ++t) {
            const Coalition S = law.sample(rng);
            const double y = u(S);
            const double q = law.prob(S);
            const int s = S.size();
            const double g_in = family.alpha(s - 1) / q;
            const double g_out = -family.alpha(s) / q;
            for (int i = 0; i < n; ++i) {
                const int b = S.contains(i) ? 1 : 0;
                const int cell = 2 * (s - 1) + b;
                sums[i][cell] += (b ? g_in : g_out) * y;
                counts[i][cell] += 1;
            }
        }
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int s = 1; s <= n - 1; ++s) {
                const double q_cell = law.pi()[s - 1];  // per-coalition prob
                const double pi_out =
                    static_cast<double>(choose_exact(n - 1, s)) * q_cell;
                const double pi_in =
                    static_cast<double>(choose_exact(n - 1, s - 1)) * q_cell;
                const int c_out = 2 * (s - 1), c_in = 2 * (s - 1) + 1;
                if (counts[i][c_out] > 0)
                    acc += pi_out * sums[i][c_out] / counts[i][c_out];
                if (counts[i][c_in] > 0)
                    acc += pi_in * sums[i][c_in] / counts[i][c_in];
            }
            est[i] += acc;
        }
    }

    EstimateReport rep;
    rep.estimates = est;
    rep.queries = static_cast<std::uint64_t>(m) + 2;
    rep.method = "hajek";
    rep.law_pi = law.pi();
    return rep;
}

// Shapley WLS design: centered inclusion features and the Shapley kernel
// weight; the population Gram is ((n-1)/n)(I - 11^T/n).
struct WLSSpec {
    int n = 0;

    static WLSSpec shapley(int n) { return {n}; }

    double weight(const Coalition& S) const {
        const int s = S.size();
        return (n - 1.0) / (choose(n, s) * s * (n - s));
    }
    Eigen::VectorXd z(const Coalition& S) const {
        Eigen::VectorXd v =
            Eigen::VectorXd::Constant(n, -static_cast<double>(S.size()) / n);
        for (int i = 0; i < n; ++i)
            if (S.contains(i)) v[i] += 1.0;
        return v;
    }
    Eigen::MatrixXd gram_closed_form() const {
        Eigen::MatrixXd C =
            Eigen::MatrixXd::Identity(n, n).array() - 1.0 / n;
        return (n - 1.0) / n * C;
    }
};

// Ridge solution of the weighted design sum_t wt z z^T beta = sum_t wt z y.
inline Eigen::VectorXd wls_solve(const std::vector<Eigen::VectorXd>& z,
                                 const std::vector<double>& wtilde,
                                 const std::vector<double>& y, double lambda,
                                 bool* condition_warning = nullptr) {
    const int p = static_cast<int>(z.front().size());
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    for (std::size_t t = 0; t < z.size(); ++t) {
        G.selfadjointView<Eigen::Lower>().rankUpdate(z[t], wtilde[t]);
        b += wtilde[t] * y[t] * z[t];
    }
    G = G.selfadjointView<Eigen::Lower>();
    G.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    if (condition_warning)
        *condition_warning = detail::poor_conditioning(ldlt.vectorD());
    return ldlt.solve(b);
}

// Ridge WLS estimator for the Shapley vector (KernelSHAP / LeverageSHAP
// presets differ only in the sampling law). The readout projects onto the
// sum-zero subspace and the efficiency term restores the full vector.
inline EstimateReport wls_ridge_estimate(const Utility& u, const WLSSpec& spec,
                                         const CellLaw& law, long m,
                                         double lambda, Rng& rng) {
    detail::check_support(law);
    if (!(lambda > 0.0))
        throw std::invalid_argument("wls_ridge_estimate: lambda must be positive");
    const int n = spec.n;
    std::vector<Eigen::VectorXd> z;
    std::vector<double> wtilde, y;
    z.reserve(m);
    wtilde.reserve(m);
    y.reserve(m);
    for (long t = 0; t < m; ++t) {
        const Coalition S = law.sample(rng);
        z.push_back(spec.z(S));
        wtilde.push_back(spec.weight(S) / law.prob(S));
        y.push_back(u(S));
    }
    EstimateReport rep;
    Eigen::VectorXd beta = wls_solve(z, wtilde, y, lambda, &rep.condition_warning);
    // center the readout, then add the deterministic efficiency component
    beta.array() -= beta.mean();
    const double u_full = u(Coalition::grand(n));
    const double u_empty = u(Coalition::empty(n));
    rep.estimates = beta.array() + (u_full - u_empty) / n;
    rep.queries = static_cast<std::uint64_t>(m) + 2;
    rep.method = "wls";
    rep.law_pi = law.pi();
    return rep;
}

namespace detail {

struct Draw {
    Coalition S;
    double y = 0.0;
    Eigen::VectorXd omega;                       // rho_A(S)/q(S)
    std::vector<std::pair<int, double>> x;       // surrogate features
};

// rewrite an fo or size-profile model as sp coefficients; exact on interior
// coalitions: a pure size term g(|S|) spreads as g(s)/s over the s active
// size-s membership features, and 1(i in S) maps to the size-s feature of i
inline Eigen::VectorXd embed_in_sp(const SurrogateModel& h, int n) {
    if (h.basis.kind() != BasisKind::FO &&
        h.basis.kind() != BasisKind::SizeProfile)
        throw std::invalid_argument("embed_in_sp: unsupported basis");
    const bool fo = h.basis.kind() == BasisKind::FO;
    Eigen::VectorXd b0 = Eigen::VectorXd::Zero(n * (n - 1));
    for (int s = 1; s <= n - 1; ++s) {
        const double fr = static_cast<double>(s) / n;
        const double logv = std::log1p(static_cast<double>(s));
        const double g = fo ? h.beta[0] + h.beta[n + 1] * logv +
                                  h.beta[n + 2] * fr * fr
                            : h.beta[0] + h.beta[1] * logv + h.beta[2] * fr * fr;
        for (int i = 0; i < n; ++i)
            b0[(s - 1) * n + i] = g / s + (fo ? h.beta[1 + i] : 0.0);
    }
    return b0;
}

// cross-fitted AIPW core shared by the single-coalition estimators
inline EstimateReport aipw_from_draws(const std::vector<Draw>& draws,
                                      const FeatureBasis& basis,
                                      const SemivalueFamily& family,
                                      const TargetSpec& targets, int folds,
                                      double lambda, bool unweighted) {
    const long m = static_cast<long>(draws.size());
    if (folds < 2) throw std::invalid_argument("aipw: need at least 2 folds");
    if (m < folds) throw std::invalid_argument("aipw: fewer samples than folds");
    const int d = targets.d();
    const Eigen::MatrixXd Phi = basis_value_matrix(basis, family);
    const Eigen::VectorXd unit = Eigen::VectorXd::Ones(1);

    // coarse 3-parameter size-profile model used when a fold is too small to
    // support the requested basis; it still captures the dominant size trend
    const FeatureBasis size_basis =
        FeatureBasis::make(BasisKind::SizeProfile, basis.n());
    const Eigen::MatrixXd Phi_size = basis_value_matrix(size_basis, family);

    // the sp ridge shrinks toward an embedded fo fit rather than toward zero,
    // so an underdetermined sp fold can only refine the fo model
    const bool sp_center = basis.kind() == BasisKind::SP && !unweighted;
    const FeatureBasis fo_basis = FeatureBasis::make(BasisKind::FO, basis.n());

    // per-fold complement stats built by one pass over the sample
    std::vector<SufficientStats> fold_stats(
        folds, SufficientStats(basis.dim(), unweighted ? 1 : d));
    std::vector<SufficientStats> size_stats(
        folds, SufficientStats(size_basis.dim(), unweighted ? 1 : d));
    std::vector<SufficientStats> fo_stats(
        sp_center ? folds : 0, SufficientStats(fo_basis.dim(), d));
    for (long t = 0; t < m; ++t) {
        const int b = fold_of(t, folds);
        const auto xs = size_basis.features(draws[t].S);
        for (int g = 0; g < folds; ++g) {
            if (g == b) continue;
            if (unweighted) {
                fold_stats[g].add(unit, draws[t].x, draws[t].y);
                size_stats[g].add(unit, xs, draws[t].y);
            } else {
                fold_stats[g].add(draws[t].omega, draws[t].x, draws[t].y);
                size_stats[g].add(draws[t].omega, xs, draws[t].y);
                if (sp_center)
                    fo_stats[g].add(draws[t].omega,
                                    fo_basis.features(draws[t].S), draws[t].y);
            }
        }
    }

    EstimateReport rep;
    rep.estimates = Eigen::VectorXd::Zero(d);
    for (int b = 0; b < folds; ++b) {
        // data-starved folds step down a coarse-to-fine ladder: requested
        // basis -> fo (for sp) -> size profile -> zero; the ridge alone cannot
        // prevent a noise fit from inflating the correction
        SurrogateModel h = SurrogateModel::zero(basis, d);
        const Eigen::MatrixXd* Phi_used = &Phi;
        if (fold_stats[b].t() >= 3L * basis.dim()) {
            const double lam = lambda > 0.0
                                   ? lambda
                                   : default_surrogate_lambda(fold_stats[b]);
            Eigen::VectorXd center;
            const Eigen::VectorXd* cptr = nullptr;
            if (sp_center && fo_stats[b].t() >= 3L * fo_basis.dim()) {
                SurrogateModel hc =
                    fit_profiled(fo_stats[b], fo_basis,
                                 default_surrogate_lambda(fo_stats[b]));
                if (!hc.condition_warning) {
                    center = embed_in_sp(hc, basis.n());
                    cptr = &center;
                }
            }
            h = unweighted ? fit_unweighted(fold_stats[b], basis, lam)
                           : fit_profiled(fold_stats[b], basis, lam, cptr);
            if (h.condition_warning && !unweighted) {
                // ill-conditioned fold system: the shrinkage center (or zero)
                // is a fixed model, so AIPW stays unbiased
                h = SurrogateModel::zero(basis, d);
                if (cptr) h.beta = center;
                rep.condition_warning = true;
            }
        } else if (sp_center && fo_stats[b].t() >= 3L * fo_basis.dim()) {
            SurrogateModel hc = fit_profiled(
                fo_stats[b], fo_basis, default_surrogate_lambda(fo_stats[b]));
            if (!hc.condition_warning) {
                h.beta = embed_in_sp(hc, basis.n());
            } else if (size_stats[b].t() >= 4L * size_basis.dim()) {
                SurrogateModel hs =
                    fit_profiled(size_stats[b], size_basis,
                                 default_surrogate_lambda(size_stats[b]));
                if (!hs.condition_warning) h.beta = embed_in_sp(hs, basis.n());
            }
        } else if (size_stats[b].t() >= 4L * size_basis.dim()) {
            const double lam = default_surrogate_lambda(size_stats[b]);
            SurrogateModel hs =
                unweighted ? fit_unweighted(size_stats[b], size_basis, lam)
                           : fit_profiled(size_stats[b], size_basis, lam);
            if (!hs.condition_warning || unweighted) {
                h = hs;
                Phi_used = &Phi_size;
            }
        }
        Eigen::VectorXd tau_h = targets.A.transpose() * (*Phi_used * h.beta) -
                                model_endpoint_term(h, family, targets);
        Eigen::VectorXd corr = Eigen::VectorXd::Zero(d);
        long held = 0;
        for (long t = b; t < m; t += folds) {
            corr += draws[t].omega * (draws[t].y - h(draws[t].S));
            ++held;
        }
        Eigen::VectorXd fold_est = tau_h + corr / static_cast<double>(held);
        rep.fold_estimates.push_back(fold_est);
        rep.estimates += (static_cast<double>(held) / m) * fold_est;
    }
    return rep;
}

}  // namespace detail

// Cross-fitted AIPW with the efficiency-aware profiled surrogate fit
// (or the unweighted approximation-loss variant).
inline EstimateReport aipw_estimate(const Utility& u,
                                    const SemivalueFamily& family,
                                    const TargetSpec& targets,
                                    const CellLaw& law,
                                    const FeatureBasis& basis, long m,
                                    int folds, Rng& rng, double lambda = 0.0,
                                    bool unweighted = false) {
    detail::check_support(law);
    std::vector<detail::Draw> draws;
    draws.reserve(m);
    for (long t = 0; t < m; ++t) {
        detail::Draw dr;
        dr.S = law.sample(rng);
        dr.y = u(dr.S);
        dr.omega = rho_vector(family, targets, dr.S) / law.prob(dr.S);
        dr.x = basis.features(dr.S);
        draws.push_back(std::move(dr));
    }
    EstimateReport rep = detail::aipw_from_draws(draws, basis, family, targets,
                                                 folds, lambda, unweighted);
    rep.estimates += endpoint_term(u, family, targets);
    rep.queries = static_cast<std::uint64_t>(m) + 2;
    rep.method = unweighted ? "aipw-unweighted" : "aipw";
    rep.law_pi = law.pi();
    rep.seed = 0;
    return rep;
}

// AIPW with a fixed (externally supplied) surrogate; no cross-fitting.
// Its replication MSE is exactly V(A; q, h)/m.
inline EstimateReport aipw_fixed_estimate(const Utility& u,
                                          const SemivalueFamily& family,
                                          const TargetSpec& targets,
                                          const CellLaw& law,
                                          const SurrogateModel& h, long m,
                                          Rng& rng) {
    detail::check_support(law);
    const Eigen::VectorXd tau_h =
        tau_vector(h, family, targets) - model_endpoint_term(h, family, targets);
    Eigen::VectorXd corr = Eigen::VectorXd::Zero(targets.d());
    for (long t = 0; t < m; ++t) {
        const Coalition S = law.sample(rng);
        corr += rho_vector(family, targets, S) * ((u(S) - h(S)) / law.prob(S));
    }
    EstimateReport rep;
    rep.estimates =
        endpoint_term(u, family, targets) + tau_h + corr / static_cast<double>(m);
    rep.queries = static_cast<std::uint64_t>(m) + 2;
    rep.method = "aipw-fixed";
    rep.law_pi = law.pi();
    return rep;
}

// Two-stage efficiency-aware estimation: pilot draws from the init law fit a
// surrogate, cellwise residual moments choose the floored stage-2 law, and a
// cross-fitted AIPW on fresh stage-2 draws produces the estimate. Pilot
// samples only shape the law; they are excluded from the final estimator.
inline EstimateReport ease_estimate(const Utility& u,
                                    const SemivalueFamily& family,
                                    const TargetSpec& targets,
                                    const EstimatorConfig& cfg, Rng& rng) {
    if (!(cfg.pilot_fraction > 0.0 && cfg.pilot_fraction < 1.0))
        throw std::invalid_argument("ease: pilot fraction must be in (0,1)");
    if (cfg.budget < 2 + 2 * static_cast<std::uint64_t>(cfg.folds))
        throw std::invalid_argument("ease: budget too small");
    const int n = family.n();
    const long m_total = static_cast<long>(cfg.budget) - 2;
    long m_init = static_cast<long>(std::ceil(cfg.pilot_fraction * m_total));
    m_init = std::max<long>(1, std::min<long>(m_init, m_total - cfg.folds));

    auto part = std::make_shared<CellPartition>(CellPartition::by_size(n));
    const CellLaw q_init = init_law(part, family, targets);
    const FeatureBasis basis = FeatureBasis::parse(cfg.basis, n);

    // a pilot too small to resolve the cellwise moments cannot improve on the
    // init law; spend the whole budget on estimation instead
    if (m_init < 2L * part->num_cells()) m_init = 0;
    const long m_est = m_total - m_init;

    // stage 1: pilot sample and initial surrogate; pilots too small for the
    // requested basis fall back to the 3-parameter size-profile model
    // pilot surrogate steps down the same coarse-to-fine ladder as the fold
    // fits: requested basis -> fo -> size profile
    const FeatureBasis size_basis = FeatureBasis::make(BasisKind::SizeProfile, n);
    const FeatureBasis fo_basis = FeatureBasis::make(BasisKind::FO, n);
    const FeatureBasis pilot_basis =
        m_init >= 3L * basis.dim()
            ? basis
            : (m_init >= 3L * fo_basis.dim() ? fo_basis : size_basis);
    SufficientStats pilot_stats(pilot_basis.dim(), targets.d());
    SufficientStats pilot_fo_stats(fo_basis.dim(), targets.d());
    std::vector<detail::Draw> pilot;
    pilot.reserve(m_init);
    for (long t = 0; t < m_init; ++t) {
        detail::Draw dr;
        dr.S = q_init.sample(rng);
        dr.y = u(dr.S);
        dr.omega = rho_vector(family, targets, dr.S) / q_init.prob(dr.S);
        dr.x = pilot_basis.features(dr.S);
        pilot_stats.add(dr.omega, dr.x, dr.y);
        if (pilot_basis.kind() == BasisKind::SP)
            pilot_fo_stats.add(dr.omega, fo_basis.features(dr.S), dr.y);
        pilot.push_back(std::move(dr));
    }
    ResidualMoments mom;
    mom.Mhat.assign(part->num_cells(), 0.0);
    mom.pilots.assign(part->num_cells(), 0);
    if (m_init > 0) {
        const double lam_pilot = cfg.lambda_surrogate > 0.0
                                     ? cfg.lambda_surrogate
                                     : default_surrogate_lambda(pilot_stats);
        // for the sp basis the pilot ridge shrinks toward an embedded fo fit
        Eigen::VectorXd center;
        const Eigen::VectorXd* cptr = nullptr;
        if (pilot_basis.kind() == BasisKind::SP) {
            SurrogateModel hc =
                fit_profiled(pilot_fo_stats, fo_basis,
                             default_surrogate_lambda(pilot_fo_stats));
            if (!hc.condition_warning) {
                center = detail::embed_in_sp(hc, n);
                cptr = &center;
            }
        }
        SurrogateModel h_init =
            fit_profiled(pilot_stats, pilot_basis, lam_pilot, cptr);
        if (h_init.condition_warning) {
            h_init = SurrogateModel::zero(pilot_basis, targets.d());
            if (cptr) h_init.beta = center;
        }

        // cellwise residual moments with the max{N_k, 1} convention
        for (const auto& dr : pilot) {
            const int k = part->cell_index(dr.S);
            const double r = dr.y - h_init(dr.S);
            mom.Mhat[k] +=
                rho_vector(family, targets, dr.S).squaredNorm() * r * r;
            mom.pilots[k] += 1;
        }
        for (int k = 0; k < part->num_cells(); ++k)
            mom.Mhat[k] /=
                static_cast<double>(std::max<std::uint64_t>(mom.pilots[k], 1));
    }

    // all-zero moments (including the skipped-pilot case) keep the init law
    const CellLaw q_final = residual_law(part, mom, cfg.floor_eps, q_init);

    // stage 2: fresh draws from the learned law, cross-fitted AIPW
    std::vector<detail::Draw> draws;
    draws.reserve(m_est);
    for (long t = 0; t < m_est; ++t) {
        detail::Draw dr;
        dr.S = q_final.sample(rng);
        dr.y = u(dr.S);
        dr.omega = rho_vector(family, targets, dr.S) / q_final.prob(dr.S);
        dr.x = basis.features(dr.S);
        draws.push_back(std::move(dr));
    }
    EstimateReport rep =
        detail::aipw_from_draws(draws, basis, family, targets, cfg.folds,
                                cfg.lambda_surrogate, false);
    rep.estimates += endpoint_term(u, family, targets);
    rep.queries = static_cast<std::uint64_t>(m_total) + 2;
    rep.method = "ease-" + cfg.basis;
    rep.law_pi = q_final.pi();
    rep.seed = cfg.seed;
    return rep;
}

// Complement-pair AIPW: one draw reveals (u(S), u(S^c)) and uses the
// Rao-Blackwell pair weighting rho_A(S)/{q(S)+q(S^c)} on the residual
// contrast. Requires a sign-symmetric family. The surrogate is fitted on
// differenced features, which is exactly the profiled criterion for the
// pair score.
inline EstimateReport pair_aipw_estimate(const Utility& u,
                                         const SemivalueFamily& family,
                                         const TargetSpec& targets,
                                         const CellLaw& law,
                                         const FeatureBasis& basis,
                                         long m_pairs, int folds, Rng& rng,
                                         double lambda = 0.0) {
    detail::check_support(law);
    if (!family.sign_symmetric())
        throw std::invalid_argument(
            "pair_aipw_estimate: family is not sign-symmetric");
    const int d = targets.d();
    const int p = basis.dim();
    const Eigen::MatrixXd Phi = basis_value_matrix(basis, family);

    struct PairDraw {
        Eigen::VectorXd omega;  // rho_A(S)/q_pair(S)
        Eigen::VectorXd xd;     // x(S) - x(S^c), dense
        double dy = 0.0;        // u(S) - u(S^c)
    };
    std::vector<PairDraw> draws;
    draws.reserve(m_pairs);
    for (long t = 0; t < m_pairs; ++t) {
        const Coalition S = law.sample(rng);
        const Coalition Sc = S.complement();
        PairDraw dr;
        dr.omega = rho_vector(family, targets, S) / law.pair_mass(S);
        dr.xd = basis.dense_features(S) - basis.dense_features(Sc);
        dr.dy = u(S) - u(Sc);
        draws.push_back(std::move(dr));
    }

    auto to_sparse = [p](const Eigen::VectorXd& v) {
        std::vector<std::pair<int, double>> x;
        for (int i = 0; i < p; ++i)
            if (v[i] != 0.0) x.emplace_back(i, v[i]);
        return x;
    };

    std::vector<SufficientStats> fold_stats(folds, SufficientStats(p, d));
    for (long t = 0; t < static_cast<long>(draws.size()); ++t) {
        const int b = detail::fold_of(t, folds);
        const auto x = to_sparse(draws[t].xd);
        for (int g = 0; g < folds; ++g)
            if (g != b) fold_stats[g].add(draws[t].omega, x, draws[t].dy);
    }

    EstimateReport rep;
    rep.estimates = Eigen::VectorXd::Zero(d);
    const long m = static_cast<long>(draws.size());
    for (int b = 0; b < folds; ++b) {
        SurrogateModel h = SurrogateModel::zero(basis, d);
        if (fold_stats[b].t() >= 3L * basis.dim()) {
            const double lam = lambda > 0.0
                                   ? lambda
                                   : default_surrogate_lambda(fold_stats[b]);
            h = fit_profiled(fold_stats[b], basis, lam);
            if (h.condition_warning) {
                h = SurrogateModel::zero(basis, d);
                rep.condition_warning = true;
            }
        }
        Eigen::VectorXd tau_h = targets.A.transpose() * (Phi * h.beta) -
                                model_endpoint_term(h, family, targets);
        Eigen::VectorXd corr = Eigen::VectorXd::Zero(d);
        long held = 0;
        for (long t = b; t < m; t += folds) {
            corr += draws[t].omega *
                    (draws[t].dy - draws[t].xd.dot(h.beta));
            ++held;
        }
        Eigen::VectorXd fold_est = tau_h + corr / static_cast<double>(held);
        rep.fold_estimates.push_back(fold_est);
        rep.estimates += (static_cast<double>(held) / m) * fold_est;
    }
    rep.estimates += endpoint_term(u, family, targets);
    rep.queries = 2 * static_cast<std::uint64_t>(m_pairs) + 2;
    rep.method = "pair-aipw";
    rep.law_pi = law.pi();
    return rep;
}

// Two-stage complement-pair estimation. Stage 1 draws pilot pairs from the
// init law, fits the differenced surrogate on all pilots, and scores cell
// residual moments by the pair residual at the drawn representative's size;
// stage 2 runs the cross-fitted pair estimator under the floored law.
inline EstimateReport pair_ease_estimate(const Utility& u,
                                         const SemivalueFamily& family,
                                         const TargetSpec& targets,
                                         const EstimatorConfig& cfg, Rng& rng) {
    if (!family.sign_symmetric())
        throw std::invalid_argument("pair_ease_estimate: family is not sign-symmetric");
    if (!(cfg.pilot_fraction > 0.0 && cfg.pilot_fraction < 1.0))
        throw std::invalid_argument("pair_ease: pilot fraction must be in (0,1)");
    const int n = family.n();
    const long pairs_total = (static_cast<long>(cfg.budget) - 2) / 2;
    if (pairs_total < 2 * cfg.folds)
        throw std::invalid_argument("pair_ease: budget too small");
    long m_init = static_cast<long>(std::ceil(cfg.pilot_fraction * pairs_total));
    m_init = std::max<long>(1, std::min<long>(m_init, pairs_total - cfg.folds));

    auto part = std::make_shared<CellPartition>(CellPartition::by_size(n));
    const CellLaw q_init = init_law(part, family, targets);
    const FeatureBasis basis = FeatureBasis::parse(cfg.basis, n);

    // pilot too small to resolve cell moments: all pairs go to estimation
    if (m_init < 2L * part->num_cells()) m_init = 0;
    const long m_est = pairs_total - m_init;

    // small pilots fit the differenced size-profile model instead
    const FeatureBasis pilot_basis =
        m_init >= 3L * basis.dim()
            ? basis
            : FeatureBasis::make(BasisKind::SizeProfile, n);
    const int p = pilot_basis.dim();

    struct Pilot {
        Coalition S;
        Eigen::VectorXd xd;
        double dy;
    };
    SufficientStats stats(p, targets.d());
    std::vector<Pilot> pilot;
    pilot.reserve(m_init);
    auto to_sparse = [p](const Eigen::VectorXd& v) {
        std::vector<std::pair<int, double>> x;
        for (int i = 0; i < p; ++i)
            if (v[i] != 0.0) x.emplace_back(i, v[i]);
        return x;
    };
    for (long t = 0; t < m_init; ++t) {
        const Coalition S = q_init.sample(rng);
        const Coalition Sc = S.complement();
        Pilot pl{S, pilot_basis.dense_features(S) - pilot_basis.dense_features(Sc),
                 u(S) - u(Sc)};
        stats.add(rho_vector(family, targets, S) / q_init.pair_mass(S),
                  to_sparse(pl.xd), pl.dy);
        pilot.push_back(std::move(pl));
    }
    ResidualMoments mom;
    mom.Mhat.assign(part->num_cells(), 0.0);
    mom.pilots.assign(part->num_cells(), 0);
    if (m_init > 0) {
        const double lam = cfg.lambda_surrogate > 0.0
                               ? cfg.lambda_surrogate
                               : default_surrogate_lambda(stats);
        SurrogateModel h = fit_profiled(stats, pilot_basis, lam);
        if (h.condition_warning)
            h = SurrogateModel::zero(pilot_basis, targets.d());
        for (const auto& pl : pilot) {
            const int k = part->cell_index(pl.S);
            const double r = pl.dy - pl.xd.dot(h.beta);
            mom.Mhat[k] += rho_vector(family, targets, pl.S).squaredNorm() * r * r;
            mom.pilots[k] += 1;
        }
        for (int k = 0; k < part->num_cells(); ++k)
            mom.Mhat[k] /=
                static_cast<double>(std::max<std::uint64_t>(mom.pilots[k], 1));
    }
    const CellLaw q_final = residual_law(part, mom, cfg.floor_eps, q_init);

    EstimateReport rep = pair_aipw_estimate(u, family, targets, q_final, basis,
                                            m_est, cfg.folds, rng,
                                            cfg.lambda_surrogate);
    rep.queries = 2 * static_cast<std::uint64_t>(pairs_total) + 2;
    rep.method = "pair-ease";
    rep.seed = cfg.seed;
    return rep;
}

// Size law on 2^([n] \ {i}): weight w_s on sizes 0..n-1, q_i(S) = w_s/C(n-1,s).
struct EdgeLaw {
    int n = 0;
    int player = 0;
    std::vector<double> size_prob;  // sums to 1 over s = 0..n-1

    // canonical choice w_s = C(n-1,s) alpha_s, which makes every draw
    // weight alpha/q equal to one
    static EdgeLaw alpha_proportional(const SemivalueFamily& family, int player) {
        EdgeLaw law;
        law.n = family.n();
        law.player = player;
        law.size_prob.resize(law.n);
        for (int s = 0; s < law.n; ++s)
            law.size_prob[s] =
                std::exp(log_choose(law.n - 1, s)) * family.alpha(s);
        double total = 0.0;
        for (double w : law.size_prob) total += w;
        for (double& w : law.size_prob) w /= total;
        return law;
    }

    double prob(const Coalition& S) const {
        return size_prob[S.size()] / choose(n - 1, S.size());
    }

    Coalition sample(Rng& rng) const {
        const double r = rng.uniform();
        double acc = 0.0;
        int s = static_cast<int>(size_prob.size()) - 1;
        for (int k = 0; k < static_cast<int>(size_prob.size()); ++k) {
            acc += size_prob[k];
            if (r < acc) {
                s = k;
                break;
            }
        }
        const std::uint64_t others =
            Coalition::grand(n).mask & ~(1ULL << player);
        return Coalition(random_combination(rng, others, s), n);
    }
};

// Edge-pair lift for one player: (1/m) sum alpha_{|S|}/q_i(S) {u(S+i) - u(S)}.
inline double edge_lift_estimate(const Utility& u, const SemivalueFamily& family,
                                 const EdgeLaw& law, long m, Rng& rng) {
    for (int s = 0; s < family.n(); ++s)
        if (family.alpha(s) > 0.0 && law.size_prob[s] <= 0.0)
            throw std::invalid_argument(
                "edge_lift_estimate: law misses part of the support");
    double acc = 0.0;
    for (long t = 0; t < m; ++t) {
        const Coalition S = law.sample(rng);
        const double w = family.alpha(S.size()) / law.prob(S);
        acc += w * (u(S.with(law.player)) - u(S));
    }
    return acc / static_cast<double>(m);
}

}  // namespace pv
