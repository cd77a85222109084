#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pv/coalition.hpp"
#include "pv/combinatorics.hpp"
#include "pv/family.hpp"

namespace pv {

// fo:    intercept, 1(i in S), log(1+|S|), (|S|/n)^2        p = n+3
// sp:    1(|S| = s and i in S), s = 1..n-1                  p = n(n-1)
// poly2: 1(T subseteq S) for |T| <= 2, intercept included   p = 1+n+C(n,2)
enum class BasisKind { FO, SP, Poly2, SizeProfile };

class FeatureBasis {
public:
    static FeatureBasis make(BasisKind kind, int n) {
        FeatureBasis b;
        b.kind_ = kind;
        b.n_ = n;
        switch (kind) {
            case BasisKind::FO:
                b.p_ = n + 3;
                break;
            case BasisKind::SP:
                b.p_ = n * (n - 1);
                break;
            case BasisKind::Poly2:
                b.masks_.push_back(0);
                for (int i = 0; i < n; ++i) b.masks_.push_back(1ULL << i);
                for (int i = 0; i < n; ++i)
                    for (int j = i + 1; j < n; ++j)
                        b.masks_.push_back((1ULL << i) | (1ULL << j));
                b.p_ = static_cast<int>(b.masks_.size());
                break;
            case BasisKind::SizeProfile:
                b.p_ = 3;
                break;
        }
        return b;
    }

    static FeatureBasis parse(const std::string& name, int n) {
        if (name == "fo") return make(BasisKind::FO, n);
        if (name == "sp") return make(BasisKind::SP, n);
        if (name == "poly2") return make(BasisKind::Poly2, n);
        throw std::invalid_argument("unknown basis: " + name);
    }

    BasisKind kind() const { return kind_; }
    int n() const { return n_; }
    int dim() const { return p_; }

    // active (index, value) pairs of x(S); all bases are sparse in |S|
    std::vector<std::pair<int, double>> features(const Coalition& S) const {
        std::vector<std::pair<int, double>> x;
        const int s = S.size();
        switch (kind_) {
            case BasisKind::FO: {
                x.reserve(s + 3);
                x.emplace_back(0, 1.0);
                for (int i = 0; i < n_; ++i)
                    if (S.contains(i)) x.emplace_back(1 + i, 1.0);
                x.emplace_back(n_ + 1, std::log1p(static_cast<double>(s)));
                const double frac = static_cast<double>(s) / n_;
                x.emplace_back(n_ + 2, frac * frac);
                break;
            }
            case BasisKind::SP: {
                if (s >= 1 && s <= n_ - 1) {
                    x.reserve(s);
                    for (int i = 0; i < n_; ++i)
                        if (S.contains(i)) x.emplace_back((s - 1) * n_ + i, 1.0);
                }
                break;
            }
            case BasisKind::Poly2: {
                for (int b = 0; b < p_; ++b)
                    if ((masks_[b] & ~S.mask) == 0) x.emplace_back(b, 1.0);
                break;
            }
            case BasisKind::SizeProfile: {
                x.emplace_back(0, 1.0);
                x.emplace_back(1, std::log1p(static_cast<double>(s)));
                const double frac = static_cast<double>(s) / n_;
                x.emplace_back(2, frac * frac);
                break;
            }
        }
        return x;
    }

    Eigen::VectorXd dense_features(const Coalition& S) const {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(p_);
        for (auto [idx, v] : features(S)) x[idx] = v;
        return x;
    }

    std::string name() const {
        switch (kind_) {
            case BasisKind::FO: return "fo";
            case BasisKind::SP: return "sp";
            case BasisKind::Poly2: return "poly2";
            case BasisKind::SizeProfile: return "size";
        }
        return "?";
    }

private:
    BasisKind kind_ = BasisKind::FO;
    int n_ = 0;
    int p_ = 0;
    std::vector<std::uint64_t> masks_;  // poly2 only
};

struct SurrogateModel {
    FeatureBasis basis;
    Eigen::VectorXd beta;
    Eigen::VectorXd mu;  // profiled centering, diagnostics only
    bool condition_warning = false;

    double operator()(const Coalition& S) const {
        double acc = 0.0;
        for (auto [idx, v] : basis.features(S)) acc += beta[idx] * v;
        return acc;
    }

    static SurrogateModel zero(const FeatureBasis& basis, int d) {
        return {basis, Eigen::VectorXd::Zero(basis.dim()),
                Eigen::VectorXd::Zero(d), false};
    }
};

inline double evaluate_surrogate(const SurrogateModel& m, const Coalition& S) {
    return m(S);
}

// Additive sufficient statistics of the profiled shared-linear loss.
// One observation contributes, with a = |omega|^2:
//   R += a x x^T,  dvec += a y x,  U += omega x^T,  vvec += y omega.
class SufficientStats {
public:
    SufficientStats(int p, int d)
        : p_(p), d_(d), R_(Eigen::MatrixXd::Zero(p, p)),
          dvec_(Eigen::VectorXd::Zero(p)), U_(Eigen::MatrixXd::Zero(d, p)),
          vvec_(Eigen::VectorXd::Zero(d)), t_(0) {}

    void add(const Eigen::VectorXd& omega,
             const std::vector<std::pair<int, double>>& x, double y) {
        const double a = omega.squaredNorm();
        for (auto [i, xi] : x) {
            for (auto [j, xj] : x) R_(i, j) += a * xi * xj;
            dvec_[i] += a * xi * y;
            U_.col(i) += omega * xi;
        }
        vvec_ += omega * y;
        ++t_;
    }

    void merge(const SufficientStats& other) {
        R_ += other.R_;
        dvec_ += other.dvec_;
        U_ += other.U_;
        vvec_ += other.vvec_;
        t_ += other.t_;
    }

    int p() const { return p_; }
    int d() const { return d_; }
    long t() const { return t_; }
    const Eigen::MatrixXd& R() const { return R_; }
    const Eigen::VectorXd& dvec() const { return dvec_; }
    const Eigen::MatrixXd& U() const { return U_; }
    const Eigen::VectorXd& vvec() const { return vvec_; }

private:
    int p_, d_;
    Eigen::MatrixXd R_;
    Eigen::VectorXd dvec_;
    Eigen::MatrixXd U_;
    Eigen::VectorXd vvec_;
    long t_;
};

// Scale-relative ridge default; any lambda > 0 keeps the system well posed.
// The p/t term strengthens the shrinkage when the design is underdetermined
// (large bases on small folds); it vanishes as the sample grows.
inline double default_surrogate_lambda(const SufficientStats& stats) {
    const double rel =
        1e-8 + 0.05 * stats.p() / static_cast<double>(std::max<long>(stats.t(), 1));
    return rel * stats.R().trace() / stats.p() + 1e-12;
}

namespace detail {

inline bool poor_conditioning(const Eigen::VectorXd& diag) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int i = 0; i < diag.size(); ++i) {
        const double a = std::abs(diag[i]);
        lo = std::min(lo, a);
        hi = std::max(hi, a);
    }
    return lo <= 0.0 || hi / lo > 1e12;
}

}  // namespace detail

// Solve the profiled system beta = (R - U^T U/t + lambda I)^{-1} (d - U^T v/t).
// The sp basis never mixes features of different coalition sizes, so R + lambda I
// is block-diagonal with n x n blocks; the rank-d correction -U^T U/t is then
// folded in by the Woodbury identity instead of a dense p x p factorization.
// An optional center changes the penalty to lambda |beta - center|^2, so heavy
// shrinkage degrades toward the centering model instead of toward zero.
inline SurrogateModel fit_profiled(const SufficientStats& stats,
                                   const FeatureBasis& basis, double lambda,
                                   const Eigen::VectorXd* center = nullptr) {
    if (stats.t() < 1)
        throw std::invalid_argument("fit_profiled: no observations");
    if (!(lambda > 0.0))
        throw std::invalid_argument("fit_profiled: lambda must be positive");
    const int p = stats.p();
    const int d = stats.d();
    const double t = static_cast<double>(stats.t());
    Eigen::VectorXd rhs = stats.dvec() - stats.U().transpose() * stats.vvec() / t;
    if (center)
        rhs -= stats.R() * *center -
               stats.U().transpose() * (stats.U() * *center) / t;

    SurrogateModel model{basis, Eigen::VectorXd::Zero(p),
                         Eigen::VectorXd::Zero(d), false};

    if (basis.kind() == BasisKind::SP) {
        const int n = basis.n();
        const int blocks = n - 1;
        Eigen::VectorXd Prhs(p);
        Eigen::MatrixXd UP(d, p);
        for (int b = 0; b < blocks; ++b) {
            Eigen::MatrixXd Ab = stats.R().block(b * n, b * n, n, n);
            Ab.diagonal().array() += lambda;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(Ab);
            Prhs.segment(b * n, n) = ldlt.solve(rhs.segment(b * n, n));
            UP.middleCols(b * n, n) =
                ldlt.solve(stats.U().middleCols(b * n, n).transpose()).transpose();
        }
        Eigen::MatrixXd S = -UP * stats.U().transpose();
        S.diagonal().array() += t;
        Eigen::LDLT<Eigen::MatrixXd> sol(S);
        model.beta = Prhs + UP.transpose() * sol.solve(stats.U() * Prhs);
        model.condition_warning = detail::poor_conditioning(sol.vectorD());
    } else {
        Eigen::MatrixXd M = stats.R() - stats.U().transpose() * stats.U() / t;
        M.diagonal().array() += lambda;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
        model.beta = ldlt.solve(rhs);
        model.condition_warning = detail::poor_conditioning(ldlt.vectorD());
    }
    if (center) model.beta += *center;
    model.mu = (stats.vvec() - stats.U() * model.beta) / t;
    return model;
}

// Unweighted approximation-loss fit: beta = (R + lambda I)^{-1} d with unit
// weights and no centering. Pass omega = [1] when accumulating.
inline SurrogateModel fit_unweighted(const SufficientStats& stats,
                                     const FeatureBasis& basis, double lambda) {
    if (stats.t() < 1)
        throw std::invalid_argument("fit_unweighted: no observations");
    Eigen::MatrixXd M = stats.R();
    M.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    SurrogateModel model{basis, ldlt.solve(stats.dvec()),
                         Eigen::VectorXd::Zero(stats.d()),
                         detail::poor_conditioning(ldlt.vectorD())};
    return model;
}

// n x p matrix whose column b is the exact semivalue vector of feature b.
// Every supported basis has a closed form; no utility queries.
inline Eigen::MatrixXd basis_value_matrix(const FeatureBasis& basis,
                                          const SemivalueFamily& family) {
    const int n = basis.n();
    if (family.n() != n)
        throw std::invalid_argument("basis_value_matrix: dimension mismatch");
    Eigen::MatrixXd Phi = Eigen::MatrixXd::Zero(n, basis.dim());

    auto size_feature_value = [&](auto g) {
        // semivalue of the pure size utility v(S) = g(|S|); identical per player
        double acc = 0.0;
        for (int s = 0; s <= n - 1; ++s)
            acc += std::exp(log_choose(n - 1, s)) * family.alpha(s) *
                   (g(s + 1) - g(s));
        return acc;
    };

    switch (basis.kind()) {
        case BasisKind::FO: {
            for (int i = 0; i < n; ++i)
                Phi.col(1 + i) = unanimity_values(family, Coalition(1ULL << i, n));
            const double logv = size_feature_value(
                [](int s) { return std::log1p(static_cast<double>(s)); });
            const double sqv = size_feature_value([n](int s) {
                const double f = static_cast<double>(s) / n;
                return f * f;
            });
            Phi.col(n + 1).setConstant(logv);
            Phi.col(n + 2).setConstant(sqv);
            break;
        }
        case BasisKind::SP: {
            for (int s = 1; s <= n - 1; ++s) {
                const double own = choose(n - 1, s - 1) * family.alpha(s - 1);
                const double other = family.alpha(s - 1) * choose(n - 2, s - 2) -
                                     family.alpha(s) * choose(n - 2, s - 1);
                for (int i = 0; i < n; ++i) {
                    Phi.col((s - 1) * n + i).setConstant(other);
                    Phi(i, (s - 1) * n + i) = own;
                }
            }
            break;
        }
        case BasisKind::Poly2: {
            // column 0 is the intercept feature: identically 1, value 0
            int col = 1;
            for (int i = 0; i < n; ++i, ++col)
                Phi.col(col) = unanimity_values(family, Coalition(1ULL << i, n));
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j, ++col)
                    Phi.col(col) = unanimity_values(
                        family, Coalition((1ULL << i) | (1ULL << j), n));
            break;
        }
        case BasisKind::SizeProfile: {
            const double logv = size_feature_value(
                [](int s) { return std::log1p(static_cast<double>(s)); });
            const double sqv = size_feature_value([n](int s) {
                const double f = static_cast<double>(s) / n;
                return f * f;
            });
            Phi.col(1).setConstant(logv);
            Phi.col(2).setConstant(sqv);
            break;
        }
    }
    return Phi;
}

// tau_A(h) = A^T sum_b beta_b phi(feature_b); exact, no utility queries
inline Eigen::VectorXd tau_vector(const SurrogateModel& model,
                                  const SemivalueFamily& family,
                                  const TargetSpec& targets) {
    const Eigen::MatrixXd Phi = basis_value_matrix(model.basis, family);
    return targets.A.transpose() * (Phi * model.beta);
}

}  // namespace pv
