#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pv/coalition.hpp"
#include "pv/combinatorics.hpp"

namespace pv {

enum class FamilyKind { Shapley, BetaShapley, WeightedBanzhaf };

// Size-dependent semivalue: phi_i(u) = sum_{S not containing i}
// alpha_{|S|} {u(S+i) - u(S)}, with sum_s C(n-1,s) alpha_s = 1.
class SemivalueFamily {
public:
    static SemivalueFamily shapley(int n) {
        SemivalueFamily f(FamilyKind::Shapley, n, 0.0, 0.0);
        for (int s = 0; s < n; ++s)
            f.alphas_[s] = std::exp(-std::log(static_cast<double>(n)) -
                                    log_choose(n - 1, s));
        f.normalize();
        return f;
    }

    // alpha_s proportional to Beta(b+s, a+n-1-s); (1,1) recovers Shapley
    static SemivalueFamily beta_shapley(int n, double a, double b) {
        if (a <= 0.0 || b <= 0.0)
            throw std::invalid_argument("beta_shapley: parameters must be positive");
        SemivalueFamily f(FamilyKind::BetaShapley, n, a, b);
        for (int s = 0; s < n; ++s)
            f.alphas_[s] = std::exp(log_beta(b + s, a + n - 1 - s));
        f.normalize();
        return f;
    }

    static SemivalueFamily weighted_banzhaf(int n, double p) {
        if (!(p > 0.0 && p < 1.0))
            throw std::invalid_argument("weighted_banzhaf: p must be in (0,1)");
        SemivalueFamily f(FamilyKind::WeightedBanzhaf, n, p, 0.0);
        for (int s = 0; s < n; ++s)
            f.alphas_[s] = std::exp(s * std::log(p) +
                                    (n - 1 - s) * std::log1p(-p));
        f.normalize();
        return f;
    }

    // config-string form: "shapley", "beta:4,1", "banzhaf:0.25"
    static SemivalueFamily parse(const std::string& name, int n) {
        if (name == "shapley") return shapley(n);
        auto colon = name.find(':');
        if (colon != std::string::npos) {
            std::string head = name.substr(0, colon);
            std::string args = name.substr(colon + 1);
            if (head == "beta") {
                auto comma = args.find(',');
                if (comma == std::string::npos)
                    throw std::invalid_argument("family: beta needs two parameters");
                double a = std::stod(args.substr(0, comma));
                double b = std::stod(args.substr(comma + 1));
                return beta_shapley(n, a, b);
            }
            if (head == "banzhaf") return weighted_banzhaf(n, std::stod(args));
        }
        throw std::invalid_argument("unknown family: " + name);
    }

    FamilyKind kind() const { return kind_; }
    int n() const { return n_; }
    double alpha(int s) const { return alphas_[s]; }
    const std::vector<double>& alphas() const { return alphas_; }

    double normalization() const {
        double acc = 0.0;
        for (int s = 0; s < n_; ++s)
            acc += std::exp(log_choose(n_ - 1, s)) * alphas_[s];
        return acc;
    }

    // rho_i(S) = alpha_{|S|-1} if i in S, -alpha_{|S|} otherwise
    double rho(int i, const Coalition& S) const {
        const int s = S.size();
        if (S.contains(i)) return alphas_[s - 1];
        return s <= n_ - 1 ? -alphas_[s] : 0.0;
    }

    // alpha_s == alpha_{n-1-s}: rho flips sign under complementation
    bool sign_symmetric(double tol = 1e-9) const {
        for (int s = 0; s < n_; ++s) {
            double a = alphas_[s], b = alphas_[n_ - 1 - s];
            if (std::abs(a - b) > tol * std::max(1.0, std::abs(a))) return false;
        }
        return true;
    }

    std::string name() const {
        switch (kind_) {
            case FamilyKind::Shapley: return "shapley";
            case FamilyKind::BetaShapley:
                return "beta:" + trim_num(p1_) + "," + trim_num(p2_);
            case FamilyKind::WeightedBanzhaf: return "banzhaf:" + trim_num(p1_);
        }
        return "?";
    }

private:
    SemivalueFamily(FamilyKind k, int n, double p1, double p2)
        : kind_(k), n_(n), p1_(p1), p2_(p2), alphas_(n, 0.0) {
        if (n < 1) throw std::invalid_argument("family: n must be >= 1");
    }

    void normalize() {
        const double c = normalization();
        for (auto& a : alphas_) a /= c;
    }

    static double log_beta(double x, double y) {
        return std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y);
    }

    static std::string trim_num(double v) {
        std::string s = std::to_string(v);
        s.erase(s.find_last_not_of('0') + 1);
        if (!s.empty() && s.back() == '.') s.pop_back();
        return s;
    }

    FamilyKind kind_;
    int n_;
    double p1_, p2_;
    std::vector<double> alphas_;
};

// Columns of A are readout vectors a_j; tau_j(u) = a_j . phi(u).
struct TargetSpec {
    Eigen::MatrixXd A;  // n x d

    static TargetSpec identity(int n) {
        TargetSpec t;
        t.A = Eigen::MatrixXd::Identity(n, n);
        return t;
    }
    static TargetSpec single(const Eigen::VectorXd& a) {
        TargetSpec t;
        t.A = a;
        return t;
    }

    int n() const { return static_cast<int>(A.rows()); }
    int d() const { return static_cast<int>(A.cols()); }
    Eigen::VectorXd column_sums() const { return A.colwise().sum(); }
};

// rho_A(S): component j is sum_i A(i,j) rho_i(S)
inline Eigen::VectorXd rho_vector(const SemivalueFamily& family,
                                  const TargetSpec& targets,
                                  const Coalition& S) {
    const int n = family.n();
    const int s = S.size();
    Eigen::VectorXd in_sum = Eigen::VectorXd::Zero(targets.d());
    for (int i = 0; i < n; ++i)
        if (S.contains(i)) in_sum += targets.A.row(i).transpose();
    const Eigen::VectorXd total = targets.column_sums();
    const double a_in = s >= 1 ? family.alpha(s - 1) : 0.0;
    const double a_out = s <= n - 1 ? family.alpha(s) : 0.0;
    return a_in * in_sum - a_out * (total - in_sum);
}

// Exact semivalue vector of the unanimity game 1(T subseteq S):
// phi_i = 1(i in T) sum_{s=|T|-1}^{n-1} C(n-|T|, s-|T|+1) alpha_s.
inline Eigen::VectorXd unanimity_values(const SemivalueFamily& family,
                                        const Coalition& T) {
    if (T.mask == 0)
        throw std::invalid_argument("unanimity_values: T must be nonempty");
    const int n = family.n();
    const int k = T.size();
    double v = 0.0;
    for (int s = k - 1; s <= n - 1; ++s)
        v += std::exp(log_choose(n - k, s - k + 1)) * family.alpha(s);
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i)
        if (T.contains(i)) phi[i] = v;
    return phi;
}

}  // namespace pv
