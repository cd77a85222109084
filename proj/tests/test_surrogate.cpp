#include <catch2/catch_amalgamated.hpp>

#include "pv/game.hpp"
#include "pv/rng.hpp"
#include "pv/surrogate.hpp"

using namespace pv;

namespace {

// draws with generic weights for the shared-linear fits
struct Obs {
    Eigen::VectorXd omega;
    std::vector<std::pair<int, double>> x;
    double y;
};

std::vector<Obs> random_obs(const FeatureBasis& basis, int d, int t,
                            std::uint64_t seed) {
    Rng rng(seed);
    const int n = basis.n();
    std::vector<Obs> obs;
    for (int k = 0; k < t; ++k) {
        std::uint64_t mask = 0;
        // interior coalitions only
        while (mask == 0 || mask == (1ULL << n) - 1)
            mask = rng.next() & ((1ULL << n) - 1);
        Coalition S(mask, n);
        Obs o;
        o.omega = Eigen::VectorXd(d);
        for (int j = 0; j < d; ++j) o.omega[j] = rng.normal();
        o.x = basis.features(S);
        o.y = rng.normal();
        obs.push_back(std::move(o));
    }
    return obs;
}

// profiled objective: sum_t ||omega_t (y_t - x_t'beta) - mu||^2 + lambda |beta|^2
double profiled_loss(const std::vector<Obs>& obs, const Eigen::VectorXd& beta,
                     const Eigen::VectorXd& mu, double lambda) {
    double acc = lambda * beta.squaredNorm();
    for (const auto& o : obs) {
        double fit = 0.0;
        for (auto [i, v] : o.x) fit += beta[i] * v;
        acc += (o.omega * (o.y - fit) - mu).squaredNorm();
    }
    return acc;
}

}  // namespace

TEST_CASE("feature vectors have the documented layout") {
    const int n = 4;
    auto fo = FeatureBasis::make(BasisKind::FO, n);
    CHECK(fo.dim() == n + 3);
    Eigen::VectorXd x = fo.dense_features(Coalition::from_members({0, 2}, n));
    CHECK(x[0] == 1.0);
    CHECK(x[1] == 1.0);
    CHECK(x[2] == 0.0);
    CHECK(x[3] == 1.0);
    CHECK(x[4] == 0.0);
    CHECK(x[5] == Catch::Approx(std::log(3.0)).margin(1e-14));
    CHECK(x[6] == Catch::Approx(0.25).margin(1e-14));

    auto sp = FeatureBasis::make(BasisKind::SP, n);
    CHECK(sp.dim() == n * (n - 1));
    Eigen::VectorXd z = sp.dense_features(Coalition::from_members({0, 2}, n));
    CHECK(z.sum() == 2.0);
    CHECK(z[(2 - 1) * n + 0] == 1.0);
    CHECK(z[(2 - 1) * n + 2] == 1.0);
    CHECK(sp.features(Coalition::empty(n)).empty());
    CHECK(sp.features(Coalition::grand(n)).empty());

    auto p2 = FeatureBasis::make(BasisKind::Poly2, 3);
    CHECK(p2.dim() == 1 + 3 + 3);
    // S = {0,1}: intercept, {0}, {1}, {0,1}
    CHECK(p2.features(Coalition::from_members({0, 1}, 3)).size() == 4);
    CHECK(p2.features(Coalition::empty(3)).size() == 1);

    auto sz = FeatureBasis::make(BasisKind::SizeProfile, n);
    CHECK(sz.dim() == 3);
    CHECK(sz.dense_features(Coalition::empty(n))[0] == 1.0);

    CHECK(FeatureBasis::parse("fo", 5).dim() == 8);
    CHECK_THROWS(FeatureBasis::parse("cubic", 5));
}

TEST_CASE("sufficient statistics are additive") {
    auto basis = FeatureBasis::make(BasisKind::FO, 6);
    auto obs = random_obs(basis, 2, 40, 17);

    SufficientStats all(basis.dim(), 2);
    SufficientStats first(basis.dim(), 2), second(basis.dim(), 2);
    for (int t = 0; t < 40; ++t) {
        all.add(obs[t].omega, obs[t].x, obs[t].y);
        (t < 23 ? first : second).add(obs[t].omega, obs[t].x, obs[t].y);
    }
    first.merge(second);
    CHECK(first.t() == all.t());
    CHECK((first.R() - all.R()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((first.dvec() - all.dvec()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((first.U() - all.U()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((first.vvec() - all.vvec()).cwiseAbs().maxCoeff() < 1e-12);

    SurrogateModel a = fit_profiled(all, basis, 0.1);
    SurrogateModel b = fit_profiled(first, basis, 0.1);
    CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("profiled fit minimizes the joint objective") {
    for (auto kind : {BasisKind::FO, BasisKind::SP, BasisKind::Poly2,
                      BasisKind::SizeProfile}) {
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const int n = 5, d = 2, t = 30;
            auto basis = FeatureBasis::make(kind, n);
            auto obs = random_obs(basis, d, t, 100 * seed);
            const double lambda = 0.05;

            SufficientStats stats(basis.dim(), d);
            for (const auto& o : obs) stats.add(o.omega, o.x, o.y);
            SurrogateModel m = fit_profiled(stats, basis, lambda);

            // direct joint normal equations in (beta, mu)
            const int p = basis.dim();
            Eigen::MatrixXd G = Eigen::MatrixXd::Zero(p + d, p + d);
            Eigen::VectorXd r = Eigen::VectorXd::Zero(p + d);
            for (const auto& o : obs) {
                Eigen::VectorXd xd = Eigen::VectorXd::Zero(p);
                for (auto [i, v] : o.x) xd[i] = v;
                const double a = o.omega.squaredNorm();
                G.topLeftCorner(p, p) += a * xd * xd.transpose();
                G.topRightCorner(p, d) += xd * o.omega.transpose();
                G.bottomLeftCorner(d, p) += o.omega * xd.transpose();
                G.bottomRightCorner(d, d) += Eigen::MatrixXd::Identity(d, d);
                r.head(p) += a * o.y * xd;
                r.tail(d) += o.y * o.omega;
            }
            G.topLeftCorner(p, p).diagonal().array() += lambda;
            Eigen::VectorXd sol = G.ldlt().solve(r);
            CHECK((m.beta - sol.head(p)).cwiseAbs().maxCoeff() < 1e-8);
            CHECK((m.mu - sol.tail(d)).cwiseAbs().maxCoeff() < 1e-8);

            // fitted loss beats the zero surrogate with its optimal centering
            Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(d);
            for (const auto& o : obs) mu0 += o.omega * o.y;
            mu0 /= t;
            CHECK(profiled_loss(obs, m.beta, m.mu, lambda) <=
                  profiled_loss(obs, Eigen::VectorXd::Zero(p), mu0, lambda) +
                      1e-10);
        }
    }
}

TEST_CASE("unweighted fit is plain ridge regression") {
    const int n = 6, t = 50;
    auto basis = FeatureBasis::make(BasisKind::FO, n);
    Rng rng(5);
    SufficientStats stats(basis.dim(), 1);
    Eigen::MatrixXd X(t, basis.dim());
    Eigen::VectorXd y(t);
    const Eigen::VectorXd unit = Eigen::VectorXd::Ones(1);
    for (int k = 0; k < t; ++k) {
        Coalition S(1 + (rng.next() % ((1ULL << n) - 2)), n);
        X.row(k) = basis.dense_features(S).transpose();
        y[k] = rng.normal();
        stats.add(unit, basis.features(S), y[k]);
    }
    const double lambda = 0.3;
    SurrogateModel m = fit_unweighted(stats, basis, lambda);
    Eigen::MatrixXd M = X.transpose() * X;
    M.diagonal().array() += lambda;
    Eigen::VectorXd ref = M.ldlt().solve(X.transpose() * y);
    CHECK((m.beta - ref).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("basis value matrix agrees with brute force") {
    const int n = 6;
    for (const auto& f : {SemivalueFamily::shapley(n),
                          SemivalueFamily::beta_shapley(n, 4, 1),
                          SemivalueFamily::weighted_banzhaf(n, 0.25)}) {
        for (auto kind : {BasisKind::FO, BasisKind::SP, BasisKind::Poly2,
                          BasisKind::SizeProfile}) {
            auto basis = FeatureBasis::make(kind, n);
            Eigen::MatrixXd Phi = basis_value_matrix(basis, f);
            for (int b = 0; b < basis.dim(); ++b) {
                Utility feat = [&](const Coalition& S) {
                    double v = 0.0;
                    for (auto [i, val] : basis.features(S))
                        if (i == b) v += val;
                    return v;
                };
                Eigen::VectorXd ref = brute_force_values(feat, f, n);
                CHECK((Phi.col(b) - ref).cwiseAbs().maxCoeff() < 1e-10);
            }
        }
    }
}

TEST_CASE("shapley value of pure size features telescopes") {
    // for Shapley, a utility v(S) = g(|S|) has value (g(n) - g(0))/n per player
    const int n = 9;
    auto f = SemivalueFamily::shapley(n);
    auto fo = FeatureBasis::make(BasisKind::FO, n);
    Eigen::MatrixXd Phi = basis_value_matrix(fo, f);
    CHECK(Phi(0, n + 1) ==
          Catch::Approx(std::log1p(static_cast<double>(n)) / n).margin(1e-12));
    CHECK(Phi(0, n + 2) == Catch::Approx(1.0 / n).margin(1e-12));
    CHECK(Phi.col(0).cwiseAbs().maxCoeff() == 0.0);  // intercept has value 0
}

TEST_CASE("tau readout is linear and query free") {
    const int n = 7;
    auto f = SemivalueFamily::beta_shapley(n, 2, 3);
    auto basis = FeatureBasis::make(BasisKind::FO, n);
    Rng rng(9);
    SurrogateModel m = SurrogateModel::zero(basis, n);
    for (int i = 0; i < basis.dim(); ++i) m.beta[i] = rng.normal();

    Utility h = [&](const Coalition& S) { return m(S); };
    Eigen::VectorXd ref = brute_force_values(h, f, n);
    Eigen::VectorXd tau = tau_vector(m, f, TargetSpec::identity(n));
    CHECK((tau - ref).cwiseAbs().maxCoeff() < 1e-10);

    // single-column readout a'phi
    Eigen::MatrixXd A(n, 1);
    for (int i = 0; i < n; ++i) A(i, 0) = i + 0.5;
    TargetSpec targets;
    targets.A = A;
    CHECK(tau_vector(m, f, targets)[0] ==
          Catch::Approx(A.col(0).dot(ref)).margin(1e-10));
}

TEST_CASE("sp block solve matches the dense profiled solve") {
    const int n = 6, d = 3, t = 80;
    auto sp = FeatureBasis::make(BasisKind::SP, n);
    auto obs = random_obs(sp, d, t, 31);
    SufficientStats stats(sp.dim(), d);
    for (const auto& o : obs) stats.add(o.omega, o.x, o.y);
    const double lambda = 0.2;
    SurrogateModel fast = fit_profiled(stats, sp, lambda);

    Eigen::MatrixXd M =
        stats.R() - stats.U().transpose() * stats.U() / static_cast<double>(t);
    M.diagonal().array() += lambda;
    Eigen::VectorXd rhs = stats.dvec() - stats.U().transpose() * stats.vvec() /
                                             static_cast<double>(t);
    Eigen::VectorXd ref = M.ldlt().solve(rhs);
    CHECK((fast.beta - ref).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fit guards and defaults") {
    auto basis = FeatureBasis::make(BasisKind::FO, 5);
    SufficientStats empty(basis.dim(), 2);
    CHECK_THROWS(fit_profiled(empty, basis, 0.1));
    CHECK_THROWS(fit_unweighted(empty, basis, 0.1));

    auto obs = random_obs(basis, 2, 4, 3);
    SufficientStats s(basis.dim(), 2);
    for (const auto& o : obs) s.add(o.omega, o.x, o.y);
    CHECK_THROWS(fit_profiled(s, basis, 0.0));
    CHECK(default_surrogate_lambda(s) > 0.0);
    CHECK(default_surrogate_lambda(empty) > 0.0);

    // a rank-deficient system with negligible ridge flags its conditioning
    SurrogateModel weak = fit_unweighted(s, basis, 1e-18);
    CHECK(weak.condition_warning);
}
