#include <catch2/catch_amalgamated.hpp>

#include "pv/family.hpp"
#include "pv/game.hpp"

using namespace pv;

TEST_CASE("normalization holds for every family and n") {
    for (int n : {2, 3, 5, 8, 13, 21, 34, 55, 64}) {
        for (const auto& f :
             {SemivalueFamily::shapley(n), SemivalueFamily::beta_shapley(n, 4, 1),
              SemivalueFamily::weighted_banzhaf(n, 0.25),
              SemivalueFamily::weighted_banzhaf(n, 0.5)}) {
            CHECK(f.normalization() == Catch::Approx(1.0).margin(1e-12));
            for (int s = 0; s < n; ++s) CHECK(f.alpha(s) >= 0.0);
        }
    }
}

TEST_CASE("shapley weights at n=3") {
    auto f = SemivalueFamily::shapley(3);
    CHECK(f.alpha(0) == Catch::Approx(1.0 / 3).margin(1e-14));
    CHECK(f.alpha(1) == Catch::Approx(1.0 / 6).margin(1e-14));
    CHECK(f.alpha(2) == Catch::Approx(1.0 / 3).margin(1e-14));
}

TEST_CASE("banzhaf(0.5) weights are flat") {
    auto f = SemivalueFamily::weighted_banzhaf(5, 0.5);
    for (int s = 0; s < 5; ++s)
        CHECK(f.alpha(s) == Catch::Approx(1.0 / 16).margin(1e-14));
}

TEST_CASE("beta(1,1) recovers shapley") {
    for (int n : {2, 5, 12}) {
        auto b = SemivalueFamily::beta_shapley(n, 1, 1);
        auto s = SemivalueFamily::shapley(n);
        for (int k = 0; k < n; ++k)
            CHECK(b.alpha(k) == Catch::Approx(s.alpha(k)).margin(1e-12));
    }
}

TEST_CASE("parameter validation") {
    CHECK_THROWS(SemivalueFamily::beta_shapley(4, 0.0, 1.0));
    CHECK_THROWS(SemivalueFamily::beta_shapley(4, 1.0, -2.0));
    CHECK_THROWS(SemivalueFamily::weighted_banzhaf(4, 0.0));
    CHECK_THROWS(SemivalueFamily::weighted_banzhaf(4, 1.0));
    CHECK_THROWS(SemivalueFamily::parse("nope", 4));
}

TEST_CASE("parse config strings") {
    CHECK(SemivalueFamily::parse("shapley", 5).kind() == FamilyKind::Shapley);
    auto b = SemivalueFamily::parse("beta:4,1", 5);
    auto b2 = SemivalueFamily::beta_shapley(5, 4, 1);
    for (int s = 0; s < 5; ++s)
        CHECK(b.alpha(s) == Catch::Approx(b2.alpha(s)).margin(1e-14));
    auto w = SemivalueFamily::parse("banzhaf:0.25", 5);
    auto w2 = SemivalueFamily::weighted_banzhaf(5, 0.25);
    for (int s = 0; s < 5; ++s)
        CHECK(w.alpha(s) == Catch::Approx(w2.alpha(s)).margin(1e-14));
}

TEST_CASE("rho sign convention at n=3") {
    auto f = SemivalueFamily::shapley(3);
    // player 0, S = {1}
    CHECK(f.rho(0, Coalition::from_members({1}, 3)) ==
          Catch::Approx(-1.0 / 6).margin(1e-14));
    // player 0, S = {0}
    CHECK(f.rho(0, Coalition::from_members({0}, 3)) ==
          Catch::Approx(1.0 / 3).margin(1e-14));
}

TEST_CASE("rho identity: sum over all coalitions recovers the value") {
    const int n = 7;
    SOUGame g = sou_generate(n, 0.4, 1.0, 17);
    for (const auto& f :
         {SemivalueFamily::shapley(n), SemivalueFamily::beta_shapley(n, 4, 1),
          SemivalueFamily::weighted_banzhaf(n, 0.25)}) {
        Eigen::VectorXd phi = brute_force_values(g.oracle(), f, n);
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::uint64_t m = 0; m < (1ULL << n); ++m) {
                Coalition S(m, n);
                acc += f.rho(i, S) * g.evaluate(S);
            }
            CHECK(acc == Catch::Approx(phi[i]).margin(1e-10));
        }
    }
}

TEST_CASE("unanimity closed form") {
    auto s5 = SemivalueFamily::shapley(5);
    Eigen::VectorXd phi = unanimity_values(s5, Coalition::from_members({0, 1}, 5));
    CHECK(phi[0] == Catch::Approx(0.5).margin(1e-12));
    CHECK(phi[1] == Catch::Approx(0.5).margin(1e-12));
    CHECK(phi[2] == 0.0);

    for (double p : {0.25, 0.5}) {
        auto f = SemivalueFamily::weighted_banzhaf(6, p);
        for (int k = 1; k <= 4; ++k) {
            std::vector<int> members;
            for (int i = 0; i < k; ++i) members.push_back(i);
            Coalition T = Coalition::from_members(members, 6);
            Eigen::VectorXd v = unanimity_values(f, T);
            CHECK(v[0] == Catch::Approx(std::pow(p, k - 1)).margin(1e-10));
        }
    }

    // |T| = 1 gives the standard basis vector for any normalized family
    auto b = SemivalueFamily::beta_shapley(6, 4, 1);
    Eigen::VectorXd e2 = unanimity_values(b, Coalition::from_members({2}, 6));
    for (int i = 0; i < 6; ++i)
        CHECK(e2[i] == Catch::Approx(i == 2 ? 1.0 : 0.0).margin(1e-12));

    CHECK_THROWS(unanimity_values(b, Coalition::empty(6)));
}

TEST_CASE("unanimity matches brute force") {
    for (int n : {4, 5}) {
        auto f = SemivalueFamily::shapley(n);
        Coalition T = Coalition::from_members({0, 1}, n);
        Utility u = [&](const Coalition& S) {
            return T.subset_of(S) ? 1.0 : 0.0;
        };
        Eigen::VectorXd bf = brute_force_values(u, f, n);
        Eigen::VectorXd cf = unanimity_values(f, T);
        CHECK((bf - cf).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("sign symmetry") {
    const int n = 9;
    CHECK(SemivalueFamily::shapley(n).sign_symmetric());
    CHECK(SemivalueFamily::beta_shapley(n, 3, 3).sign_symmetric());
    CHECK(SemivalueFamily::weighted_banzhaf(n, 0.5).sign_symmetric());
    CHECK(!SemivalueFamily::weighted_banzhaf(n, 0.25).sign_symmetric());
    CHECK(!SemivalueFamily::beta_shapley(n, 4, 1).sign_symmetric());

    // rho flips sign under complementation for sign-symmetric families
    auto f = SemivalueFamily::weighted_banzhaf(6, 0.5);
    for (std::uint64_t m = 0; m < (1ULL << 6); ++m) {
        Coalition S(m, 6);
        for (int i = 0; i < 6; ++i)
            CHECK(f.rho(i, S.complement()) ==
                  Catch::Approx(-f.rho(i, S)).margin(1e-12));
    }
}

TEST_CASE("rho_vector linearity") {
    const int n = 6;
    auto f = SemivalueFamily::shapley(n);
    Coalition S = Coalition::from_members({1, 4}, n);

    auto id = TargetSpec::identity(n);
    Eigen::VectorXd r = rho_vector(f, id, S);
    for (int j = 0; j < n; ++j)
        CHECK(r[j] == Catch::Approx(f.rho(j, S)).margin(1e-14));

    // group indicator target
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    a[0] = a[1] = 1.0;
    Eigen::VectorXd rg = rho_vector(f, TargetSpec::single(a), S);
    CHECK(rg[0] == Catch::Approx(f.rho(0, S) + f.rho(1, S)).margin(1e-14));

    // all-ones target: |S| alpha_{s-1} - (n-|S|) alpha_s
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd r1 = rho_vector(f, TargetSpec::single(ones), S);
    const int s = S.size();
    CHECK(r1[0] ==
          Catch::Approx(s * f.alpha(s - 1) - (n - s) * f.alpha(s)).margin(1e-14));
}

TEST_CASE("family names round trip") {
    CHECK(SemivalueFamily::shapley(4).name() == "shapley");
    auto b = SemivalueFamily::parse(SemivalueFamily::weighted_banzhaf(4, 0.25).name(), 4);
    CHECK(b.alpha(1) ==
          Catch::Approx(SemivalueFamily::weighted_banzhaf(4, 0.25).alpha(1))
              .margin(1e-12));
}
