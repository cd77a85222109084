#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "pv/bench.hpp"

using namespace pv;

namespace {

BenchConfig small_config() {
    BenchConfig cfg;
    cfg.n = 8;
    cfg.etas = {0.4};
    cfg.families = {"shapley"};
    cfg.methods = {"ht"};
    cfg.budgets = {50, 100};
    cfg.runs = 1;
    cfg.seed = 3;
    return cfg;
}

std::string curves_text(const BenchResult& res) {
    std::ostringstream os;
    write_curves_csv(res, os);
    return os.str();
}

}  // namespace

TEST_CASE("config parsing and validation") {
    nlohmann::json j{{"n", 12},
                     {"methods", {"ht", "ease-fo"}},
                     {"budgets", {10, 20, 30}},
                     {"runs", 4},
                     {"seed", 9}};
    BenchConfig cfg = BenchConfig::from_json(j);
    CHECK(cfg.n == 12);
    CHECK(cfg.methods.size() == 2);
    CHECK(cfg.runs == 4);

    // defaults: 100 budgets from 50 to 5000
    BenchConfig defaults = BenchConfig::from_json(nlohmann::json::object());
    CHECK(defaults.budgets.size() == 100);
    CHECK(defaults.budgets.front() == 50);
    CHECK(defaults.budgets.back() == 5000);

    CHECK_THROWS(BenchConfig::from_json(nlohmann::json{{"runs", 0}}));
    CHECK_THROWS(BenchConfig::from_json(nlohmann::json{{"budgets", {20, 10}}}));
    CHECK_THROWS(BenchConfig::from_json(nlohmann::json{{"methods", {"magic"}}}));
}

TEST_CASE("row accounting") {
    BenchConfig cfg = small_config();
    BenchResult res = run_bench(cfg);
    // 1 method x 1 family x 1 eta x 1 run x 2 budgets -> 2 curve rows, 1 aucc
    REQUIRE(res.curves.size() == 2);
    REQUIRE(res.auccs.size() == 1);
    CHECK(res.curves[0].budget == 50);
    CHECK(res.curves[1].budget == 100);
    CHECK(res.auccs[0].aucc ==
          Catch::Approx((res.curves[0].rel_sq_error +
                         res.curves[1].rel_sq_error) /
                        2.0)
              .margin(1e-15));
}

TEST_CASE("identical config gives byte-identical csv output") {
    BenchConfig cfg = small_config();
    cfg.methods = {"ht", "ease-fo", "edge-lift"};
    cfg.runs = 2;
    BenchResult a = run_bench(cfg);
    BenchResult b = run_bench(cfg);
    CHECK(curves_text(a) == curves_text(b));

    std::ostringstream sa, sb;
    write_aucc_csv(a, sa);
    write_aucc_csv(b, sb);
    CHECK(sa.str() == sb.str());

    std::ostringstream ma, mb;
    write_summary_csv(a, ma);
    write_summary_csv(b, mb);
    CHECK(ma.str() == mb.str());

    // thread count must not change the emitted rows
    BenchConfig threaded = cfg;
    threaded.threads = 4;
    CHECK(curves_text(run_bench(threaded)) == curves_text(a));
}

TEST_CASE("a method subset reproduces its rows exactly") {
    BenchConfig full = small_config();
    full.methods = {"ht", "hajek-ofa", "ease-fo"};
    BenchResult all = run_bench(full);

    BenchConfig only = full;
    only.methods = {"ease-fo"};
    BenchResult sub = run_bench(only);

    std::vector<CurveRow> expect;
    for (const auto& r : all.curves)
        if (r.method == "ease-fo") expect.push_back(r);
    REQUIRE(sub.curves.size() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) {
        CHECK(sub.curves[i].seed == expect[i].seed);
        CHECK(sub.curves[i].rel_sq_error == expect[i].rel_sq_error);
    }
}

TEST_CASE("unknown method is rejected before sampling") {
    BenchConfig cfg = small_config();
    cfg.methods = {"ht", "wizard"};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("all named methods run end to end") {
    BenchConfig cfg = small_config();
    cfg.methods = {"ht",           "hajek-ofa",       "hajek-svarm",
                   "kernelshap",   "leverageshap",    "aipw-unweighted",
                   "ease-fo",      "ease-sp",         "pair-ease",
                   "edge-lift"};
    cfg.budgets = {200};
    BenchResult res = run_bench(cfg);
    CHECK(res.curves.size() == cfg.methods.size());
    for (const auto& r : res.curves) CHECK(std::isfinite(r.rel_sq_error));
}

TEST_CASE("wls presets reject non-shapley families before sampling") {
    BenchConfig cfg = small_config();
    cfg.methods = {"kernelshap"};
    cfg.families = {"banzhaf:0.5"};
    CHECK_THROWS(run_bench(cfg));
}

TEST_CASE("exact tables match brute force") {
    BenchConfig cfg = small_config();
    cfg.n = 10;
    cfg.etas = {0.3, 0.6};
    cfg.families = {"shapley", "beta:4,1"};
    nlohmann::json out = run_exact(cfg);
    REQUIRE(out.size() == 2);
    for (std::size_t e = 0; e < out.size(); ++e) {
        const double eta = out[e].at("eta").get<double>();
        const SOUGame game =
            sou_generate(cfg.n, eta, cfg.sigma2, game_seed(cfg.seed, eta));
        for (const auto& fam_name : cfg.families) {
            const auto fam = SemivalueFamily::parse(fam_name, cfg.n);
            const Eigen::VectorXd ref = brute_force_values(game.oracle(), fam, cfg.n);
            const auto vals =
                out[e].at("values").at(fam_name).get<std::vector<double>>();
            REQUIRE(static_cast<int>(vals.size()) == cfg.n);
            for (int i = 0; i < cfg.n; ++i)
                CHECK(vals[i] == Catch::Approx(ref[i]).margin(1e-10));
        }
    }
}

TEST_CASE("csv headers and escaping") {
    BenchResult res;
    res.curves.push_back({"a,b", "fam\"x", 4, 0.5, 7, 50, 0.25});
    res.auccs.push_back({"a,b", "fam\"x", 0.5, 7, 0.25});
    std::ostringstream os;
    write_curves_csv(res, os);
    const std::string text = os.str();
    CHECK(text.rfind("method,family,n,eta,seed,budget,rel_sq_error\n", 0) == 0);
    CHECK(text.find("\"a,b\"") != std::string::npos);
    CHECK(text.find("\"fam\"\"x\"") != std::string::npos);

    std::ostringstream ms;
    write_summary_csv(res, ms);
    CHECK(ms.str().rfind("method,family,eta,runs,mean_aucc,sd_aucc\n", 0) == 0);
}
