#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "pv/diagnostics.hpp"
#include "pv/estimators.hpp"
#include "pv/family.hpp"
#include "pv/game.hpp"
#include "pv/sampling.hpp"

namespace pv {

struct BenchConfig {
    int n = 40;
    std::vector<double> etas{0.25};
    double sigma2 = 1.0;
    std::vector<std::string> families{"shapley"};
    std::vector<std::string> methods{"ht"};
    std::vector<std::uint64_t> budgets;  // default 50,100,...,5000
    int runs = 10;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    int threads = 1;
    // single-run (estimate subcommand) selectors
    std::string method = "ht";
    std::string family = "shapley";
    double eta = 0.25;
    std::uint64_t budget = 1000;

    static std::vector<std::uint64_t> default_budgets() {
        std::vector<std::uint64_t> b;
        for (std::uint64_t v = 50; v <= 5000; v += 50) b.push_back(v);
        return b;
    }

    static BenchConfig from_json(const nlohmann::json& j) {
        BenchConfig c;
        if (j.contains("n")) c.n = j.at("n").get<int>();
        if (j.contains("etas")) c.etas = j.at("etas").get<std::vector<double>>();
        if (j.contains("sigma2")) c.sigma2 = j.at("sigma2").get<double>();
        if (j.contains("families"))
            c.families = j.at("families").get<std::vector<std::string>>();
        if (j.contains("methods"))
            c.methods = j.at("methods").get<std::vector<std::string>>();
        if (j.contains("budgets"))
            c.budgets = j.at("budgets").get<std::vector<std::uint64_t>>();
        if (j.contains("runs")) c.runs = j.at("runs").get<int>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
        if (j.contains("threads")) c.threads = j.at("threads").get<int>();
        if (j.contains("method")) c.method = j.at("method").get<std::string>();
        if (j.contains("family")) c.family = j.at("family").get<std::string>();
        if (j.contains("eta")) c.eta = j.at("eta").get<double>();
        if (j.contains("budget")) c.budget = j.at("budget").get<std::uint64_t>();
        if (c.budgets.empty()) c.budgets = default_budgets();
        c.validate();
        return c;
    }

    void validate() const {
        if (runs < 1) throw std::invalid_argument("config: runs must be >= 1");
        for (std::size_t i = 1; i < budgets.size(); ++i)
            if (budgets[i] <= budgets[i - 1])
                throw std::invalid_argument("config: budgets must be ascending");
        for (const auto& m : methods) method_known(m);
        method_known(method);
    }

    static void method_known(const std::string& m) {
        static const std::vector<std::string> known{
            "ht",          "hajek-ofa",   "hajek-svarm", "kernelshap",
            "leverageshap", "aipw-unweighted", "ease-fo", "ease-sp",
            "pair-ease",   "edge-lift"};
        if (std::find(known.begin(), known.end(), m) == known.end())
            throw std::invalid_argument("unknown method: " + m);
    }
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// stable per-work-item seed; independent of which other items run
inline std::uint64_t item_seed(std::uint64_t master, const std::string& key) {
    std::uint64_t s = master ^ fnv1a(key);
    return splitmix64(s);
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

}  // namespace detail

// One fixed game per (n, eta); the game seed depends only on the master seed
// and eta, so runs (and partial method reruns) share coefficients.
inline std::uint64_t game_seed(std::uint64_t master, double eta) {
    return detail::item_seed(master, "game|" + detail::fmt_double(eta));
}

// Dispatch a named benchmark method at a total query budget.
inline EstimateReport run_method(const std::string& method, const Utility& u,
                                 const SemivalueFamily& family,
                                 std::uint64_t budget, std::uint64_t seed) {
    const int n = family.n();
    const TargetSpec targets = TargetSpec::identity(n);
    Rng rng(seed);
    if (budget < 8)
        throw std::invalid_argument("run_method: budget too small");
    const long m = static_cast<long>(budget) - 2;

    EstimateReport rep;
    if (method == "ht") {
        rep = ht_estimate(u, family, targets, named_law(NamedLaw::KernelSHAP, n),
                          m, rng);
    } else if (method == "hajek-ofa") {
        rep = hajek_estimate(u, family, targets, named_law(NamedLaw::OFA, n),
                             HajekCells::SizeMembership, m, rng);
        rep.method = "hajek-ofa";
    } else if (method == "hajek-svarm") {
        rep = hajek_estimate(u, family, targets, named_law(NamedLaw::SVARM, n),
                             HajekCells::SizeMembership, m, rng);
        rep.method = "hajek-svarm";
    } else if (method == "kernelshap" || method == "leverageshap") {
        if (family.kind() != FamilyKind::Shapley)
            throw std::invalid_argument(method + " targets the Shapley value only");
        const auto law = named_law(method == "kernelshap" ? NamedLaw::KernelSHAP
                                                          : NamedLaw::LeverageSHAP,
                                   n);
        const double lambda = 1e-6 * (n - 1.0) / n * static_cast<double>(m);
        rep = wls_ridge_estimate(u, WLSSpec::shapley(n), law, m, lambda, rng);
        rep.method = method;
    } else if (method == "aipw-unweighted") {
        rep = aipw_estimate(u, family, targets, named_law(NamedLaw::UniformSize, n),
                            FeatureBasis::make(BasisKind::FO, n), m, 2, rng, 0.0,
                            true);
    } else if (method == "ease-fo" || method == "ease-sp") {
        EstimatorConfig cfg;
        cfg.budget = budget;
        cfg.basis = method == "ease-fo" ? "fo" : "sp";
        cfg.seed = seed;
        rep = ease_estimate(u, family, targets, cfg, rng);
    } else if (method == "pair-ease") {
        EstimatorConfig cfg;
        cfg.budget = budget;
        cfg.basis = "fo";
        cfg.seed = seed;
        rep = pair_ease_estimate(u, family, targets, cfg, rng);
    } else if (method == "edge-lift") {
        // at least one draw per player even when the budget is below 2n;
        // the report carries the true query count
        const long per_player =
            std::max<long>(1, static_cast<long>(budget) / (2 * n));
        Eigen::VectorXd est(n);
        for (int i = 0; i < n; ++i) {
            const EdgeLaw law = EdgeLaw::alpha_proportional(family, i);
            est[i] = edge_lift_estimate(u, family, law, per_player, rng);
        }
        rep.estimates = est;
        rep.queries = 2ULL * static_cast<std::uint64_t>(per_player) * n;
        rep.method = "edge-lift";
    } else {
        throw std::invalid_argument("unknown method: " + method);
    }
    rep.seed = seed;
    return rep;
}

struct CurveRow {
    std::string method, family;
    int n;
    double eta;
    std::uint64_t seed;   // per-run stream seed
    std::uint64_t budget;
    double rel_sq_error;
};

struct AuccRow {
    std::string method, family;
    double eta;
    std::uint64_t seed;
    double aucc;
};

struct BenchResult {
    std::vector<CurveRow> curves;
    std::vector<AuccRow> auccs;
};

// Exact value tables for every (eta, family) game in the config.
inline nlohmann::json run_exact(const BenchConfig& cfg) {
    nlohmann::json out = nlohmann::json::array();
    for (double eta : cfg.etas) {
        const std::uint64_t gs = game_seed(cfg.seed, eta);
        const SOUGame game = sou_generate(cfg.n, eta, cfg.sigma2, gs);
        nlohmann::json entry{{"n", cfg.n}, {"eta", eta}, {"game_seed", gs}};
        nlohmann::json values;
        for (const auto& fam_name : cfg.families) {
            const SemivalueFamily fam = SemivalueFamily::parse(fam_name, cfg.n);
            const Eigen::VectorXd phi = exact_sou_values(game, fam);
            values[fam_name] = std::vector<double>(phi.data(), phi.data() + phi.size());
        }
        entry["values"] = values;
        out.push_back(entry);
    }
    return out;
}

// Full benchmark matrix. Work items are (method, family, eta, run); each item
// evaluates every budget on independent seed-derived streams. Items run on a
// worker pool; rows are emitted in the canonical item order regardless of
// thread count.
inline BenchResult run_bench(const BenchConfig& cfg) {
    struct Item {
        std::string method, family;
        double eta;
        int run;
    };
    std::vector<Item> items;
    for (const auto& method : cfg.methods)
        for (const auto& fam : cfg.families)
            for (double eta : cfg.etas)
                for (int run = 0; run < cfg.runs; ++run)
                    items.push_back({method, fam, eta, run});

    // shared game + exact-value tables, built once
    std::map<double, std::shared_ptr<const SOUGame>> games;
    std::map<std::pair<double, std::string>, Eigen::VectorXd> exact;
    for (double eta : cfg.etas) {
        auto game = std::make_shared<SOUGame>(
            sou_generate(cfg.n, eta, cfg.sigma2, game_seed(cfg.seed, eta)));
        games[eta] = game;
        for (const auto& fam_name : cfg.families) {
            const SemivalueFamily fam = SemivalueFamily::parse(fam_name, cfg.n);
            exact[{eta, fam_name}] = exact_sou_values(*game, fam);
        }
    }
    for (const auto& m : cfg.methods) BenchConfig::method_known(m);

    std::vector<std::vector<CurveRow>> curve_buf(items.size());
    std::vector<AuccRow> aucc_buf(items.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string error_msg;
    std::mutex error_mu;

    auto worker = [&]() {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= items.size() || failed.load()) break;
            const Item& it = items[idx];
            try {
                const SemivalueFamily fam = SemivalueFamily::parse(it.family, cfg.n);
                const Eigen::VectorXd& phi = exact.at({it.eta, it.family});
                const Utility u = games.at(it.eta)->oracle();
                std::vector<double> errs;
                std::uint64_t run_seed = 0;
                for (std::uint64_t budget : cfg.budgets) {
                    // the key omits the method name: all methods face common
                    // random numbers at each (family, eta, run, budget), which
                    // pairs their per-budget errors for sharper comparisons
                    const std::string key = it.family + "|" +
                                            detail::fmt_double(it.eta) + "|" +
                                            std::to_string(it.run) + "|" +
                                            std::to_string(budget);
                    const std::uint64_t seed = detail::item_seed(cfg.seed, key);
                    if (run_seed == 0) run_seed = seed;
                    const EstimateReport rep =
                        run_method(it.method, u, fam, budget, seed);
                    const double err = relative_sq_error(rep.estimates, phi);
                    curve_buf[idx].push_back({it.method, it.family, cfg.n, it.eta,
                                              seed, budget, err});
                    errs.push_back(err);
                }
                aucc_buf[idx] = {it.method, it.family, it.eta, run_seed, aucc(errs)};
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!failed.exchange(true)) error_msg = e.what();
            }
        }
    };

    const int nthreads = std::max(1, cfg.threads);
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failed.load()) throw std::runtime_error("bench: " + error_msg);

    BenchResult res;
    for (std::size_t i = 0; i < items.size(); ++i) {
        res.curves.insert(res.curves.end(), curve_buf[i].begin(), curve_buf[i].end());
        res.auccs.push_back(aucc_buf[i]);
    }
    return res;
}

inline void write_curves_csv(const BenchResult& res, std::ostream& os) {
    os << "method,family,n,eta,seed,budget,rel_sq_error\n";
    for (const auto& r : res.curves)
        os << detail::csv_escape(r.method) << ',' << detail::csv_escape(r.family)
           << ',' << r.n << ',' << detail::fmt_double(r.eta) << ',' << r.seed
           << ',' << r.budget << ',' << detail::fmt_double(r.rel_sq_error)
           << '\n';
}

inline void write_aucc_csv(const BenchResult& res, std::ostream& os) {
    os << "method,family,eta,seed,aucc\n";
    for (const auto& r : res.auccs)
        os << detail::csv_escape(r.method) << ',' << detail::csv_escape(r.family)
           << ',' << detail::fmt_double(r.eta) << ',' << r.seed << ','
           << detail::fmt_double(r.aucc) << '\n';
}

// mean and standard deviation of AUCC across runs, in first-seen group order
inline void write_summary_csv(const BenchResult& res, std::ostream& os) {
    os << "method,family,eta,runs,mean_aucc,sd_aucc\n";
    std::vector<std::tuple<std::string, std::string, double>> order;
    std::map<std::tuple<std::string, std::string, double>, std::vector<double>> groups;
    for (const auto& r : res.auccs) {
        auto key = std::make_tuple(r.method, r.family, r.eta);
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(r.aucc);
    }
    for (const auto& key : order) {
        const auto& vals = groups[key];
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double sd = 0.0;
        if (vals.size() > 1) {
            for (double v : vals) sd += (v - mean) * (v - mean);
            sd = std::sqrt(sd / (vals.size() - 1));
        }
        os << detail::csv_escape(std::get<0>(key)) << ','
           << detail::csv_escape(std::get<1>(key)) << ','
           << detail::fmt_double(std::get<2>(key)) << ',' << vals.size() << ','
           << detail::fmt_double(mean) << ',' << detail::fmt_double(sd) << '\n';
    }
}

}  // namespace pv
