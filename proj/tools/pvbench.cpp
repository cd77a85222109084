#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pv/bench.hpp"

namespace {

pv::BenchConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    nlohmann::json j;
    in >> j;
    return pv::BenchConfig::from_json(j);
}

void apply_overrides(pv::BenchConfig& cfg, const std::string& out_dir,
                     long long seed, int threads) {
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (threads > 0) cfg.threads = threads;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semivalue estimation benchmark"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    long long seed = -1;
    int threads = 0;
    app.add_option("--config", config_path, "config file (JSON)")->required();
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "master seed override");
    app.add_option("--threads", threads, "worker thread count");

    auto* cmd_exact = app.add_subcommand("exact", "write exact value tables");
    auto* cmd_estimate =
        app.add_subcommand("estimate", "single estimator run, JSON report");
    auto* cmd_bench = app.add_subcommand("bench", "full benchmark matrix");
    for (auto* cmd : {cmd_exact, cmd_estimate, cmd_bench}) cmd->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        pv::BenchConfig cfg = load_config(config_path);
        apply_overrides(cfg, out_dir, seed, threads);
        std::filesystem::create_directories(cfg.out_dir);

        if (cmd_exact->parsed()) {
            nlohmann::json out = pv::run_exact(cfg);
            std::ofstream f(cfg.out_dir + "/exact.json");
            f << out.dump(2) << "\n";
            std::cout << "wrote " << cfg.out_dir << "/exact.json\n";
        } else if (cmd_estimate->parsed()) {
            const pv::SemivalueFamily fam =
                pv::SemivalueFamily::parse(cfg.family, cfg.n);
            const pv::SOUGame game = pv::sou_generate(
                cfg.n, cfg.eta, cfg.sigma2, pv::game_seed(cfg.seed, cfg.eta));
            const Eigen::VectorXd exact = pv::exact_sou_values(game, fam);
            const pv::EstimateReport rep = pv::run_method(
                cfg.method, game.oracle(), fam, cfg.budget, cfg.seed);
            nlohmann::json j{
                {"method", rep.method},
                {"family", fam.name()},
                {"n", cfg.n},
                {"eta", cfg.eta},
                {"seed", rep.seed},
                {"queries", rep.queries},
                {"estimates", std::vector<double>(
                                  rep.estimates.data(),
                                  rep.estimates.data() + rep.estimates.size())},
                {"rel_sq_error", pv::relative_sq_error(rep.estimates, exact)}};
            std::cout << j.dump(2) << "\n";
        } else if (cmd_bench->parsed()) {
            const pv::BenchResult res = pv::run_bench(cfg);
            {
                std::ofstream f(cfg.out_dir + "/curves.csv");
                pv::write_curves_csv(res, f);
            }
            {
                std::ofstream f(cfg.out_dir + "/aucc.csv");
                pv::write_aucc_csv(res, f);
            }
            {
                std::ofstream f(cfg.out_dir + "/summary.csv");
                pv::write_summary_csv(res, f);
            }
            std::cout << "wrote " << cfg.out_dir
                      << "/{curves,aucc,summary}.csv\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
