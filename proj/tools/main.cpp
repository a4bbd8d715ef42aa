#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>

#include "alphatron/harness.hpp"

using namespace alphatron;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_runtime = 1;
constexpr int exit_usage = 2;

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> max_queries;
    std::string out;
    bool quiet = false;
};

int do_run(const Flags& f) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(f.config);
        if (f.seed) cfg.seed = *f.seed;
        if (f.max_queries) cfg.kmtron.max_queries = *f.max_queries;
        resolve(cfg);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_usage;
    }
    RunOptions opt;
    if (!f.quiet) opt.log = &std::cerr;
    json record;
    int code = exit_ok;
    try {
        record = run_experiment(cfg, opt);
    } catch (const std::exception& e) {
        record = error_record(cfg, e);
        std::cerr << "run failed: " << e.what() << '\n';
        code = exit_runtime;
    }
    try {
        if (f.out.empty()) std::cout << record.dump(2) << '\n';
        else write_json(f.out, record);
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return exit_runtime;
    }
    if (code == exit_ok && !f.quiet && !f.out.empty()) std::cerr << "wrote " << f.out << '\n';
    return code;
}

int do_sweep(const Flags& f) {
    SweepPlan plan;
    try {
        std::ifstream in(f.config);
        if (!in) throw config_error("cannot read config '" + f.config + "'");
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw config_error(std::string("config is not valid JSON: ") + e.what());
        }
        plan = plan_sweep(j, f.seed);
        for (const auto& cell : plan.cells) {
            ExperimentConfig c = config_from_json(cell.config);
            resolve(c);
        }
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_usage;
    }
    RunOptions opt;
    if (!f.quiet) opt.log = &std::cerr;
    const std::string dir = f.out.empty() ? "sweep_out" : f.out;
    try {
        const std::size_t failed = run_sweep(plan, dir, opt, f.max_queries);
        if (!f.quiet) std::cerr << plan.cells.size() << " cells, " << failed << " failed; summary in " << dir << "/summary.csv\n";
        return failed == 0 ? exit_ok : exit_runtime;
    } catch (const std::exception& e) {
        std::cerr << "sweep failed: " << e.what() << '\n';
        return exit_runtime;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernelized isotonic regression experiments"};
    app.require_subcommand(1);
    Flags f;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("config", f.config, "experiment config (JSON)")->required();
        cmd->add_option("--seed", f.seed, "override the config seed");
        cmd->add_option("--out", f.out, "metrics file (run) or output directory (sweep)");
        cmd->add_option("--max-queries", f.max_queries, "query budget for membership-query learners");
        cmd->add_flag("--quiet", f.quiet, "no progress output");
    };
    CLI::App* run = app.add_subcommand("run", "run one experiment");
    CLI::App* sweep = app.add_subcommand("sweep", "run a parameter grid");
    add_common(run);
    add_common(sweep);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }
    if (f.max_queries && *f.max_queries == 0) {
        std::cerr << "--max-queries must be >= 1\n";
        return exit_usage;
    }
    return run->parsed() ? do_run(f) : do_sweep(f);
}
