#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecgi/config.hpp"
#include "ecgi/pipeline.hpp"

// Exit codes: 0 success, 2 config error, 3 missing input, 4 resource limit,
// 1 anything else.

namespace {

struct CliOverrides {
    std::string config_path;
    std::string out_dir;
    std::string direction;
    std::string backend;
    long long seed = -1;
    int reps = -1;
    int workers = -1;
    std::vector<std::string> sets; // section.key=value patches
};

ecgi::ExperimentConfig load_with_overrides(const CliOverrides& cli) {
    ecgi::ConfigFile cfg = ecgi::parse_config(cli.config_path);
    auto patch = [&cfg](const std::string& section, const std::string& key,
                        const std::string& value) {
        auto& entries = cfg.sections[section];
        for (auto& [k, v] : entries) {
            if (k == key) {
                v = value;
                return;
            }
        }
        entries.emplace_back(key, value);
    };
    for (const std::string& set : cli.sets) {
        const auto dot = set.find('.');
        const auto eq = set.find('=');
        if (dot == std::string::npos || eq == std::string::npos || dot > eq)
            throw ecgi::ConfigError("--set expects section.key=value, got '" + set + "'");
        patch(set.substr(0, dot), set.substr(dot + 1, eq - dot - 1), set.substr(eq + 1));
    }
    if (cli.seed >= 0) patch("run", "seed", std::to_string(cli.seed));
    if (cli.reps >= 0) patch("run", "reps", std::to_string(cli.reps));
    if (cli.workers >= 0) patch("run", "workers", std::to_string(cli.workers));
    if (!cli.direction.empty()) patch("run", "direction", cli.direction);
    if (!cli.out_dir.empty()) patch("run", "out", cli.out_dir);
    if (!cli.backend.empty()) patch("filter", "backend", cli.backend);
    // Overrides change the effective configuration, so rebuild the hashed text.
    std::string text;
    for (const auto& [section, entries] : cfg.sections) {
        text += "[" + section + "]\n";
        for (const auto& [k, v] : entries) text += k + " = " + v + "\n";
    }
    return ecgi::load_experiment(ecgi::parse_config_text(text));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Particle-filter electrocardiographic imaging on surface meshes"};
    app.require_subcommand(1);

    CliOverrides cli;
    auto add_common = [&cli](CLI::App* cmd) {
        cmd->add_option("--config", cli.config_path, "experiment config file")->required();
        cmd->add_option("--out", cli.out_dir, "output directory (overrides [run] out)");
        cmd->add_option("--seed", cli.seed, "seed (overrides [run] seed)");
        cmd->add_option("--reps", cli.reps, "repetitions per direction");
        cmd->add_option("--workers", cli.workers, "worker threads (0 = auto)");
        cmd->add_option("--direction", cli.direction, "fwd | bwd | both")
            ->check(CLI::IsMember({"fwd", "bwd", "both"}));
        cmd->add_option("--distance-backend", cli.backend, "dijkstra | fmm")
            ->check(CLI::IsMember({"dijkstra", "fmm"}));
        cmd->add_option("--set", cli.sets, "override any field: section.key=value");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "generate truth and observations");
    CLI::App* filter = app.add_subcommand("filter", "run the particle filters");
    CLI::App* maps = app.add_subcommand("maps", "compute estimator maps from traces");
    CLI::App* report = app.add_subcommand("report", "summarize an experiment");
    for (CLI::App* cmd : {simulate, filter, maps, report}) add_common(cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        const ecgi::ExperimentConfig exp = load_with_overrides(cli);
        const std::string out = exp.run.out_dir;
        if (simulate->parsed()) ecgi::cmd_simulate(exp, out);
        if (filter->parsed()) ecgi::cmd_filter(exp, out);
        if (maps->parsed()) ecgi::cmd_maps(exp, out);
        if (report->parsed()) ecgi::cmd_report(exp, out);
    } catch (const ecgi::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ecgi::MissingInputError& e) {
        std::fprintf(stderr, "missing input: %s\n", e.what());
        return 3;
    } catch (const ecgi::ResourceLimitError& e) {
        std::fprintf(stderr, "resource limit: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
