#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fedawa/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"fedawa: deterministic federated-learning simulation engine"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::string run_dir;
    std::string probe;
    fedawa::CliOverrides overrides;
    std::int64_t seed_override = 0;
    std::string strategy_override;

    auto add_overrides = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed_override, "override run.master_seed");
        cmd->add_option("--strategy", strategy_override, "override run.strategy");
    };

    CLI::App* run = app.add_subcommand("run", "run an experiment and write its artifacts");
    run->add_option("config", config_path, "config file")->required();
    run->add_option("-o,--out", out_dir, "output directory");
    add_overrides(run);

    CLI::App* partition = app.add_subcommand("partition", "write the partition manifest only");
    partition->add_option("config", config_path, "config file")->required();
    partition->add_option("-o,--out", out_dir, "output directory");
    add_overrides(partition);

    CLI::App* analyze = app.add_subcommand("analyze", "recompute an analysis probe from a run directory");
    analyze->add_option("run_dir", run_dir, "directory written by `run`")->required();
    analyze->add_option("--probe", probe, "distance_matrix|ideal_vector|weight_trajectory")->required();

    bool show_schema = false;
    CLI::App* config_cmd = app.add_subcommand("config", "config-file tooling");
    config_cmd->add_flag("--schema", show_schema, "print every key with its default and meaning");

    CLI11_PARSE(app, argc, argv);

    for (CLI::App* cmd : {run, partition}) {
        if (!cmd->parsed()) continue;
        if (cmd->count("--seed")) overrides.seed = seed_override;
        if (cmd->count("--strategy")) overrides.strategy = strategy_override;
    }

    if (run->parsed()) return fedawa::cmd_run(config_path, out_dir, overrides, std::cerr);
    if (partition->parsed()) return fedawa::cmd_partition(config_path, out_dir, overrides, std::cerr);
    if (analyze->parsed()) return fedawa::cmd_analyze(run_dir, probe, std::cerr);
    if (config_cmd->parsed()) {
        if (show_schema) {
            std::cout << fedawa::schema_dump();
            return 0;
        }
        std::cerr << "config: nothing to do (try --schema)\n";
        return 2;
    }
    return 2;
}
