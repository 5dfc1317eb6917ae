#include "runner.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace phaselab::cli;
    CLI::App app{"phase-space propagation experiments"};
    app.require_subcommand(1);
    CLI::App* run_cmd = app.add_subcommand("run", "run one command on a scenario file");
    std::string scenario, command;
    RunOptions opt;
    run_cmd->add_option("scenario", scenario, "scenario file (YAML)")->required();
    run_cmd->add_option("command", command, "command to run")->required()->check(CLI::IsMember(commands()));
    run_cmd->add_option("--out", opt.out_dir, "output directory")->capture_default_str();
    run_cmd->add_option("--jobs", opt.jobs, "sweep points computed concurrently")->capture_default_str()->check(CLI::PositiveNumber);
    run_cmd->add_flag("--assert", opt.assert_mode, "exit 4 when an acceptance check fails");
    run_cmd->add_flag("--oracle", opt.oracle, "add slow direct cross-checks");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_config;
    }
    return run(scenario, command, opt, std::cout, std::cerr);
}
