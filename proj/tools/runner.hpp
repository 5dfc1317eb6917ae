#pragma once

#include "scenario.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace phaselab::cli {

enum ExitCode { exit_ok = 0, exit_config = 2, exit_guard = 3, exit_assert = 4 };

struct RunOptions {
    std::string out_dir = "out";
    bool assert_mode = false;  // exit 4 when a command's acceptance check fails
    int jobs = 1;              // sweep points computed concurrently
    bool oracle = false;       // add slow direct cross-checks
};

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"transform", "propagate", "dyson-convergence", "wavefront", "kernel-estimates"};
    return c;
}

// Loads the scenario, runs `command` and writes CSV tables, summary.json, schema.json and manifest.json into
// out_dir. Errors are reported on `err` and mapped to exit codes: 2 parse/config, 3 guard, 4 assertion.
int run(const std::string& scenario_path, const std::string& command, const RunOptions& opt, std::ostream& log,
        std::ostream& err);

}  // namespace phaselab::cli
