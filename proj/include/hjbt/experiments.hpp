#pragma once

#include <string>
#include <vector>

#include "hjbt/config.hpp"

namespace hjbt {

/// One verification outcome. `lhs` is the measured quantity, `rhs` the bound it is held to and
/// `slack` any allowance added to the bound.
struct CheckRow {
    std::string check;
    std::string instance;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
    Outcome outcome = Outcome::inconclusive;
};

/// Rows plus the metadata written to summary.json.
struct RunSummary {
    std::string command;
    std::vector<CheckRow> rows;
    double wall_seconds = 0.0;
    std::string digest;
};

/// 0 when every row passes, 1 on any FAIL, 3 when only INCONCLUSIVE rows keep it from 0.
int exit_code(const std::vector<CheckRow>& rows);

/// CSV with header check,instance,lhs,rhs,slack,outcome; numbers use 17 significant digits.
std::string checks_csv(const std::vector<CheckRow>& rows);

/// Full suite on the configured instance: operator structure, difference quotients, uniform
/// continuity, boundary-layer convergence, C_n gap, Lyapunov identity, expansion rates,
/// Gronwall, value Lipschitz bound, DPP, viscosity, gradient range, comparison, Hamiltonian.
std::vector<CheckRow> run_props(const ExperimentConfig& cfg);

/// Viscosity sub/supersolution checks for each seed, plus the spiked candidate when
/// `run.negative_control` is set. Per-seed detail goes to `detail` when non-null.
std::vector<CheckRow> run_viscosity(const ExperimentConfig& cfg, std::vector<CheckRow>* detail = nullptr);

/// Reads "r,value" rows; throws ShapeError when the row count or nodes do not match the grid.
GridFunction read_initial_state(const std::string& path, const GridSpec& g);

/// Default initial state for commands without --init: (1 - r/sbar)(1/2 + r/sbar).
GridFunction default_initial_state(const GridSpec& g);

/// Subcommands. Each writes its CSV files and summary.json into `out_dir` and returns an exit
/// code; configuration and input errors return 2 with the message on stderr.
int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir, const std::string& init_path = "");
int cmd_value(const ExperimentConfig& cfg, const std::string& out_dir, const std::string& init_path = "");
int cmd_dpp(const ExperimentConfig& cfg, const std::string& out_dir, const std::string& init_path = "");
int cmd_hjb_check(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_props(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_operators(const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace hjbt
