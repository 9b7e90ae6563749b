#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hjbt/control.hpp"
#include "hjbt/hjb.hpp"

namespace hjbt {

/// Experiment configuration. The text form is sectioned `key = value` lines:
///
///     [problem]
///     beta = 1
///     # comment
///
/// Sections: problem, control, cost, tolerances, run. Unknown sections or keys are rejected.
struct ExperimentConfig {
    struct Problem {
        double beta = 1.0;
        double mu = 0.0;
        double sbar = 1.0;
        double rho = 1.0;
        double lambda_b = 0.5;
        int grid_points = 201;
        double horizon = 1.0;
    } problem;

    struct Control {
        double gamma_lo = -1.0, gamma_hi = 1.0;
        double lambda_lo = -1.0, lambda_hi = 1.0;
        int n_a = 2;
        int n_alpha = 2;
        int segments = 4;
        std::string alpha_basis = "constant";
        long budget = 2000000;
        bool beam = false;
        int beam_width = 64;
        // simulate: constant controls, with a flipping sign every switch_period (0 = never)
        double sim_a = 0.0;
        double sim_alpha = 0.0;
        double sim_switch_period = 0.0;
    } control;

    struct Cost {
        std::string family = "clipped_b_energy";  // clipped_b_energy | constant
        double c_l = 1.0;
        double value = 1.0;  // constant family
        std::string l1_mode = "unsquared";
    } cost;

    struct Tolerances {
        double sym_tol = 1e-6;
        double clip_rel = 1e-10;
        double renardy_tol = 1e-6;
        double adjoint_tol = 1e-6;
        double domain_tol = 1e-6;
        double cn_tol = 1e-6;
        double dq_tol = 1e-5;
        double lyapunov_tol = 1e-3;
        double gronwall_slack = 1e-6;
        double gradient_slack = 1e-6;
        double vertex_tol = 1e-9;
        double concavity_tol = 1e-9;
        double stationarity_tol = 1e-3;
        double step_min = 1e-3;
        int d_slice = 6;
        int max_evals = 4000;
        double lyapunov_window = 0.05;
    } tol;

    struct Run {
        unsigned long long seed = 1;
        int workers = 1;
        std::vector<int> n_list{8, 16, 32, 64};
        int convergence_grid_points = 801;
        bool approx = false;
        bool negative_control = false;
        int output_every = 20;
        int gronwall_instances = 20;
        int lipschitz_pairs = 10;
        int dpp_states = 5;
        int viscosity_seeds = 5;
    } run;
};

/// Parses and validates; ConfigError names the offending key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Re-runs every constraint of the derived problem objects.
void validate(const ExperimentConfig& cfg);

/// Canonical text: every key in a fixed order, doubles with 17 significant digits. The worker
/// count is excluded because it does not change results.
std::string canonical_text(const ExperimentConfig& cfg);
/// FNV-1a 64 of the canonical text, as 16 hex digits.
std::string config_digest(const ExperimentConfig& cfg);
std::uint64_t fnv1a64(const std::string& s);

ProblemSpec make_problem(const ExperimentConfig& cfg, int grid_points = 0);
ControlSets make_sets(const ExperimentConfig& cfg);
BOptions make_b_options(const ExperimentConfig& cfg);
Lattice make_lattice(const ExperimentConfig& cfg);
ValueOptions make_value_options(const ExperimentConfig& cfg);
ViscosityOptions make_viscosity_options(const ExperimentConfig& cfg);
RunningCost make_cost(const ExperimentConfig& cfg, std::shared_ptr<const BFactorization> bf);

/// Parses "8,16,32".
std::vector<int> parse_int_list(const std::string& s, const std::string& key);

}  // namespace hjbt
