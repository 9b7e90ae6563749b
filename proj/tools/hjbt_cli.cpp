#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "hjbt/errors.hpp"
#include "hjbt/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Verification experiments for boundary-controlled transport HJB problems"};
    app.require_subcommand(1, 1);

    std::string config_path, out_dir = "out", init_path, n_list;
    long long seed = -1;
    int workers = 0;
    bool negative = false;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Configuration file (sectioned key = value)");
        sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
        sub->add_option("--seed", seed, "Override run.seed");
        sub->add_option("--workers", workers, "Override run.workers");
        sub->add_option("--n-list", n_list, "Override run.n_list, e.g. 8,16,32");
        sub->add_flag("--negative-control", negative, "Add the corrupted-candidate viscosity check");
    };
    auto* simulate = app.add_subcommand("simulate", "Trajectory CSV (and convergence table when run.approx is set)");
    auto* value = app.add_subcommand("value", "Lattice value estimate at the initial state");
    auto* dpp = app.add_subcommand("dpp", "Dynamic programming residuals");
    auto* hjb = app.add_subcommand("hjb-check", "Viscosity sub/supersolution and comparison checks");
    auto* props = app.add_subcommand("props", "Full verification suite");
    auto* ops = app.add_subcommand("operators", "Dump B and its square root, with structure checks");
    for (auto* sub : {simulate, value, dpp, hjb, props, ops}) common(sub);
    for (auto* sub : {simulate, value, dpp})
        sub->add_option("--init", init_path, "Initial state CSV with header r,value");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    hjbt::ExperimentConfig cfg;
    try {
        if (!config_path.empty()) cfg = hjbt::load_config(config_path);
        if (seed >= 0) cfg.run.seed = static_cast<unsigned long long>(seed);
        if (workers > 0) cfg.run.workers = workers;
        if (!n_list.empty()) cfg.run.n_list = hjbt::parse_int_list(n_list, "--n-list");
        if (negative) cfg.run.negative_control = true;
        hjbt::validate(cfg);
    } catch (const hjbt::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    if (simulate->parsed()) return hjbt::cmd_simulate(cfg, out_dir, init_path);
    if (value->parsed()) return hjbt::cmd_value(cfg, out_dir, init_path);
    if (dpp->parsed()) return hjbt::cmd_dpp(cfg, out_dir, init_path);
    if (hjb->parsed()) return hjbt::cmd_hjb_check(cfg, out_dir);
    if (props->parsed()) return hjbt::cmd_props(cfg, out_dir);
    return hjbt::cmd_operators(cfg, out_dir);
}
