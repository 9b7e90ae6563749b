#include "hjbt/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "hjbt/errors.hpp"

namespace hjbt {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CheckRow row(std::string check, std::string instance, double lhs, double rhs, double slack, bool pass) {
    return {std::move(check), std::move(instance), lhs, rhs, slack, pass ? Outcome::pass : Outcome::fail};
}

/// Independent stream per check, so adding a check never shifts another's samples.
std::mt19937_64 stream(const ExperimentConfig& cfg, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.run.seed), static_cast<std::uint32_t>(cfg.run.seed >> 32),
                      static_cast<std::uint32_t>(tag)};
    return std::mt19937_64(seq);
}

/// Smooth random state: a few cosine modes with random amplitudes.
GridFunction random_state(const GridSpec& g, std::mt19937_64& rng, double amp) {
    std::uniform_real_distribution<double> u(-amp, amp);
    const double c0 = u(rng), c1 = u(rng), c2 = u(rng), c3 = u(rng);
    const double k = M_PI / g.sbar;
    return GridFunction::sample(g, [&](double r) {
        return c0 + c1 * std::cos(k * r) + c2 * std::cos(2 * k * r) + c3 * std::sin(3 * k * r);
    });
}

/// Random state in the D(A*) proxy: vanishes at sbar.
GridFunction random_vanishing(const GridSpec& g, std::mt19937_64& rng) {
    GridFunction f = random_state(g, rng, 1.0);
    for (int i = 0; i < g.M; ++i) f.values[i] *= 1.0 - g.r(i) / g.sbar;
    return f;
}

/// Random piecewise-constant path with values drawn from the control sets, one value per segment.
ControlPath random_path(const ProblemSpec& p, const ControlSets& sets, int N, std::mt19937_64& rng, int segments = 8) {
    std::uniform_real_distribution<double> ua(sets.gamma_lo, sets.gamma_hi), ul(sets.lambda_lo, sets.lambda_hi);
    ControlPath c;
    const int seg = std::max(1, N / segments);
    double a = 0.0, al = 0.0;
    for (int k = 0; k < N; ++k) {
        if (k % seg == 0) {
            a = ua(rng);
            al = ul(rng);
        }
        c.a.push_back(a);
        c.alpha.push_back(Eigen::VectorXd::Constant(p.grid.M, al));
    }
    return c;
}

/// Boundary value of largest magnitude in Gamma.
double extreme_a(const ControlSets& sets) {
    return std::abs(sets.gamma_hi) >= std::abs(sets.gamma_lo) ? sets.gamma_hi : sets.gamma_lo;
}

/// Bang-bang boundary path switching between the ends of Gamma four times over N steps.
ControlPath bang_bang(const ProblemSpec& p, const ControlSets& sets, int N) {
    ControlPath path = ControlPath::zero(p, N);
    for (int k = 0; k < N; ++k) path.a[k] = (k * 4 / N) % 2 ? sets.gamma_lo : sets.gamma_hi;
    return path;
}

GridFunction bump_state(const GridSpec& g) {
    return GridFunction::sample(g, [&](double r) { return (1 - r / g.sbar) * (0.5 + r / g.sbar); });
}

std::vector<double> halving_steps(const ProblemSpec& p, int top) {
    std::vector<double> s;
    for (int k = top; k >= 1; k /= 2) s.push_back(k * p.dt);
    return s;
}

// ---------------------------------------------------------------------------------------------
// Individual check groups

void operator_rows(const ExperimentConfig& cfg, const BFactorization& bf, std::vector<CheckRow>& out) {
    const auto& t = cfg.tol;
    out.push_back(row("b_symmetry", "M=" + std::to_string(bf.grid().M), bf.raw_symmetry_defect, t.sym_tol, 0.0,
                      bf.raw_symmetry_defect <= t.sym_tol));
    const double floor = -t.clip_rel * bf.max_eigenvalue;
    out.push_back(row("b_positivity", "min_eigenvalue", bf.min_eigenvalue_raw, floor, 0.0, bf.min_eigenvalue_raw >= floor));
    const RenardyReport ren = check_renardy(bf, t.renardy_tol);
    out.push_back(row("renardy", "range_B", ren.min_eigenvalue, -t.renardy_tol, 0.0, ren.pass));
    out.push_back(row("adjoint", "resolvents", bf.adjoint_defect, t.adjoint_tol, 0.0, bf.adjoint_defect <= t.adjoint_tol));
    double worst = 0.0;
    for (int j = 0; j < bf.grid().M; ++j) {
        const GridFunction col(bf.grid(), bf.B_half.entries.col(j));
        const double s = sup_norm(col);
        if (s > 0.0) worst = std::max(worst, std::abs(col.back()) / s);
    }
    out.push_back(row("b_half_domain", "columns", worst, t.domain_tol, 0.0, worst <= t.domain_tol));
}

void sobolev_rows(const ExperimentConfig& cfg, const ProblemSpec& p, std::vector<CheckRow>& out) {
    const GridSpec& g = p.grid;
    const double sb = g.sbar;
    const GridFunction x = GridFunction::sample(g, [](double r) { return r; });
    const double noise = 1e-6;
    // x(r) = r: energy s (sbar - s) decreasing to 0, pairing sbar (sbar - 2s) / 2 increasing to sbar^2 / 2.
    double worst_e = 0.0, worst_p = 0.0;
    double mono_e = 0.0, mono_p = 0.0;
    double prev_e = 0.0, prev_p = 0.0;
    int i = 0;
    for (int k = 16; k >= 1; k /= 2, ++i) {
        const double s = k * p.dr();
        const double e = dq_energy(x, s), q = dq_pairing(x, s);
        worst_e = std::max(worst_e, std::abs(e - s * (sb - s)));
        worst_p = std::max(worst_p, std::abs(q - sb * (sb - 2 * s) / 2));
        if (i > 0) {
            mono_e = std::max(mono_e, e - prev_e);
            mono_p = std::max(mono_p, prev_p - q);
        }
        prev_e = e;
        prev_p = q;
    }
    out.push_back(row("dq_energy", "x=r", worst_e, cfg.tol.dq_tol, 0.0, worst_e <= cfg.tol.dq_tol));
    out.push_back(row("dq_energy_monotone", "x=r", mono_e, 0.0, noise, mono_e <= noise));
    const double s05 = std::max(1.0, std::round(0.05 * sb / p.dr())) * p.dr();
    const double q05 = std::abs(dq_pairing(x, s05) - sb * (sb - 2 * s05) / 2);
    out.push_back(row("dq_pairing", "x=r", std::max(worst_p, q05), cfg.tol.dq_tol, 0.0,
                      std::max(worst_p, q05) <= cfg.tol.dq_tol));
    out.push_back(row("dq_pairing_monotone", "x=r", mono_p, 0.0, noise, mono_p <= noise));
}

void uniform_rows(const ExperimentConfig& cfg, const ProblemSpec& p, const ControlSets& sets,
                  std::vector<CheckRow>& out) {
    const GridSpec& g = p.grid;
    const GridFunction x0 = GridFunction::sample(g, [&](double r) { return (1 - r / g.sbar) * (1 + 2 * r / g.sbar); });
    std::mt19937_64 rng = stream(cfg, 2);
    std::uniform_int_distribution<int> pick(0, 1);
    for (int k : {1, 2, 4, 8}) {
        const double s = k * p.dt;
        if (s > 1.0) break;
        const double bound = uniform_continuity_bound(p, sets, x0, s);
        double worst = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            ControlPath path;
            for (int j = 0; j < k; ++j) {
                path.a.push_back(pick(rng) ? sets.gamma_hi : sets.gamma_lo);
                path.alpha.push_back(Eigen::VectorXd::Constant(g.M, pick(rng) ? sets.lambda_hi : sets.lambda_lo));
            }
            const GridFunction x = solve_characteristics(p, x0, path, s);
            worst = std::max(worst, l2_norm(GridFunction(g, x.values - x0.values)));
        }
        out.push_back(row("uniform_continuity", "s=" + num(s), worst, bound, 0.0, worst <= bound));
    }
}

void convergence_rows(const ExperimentConfig& cfg, const ControlSets& sets, std::vector<CheckRow>& out) {
    const ProblemSpec p = make_problem(cfg, cfg.run.convergence_grid_points);
    const double T = cfg.problem.horizon;
    const double a = extreme_a(sets);
    const auto rows = convergence_report(p, GridFunction::zeros(p.grid), ControlPath::constant(p, p.steps(T), a, 0.0),
                                         T, cfg.run.n_list);
    // Zero data, constant inflow a: two layers of profile a (1 - n r)^2 give |a| sqrt(2 / (5n)), plus
    // at most one sampled cell at the front.
    for (const auto& r : rows) {
        const double band = std::abs(a) * std::sqrt(2.0 / (5.0 * r.n) + 2.0 * p.dr());
        out.push_back(row("layer_gap_band", "n=" + std::to_string(r.n), r.gap, band, 0.0, r.gap <= band));
    }
    const double first = rows.front().gap, last = rows.back().gap;
    const bool shrinks = rows.size() < 2 || (first > 0.0 ? last < first : last <= first);
    out.push_back(row("layer_gap_monotone", "n=" + std::to_string(rows.front().n) + ".." + std::to_string(rows.back().n),
                      last, first, 0.0, shrinks));
}

void cn_rows(const ExperimentConfig& cfg, const ProblemSpec& p, std::vector<CheckRow>& out) {
    const GridSpec& g = p.grid;
    const GridFunction z = GridFunction::sample(g, [&](double r) { return 1.0 - r / g.sbar; });
    const int lo = *std::min_element(cfg.run.n_list.begin(), cfg.run.n_list.end());
    const int hi = *std::max_element(cfg.run.n_list.begin(), cfg.run.n_list.end());
    double worst = 0.0, worst_ratio = 0.0;
    for (int n = lo; n <= hi; ++n) {
        const double gap = std::abs(cn_functional(n, z) - z.front());
        worst = std::max(worst, std::abs(gap - 1.0 / (3.0 * n * g.sbar)));
        worst_ratio = std::max(worst_ratio, gap * std::sqrt(double(n)) / (l2_norm(z) + h1_seminorm(z)));
    }
    const std::string inst = "n=" + std::to_string(lo) + ".." + std::to_string(hi);
    out.push_back(row("cn_delta0_gap", inst, worst, cfg.tol.cn_tol, 0.0, worst <= cfg.tol.cn_tol));
    out.push_back(row("cn_delta0_bound", inst, worst_ratio, 1.0, 0.0, worst_ratio <= 1.0));
}

void lyapunov_rows(const ExperimentConfig& cfg, const ControlSets& sets, std::vector<CheckRow>& out) {
    const double T = cfg.problem.horizon;
    double prev = 0.0;
    for (int M : {cfg.problem.grid_points, 2 * cfg.problem.grid_points - 1}) {
        const ProblemSpec p = make_problem(cfg, M);
        const auto bf = std::make_shared<const BFactorization>(build_B(p, make_b_options(cfg)));
        const Test1Function phi = Test1Function::quadratic_b(bf, GridFunction::zeros(p.grid));
        const LyapunovReport r =
            lyapunov_identity_residual(p, phi, bump_state(p.grid), bang_bang(p, sets, p.steps(T)), T, cfg.tol.domain_tol);
        const std::string inst = "M=" + std::to_string(M);
        if (M == cfg.problem.grid_points)
            out.push_back(row("lyapunov_identity", inst, r.residual, cfg.tol.lyapunov_tol, 0.0,
                              r.residual <= cfg.tol.lyapunov_tol));
        else
            out.push_back(row("lyapunov_refinement", inst, r.residual, prev, 0.0, r.residual < prev));
        prev = r.residual;
    }
}

CheckRow rate_row(const std::string& name, const std::string& inst, const RateReport& r) {
    // lhs: excess at the smallest s; rhs: excess at the largest.
    return row(name, inst, std::max(0.0, r.rows.back().excess), std::max(0.0, r.rows.front().excess), 0.0, r.pass);
}

void rate_rows(const ProblemSpec& p, const ControlSets& sets,
               std::shared_ptr<const BFactorization> bf, std::vector<CheckRow>& out) {
    const std::vector<double> sl = halving_steps(p, 8);
    const GridSpec& g = p.grid;
    const RateReport g2 = test2_rate_check(p, sets, Test2Function::soft(2.0), bump_state(g), vertex_controls(sets), sl);
    out.push_back(rate_row("test2_rate", "soft c=2, vertex controls", g2));
    const RateReport q2 = test2_rate_check(p, sets, Test2Function::quadratic(1.0), bump_state(g),
                                           {{extreme_a(sets), 0.0}}, sl);
    out.push_back(rate_row("test2_rate", "quadratic c=1", q2));

    // Compatible data: x0(0) equals the inflow value.
    const double a = extreme_a(sets);
    const GridFunction x0 = GridFunction::sample(g, [&](double r) { return a * (1 - (r / g.sbar) * (r / g.sbar)); });
    const Test1Function phi = Test1Function::quadratic_b(bf, GridFunction::zeros(g));
    const RateReport single = test1_rate_check(p, phi, x0, {{a, 0.0}}, sl);
    out.push_back(rate_row("test1_rate", "quadratic B", single));
    std::vector<ConstantControl> family;
    for (int i = 0; i < 5; ++i) family.push_back({sets.gamma_lo + (sets.gamma_hi - sets.gamma_lo) * i / 4.0, 0.0});
    const RateReport fam = test1_rate_check(p, phi, x0, family, sl);
    const double spread = fam.rows.back().spread, allowed = 2.0 * single.rows.back().lhs;
    out.push_back(row("test1_control_independence", "five boundary values", spread, allowed, 0.0, spread <= allowed));
}

void gronwall_rows(const ExperimentConfig& cfg, const ProblemSpec& p, const ControlSets& sets,
                   const BFactorization& bf, std::vector<CheckRow>& out) {
    std::mt19937_64 rng = stream(cfg, 3);
    const double T = cfg.problem.horizon;
    const int N = p.steps(T);
    for (int i = 0; i < cfg.run.gronwall_instances; ++i) {
        const GridFunction x0 = random_state(p.grid, rng, 1.0), y0 = random_state(p.grid, rng, 1.0);
        const GronwallReport r =
            trajectory_b_gronwall(p, bf, x0, y0, random_path(p, sets, N, rng), T, cfg.tol.gronwall_slack);
        out.push_back(row("gronwall_b_distance", "instance=" + std::to_string(i), r.lhs, r.rhs, cfg.tol.gronwall_slack * r.rhs,
                          r.pass && r.forgets));
    }
}

void lipschitz_rows(const ExperimentConfig& cfg, const ProblemSpec& p, const ControlSets& sets,
                    const BFactorization& bf, const RunningCost& cost, std::vector<CheckRow>& out) {
    if (cfg.run.lipschitz_pairs == 0) return;
    std::mt19937_64 rng = stream(cfg, 4);
    std::vector<std::pair<GridFunction, GridFunction>> pairs;
    for (int i = 0; i < cfg.run.lipschitz_pairs; ++i)
        pairs.push_back({random_state(p.grid, rng, 1.0), random_state(p.grid, rng, 1.0)});
    const LipschitzReport r = value_b_lipschitz_probe(p, sets, bf, cost, pairs, make_lattice(cfg),
                                                      cfg.problem.horizon, make_value_options(cfg));
    for (std::size_t i = 0; i < r.pairs.size(); ++i) {
        const auto& pr = r.pairs[i];
        out.push_back(row("value_b_lipschitz", "pair=" + std::to_string(i), pr.lhs, pr.bound, 0.0,
                          pr.pass && !r.mode_mismatch));
    }
}

void dpp_rows(const ExperimentConfig& cfg, const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost,
              const std::vector<GridFunction>& states, std::vector<CheckRow>& out) {
    const Lattice lat = make_lattice(cfg);
    const double T = cfg.problem.horizon;
    const double s = T * (lat.K / 2) / lat.K;
    for (std::size_t i = 0; i < states.size(); ++i) {
        const DppReport r = dpp_residual(p, sets, cost, states[i], s, lat, T, make_value_options(cfg));
        out.push_back(row("dpp", "state=" + std::to_string(i) + " s=" + num(s), std::abs(r.residual), r.combined_gap,
                          0.0, r.pass));
    }
}

std::vector<GridFunction> random_states(const ExperimentConfig& cfg, const GridSpec& g, int n, std::uint64_t tag,
                                        double amp) {
    std::mt19937_64 rng = stream(cfg, tag);
    std::vector<GridFunction> v;
    for (int i = 0; i < n; ++i) v.push_back(random_state(g, rng, amp));
    return v;
}

void comparison_rows(const ExperimentConfig& cfg, const ProblemSpec& p, const ControlSets& sets,
                     const RunningCost& cost, std::vector<CheckRow>& out) {
    const std::vector<GridFunction> pts = random_states(cfg, p.grid, 4, 6, 0.5);
    const Lattice lat = make_lattice(cfg);
    const Lattice finer{lat.n_a + 1, lat.n_alpha, lat.K};
    const ValueOptions opt = make_value_options(cfg);
    const ComparisonReport c =
        comparison_probe(p, sets, cost, pts, {lat, cfg.problem.horizon, opt}, {finer, cfg.problem.horizon, opt});
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        const auto& pt = c.points[i];
        out.push_back(row("comparison", "point=" + std::to_string(i), std::abs(pt.v1 - pt.v2), pt.gap1 + pt.gap2, 0.0,
                          pt.pass));
    }
}

void hamiltonian_rows(const ExperimentConfig& cfg, const ProblemSpec& p, const ControlSets& sets,
                      const RunningCost& cost, std::vector<CheckRow>& out) {
    std::mt19937_64 rng = stream(cfg, 7);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double worst = 0.0, concave = 0.0;
    for (int i = 0; i < 20; ++i) {
        const GridFunction x = random_state(p.grid, rng, 1.0);
        const GridFunction p1 = random_vanishing(p.grid, rng), p2 = random_vanishing(p.grid, rng);
        const HamiltonianResult hv = hamiltonian(p, sets, cost, x, p1, p2);
        const HamiltonianResult hl = hamiltonian_lattice(p, sets, cost, x, p1, p2, 11);
        worst = std::max(worst, std::abs(hv.value - hl.value));
        const double t = u01(rng);
        const GridFunction mix(p.grid, t * p1.values + (1 - t) * p2.values);
        const double h1 = hamiltonian(p, sets, cost, x, p1).value, h2 = hamiltonian(p, sets, cost, x, p2).value;
        concave = std::max(concave, t * h1 + (1 - t) * h2 - hamiltonian(p, sets, cost, x, mix).value);
    }
    out.push_back(row("hamiltonian_vertex", "20 costates", worst, cfg.tol.vertex_tol, 0.0, worst <= cfg.tol.vertex_tol));
    out.push_back(row("hamiltonian_concavity", "20 pairs", concave, cfg.tol.concavity_tol, 0.0,
                      concave <= cfg.tol.concavity_tol));
}

struct Verifier {
    ProblemSpec p;
    ControlSets sets;
    std::shared_ptr<const BFactorization> bf;
    RunningCost cost;
    Candidate u;
    Test1Function phi;
    Test2Function g;
    ViscosityOptions opt;
};

Verifier make_verifier(const ExperimentConfig& cfg) {
    const ProblemSpec p = make_problem(cfg);
    const ControlSets sets = make_sets(cfg);
    auto bf = std::make_shared<const BFactorization>(build_B(p, make_b_options(cfg)));
    const RunningCost cost = make_cost(cfg, bf);
    const ViscosityOptions opt = make_viscosity_options(cfg);
    // The value function of a constant cost is known in closed form on the infinite horizon.
    Candidate u = cost.kind == RunningCost::Kind::constant
                      ? Candidate::constant(cost.constant_value / p.rho)
                      : Candidate::value_function(std::make_shared<const ValueEstimator>(
                            p, sets, cost, make_lattice(cfg), cfg.problem.horizon, make_value_options(cfg)));
    const Test1Function phi = Test1Function::quadratic_b(bf, seed_anchor(*bf, 99, opt.d_slice, 0.5));
    return {p, sets, bf, cost, std::move(u), phi, Test2Function::quadratic(0.1), opt};
}

CheckRow report_row(const ViscosityReport& r) {
    CheckRow c{r.check == "subsolution" ? "viscosity_sub" : "viscosity_super", "seed=" + std::to_string(r.seed),
               r.lhs, r.rhs, r.slack, r.outcome};
    return c;
}

std::vector<CheckRow> viscosity_rows(const ExperimentConfig& cfg, const Verifier& v, std::vector<CheckRow>* detail) {
    std::vector<CheckRow> out;
    const int n = cfg.run.viscosity_seeds;
    if (n == 0) return out;
    const int need = (n + 1) / 2;
    for (bool sub : {true, false}) {
        int pass = 0, fail = 0;
        for (int k = 0; k < n; ++k) {
            const int seed = static_cast<int>(cfg.run.seed) + k;
            const ViscosityReport r = sub ? subsolution_residual(v.p, v.sets, v.cost, *v.bf, v.u, v.phi, v.g, seed, v.opt)
                                          : supersolution_residual(v.p, v.sets, v.cost, *v.bf, v.u, v.phi, v.g, seed, v.opt);
            pass += r.outcome == Outcome::pass;
            fail += r.outcome == Outcome::fail;
            if (detail) detail->push_back(report_row(r));
        }
        // Extremum search may stall on a minority of seeds; a FAIL anywhere fails the check.
        CheckRow c{sub ? "viscosity_sub" : "viscosity_super", std::to_string(n) + " seeds", double(pass), double(need),
                   0.0, Outcome::inconclusive};
        if (fail > 0)
            c.outcome = Outcome::fail;
        else if (pass >= need)
            c.outcome = Outcome::pass;
        out.push_back(c);
    }
    if (cfg.run.negative_control) {
        const Candidate bad = Candidate::with_spike(v.u, seed_anchor(*v.bf, 1, v.opt.d_slice), 0.5, 0.1);
        ViscosityReport r = subsolution_residual(v.p, v.sets, v.cost, *v.bf, bad, v.phi, v.g, 1, v.opt);
        CheckRow c = report_row(r);
        c.check = "viscosity_negative_control";
        if (detail) detail->push_back(c);
        out.push_back(c);
    }
    return out;
}

void gradient_rows(const ExperimentConfig& cfg, const Verifier& v, std::vector<CheckRow>& out) {
    const double C = value_b_lipschitz_constant(v.p, v.cost);
    const ViscosityReport r = subsolution_residual(v.p, v.sets, v.cost, *v.bf, v.u, v.phi, Test2Function::quadratic(0.0),
                                                   static_cast<int>(cfg.run.seed), v.opt);
    CheckRow c{"gradient_range", "seed=" + std::to_string(cfg.run.seed), 0.0, 1.0, cfg.tol.gradient_slack,
               Outcome::inconclusive};
    // A zero Lipschitz constant leaves no finite ratio to test.
    if (r.extremum.located && C > 0.0) {
        const GradientBoundReport g = gradient_b_bound_check(*v.bf, v.phi.gradient(r.extremum.x), C, 32, cfg.run.seed,
                                                             cfg.tol.gradient_slack);
        c.lhs = g.worst_ratio;
        c.outcome = g.pass ? Outcome::pass : Outcome::fail;
    }
    out.push_back(c);
}

// ---------------------------------------------------------------------------------------------
// Output helpers

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
}

void write_file(const std::string& dir, const std::string& name, const std::string& body) {
    const std::string path = (std::filesystem::path(dir) / name).string();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path + "'");
    f << body;
}

void write_summary(const std::string& dir, const RunSummary& s, int code) {
    nlohmann::ordered_json j;
    j["command"] = s.command;
    j["config_digest"] = s.digest;
    j["wall_seconds"] = s.wall_seconds;
    j["exit_code"] = code;
    int counts[3] = {0, 0, 0};
    nlohmann::ordered_json checks = nlohmann::ordered_json::array();
    for (const auto& r : s.rows) {
        ++counts[static_cast<int>(r.outcome)];
        checks.push_back({{"check", r.check}, {"instance", r.instance}, {"outcome", to_string(r.outcome)}});
    }
    j["counts"] = {{"PASS", counts[0]}, {"FAIL", counts[1]}, {"INCONCLUSIVE", counts[2]}};
    j["checks"] = checks;
    write_file(dir, "summary.json", j.dump(2) + "\n");
}

/// Runs a command body, times it, writes checks.csv and summary.json, and maps errors to exit 2.
template <class Body>
int run_command(const char* name, const ExperimentConfig& cfg, const std::string& out_dir, Body&& body) {
    try {
        ensure_dir(out_dir);
        const auto t0 = std::chrono::steady_clock::now();
        RunSummary s;
        s.command = name;
        s.digest = config_digest(cfg);
        s.rows = body();
        s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const int code = exit_code(s.rows);
        write_file(out_dir, "checks.csv", checks_csv(s.rows));
        write_summary(out_dir, s, code);
        for (const auto& r : s.rows)
            if (r.outcome != Outcome::pass)
                std::cerr << to_string(r.outcome) << " " << r.check << " " << r.instance << "\n";
        return code;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

GridFunction initial_state(const GridSpec& g, const std::string& init_path) {
    return init_path.empty() ? default_initial_state(g) : read_initial_state(init_path, g);
}

}  // namespace

// ---------------------------------------------------------------------------------------------

int exit_code(const std::vector<CheckRow>& rows) {
    bool fail = false, inconclusive = false;
    for (const auto& r : rows) {
        fail = fail || r.outcome == Outcome::fail;
        inconclusive = inconclusive || r.outcome == Outcome::inconclusive;
    }
    return fail ? 1 : inconclusive ? 3 : 0;
}

std::string checks_csv(const std::vector<CheckRow>& rows) {
    std::string s = "check,instance,lhs,rhs,slack,outcome\n";
    for (const auto& r : rows)
        s += r.check + "," + r.instance + "," + num(r.lhs) + "," + num(r.rhs) + "," + num(r.slack) + "," +
             to_string(r.outcome) + "\n";
    return s;
}

GridFunction default_initial_state(const GridSpec& g) { return bump_state(g); }

GridFunction read_initial_state(const std::string& path, const GridSpec& g) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read initial state '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ShapeError("initial state '" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "r,value") throw ShapeError("initial state '" + path + "': expected header 'r,value'");
    std::vector<double> rs, vs;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::istringstream ls(line);
        std::string a, b;
        if (!std::getline(ls, a, ',') || !std::getline(ls, b))
            throw ShapeError("initial state '" + path + "': malformed row '" + line + "'");
        char* end = nullptr;
        const double r = std::strtod(a.c_str(), &end);
        const bool ok_r = *end == '\0';
        const double v = std::strtod(b.c_str(), &end);
        if (!ok_r || (*end != '\0' && *end != '\r'))
            throw ShapeError("initial state '" + path + "': malformed row '" + line + "'");
        rs.push_back(r);
        vs.push_back(v);
    }
    if (static_cast<int>(vs.size()) != g.M)
        throw ShapeError("initial state '" + path + "' has " + std::to_string(vs.size()) + " rows, grid has " +
                         std::to_string(g.M) + " points");
    for (int i = 0; i < g.M; ++i)
        if (std::abs(rs[i] - g.r(i)) > 1e-9 * g.sbar)
            throw ShapeError("initial state '" + path + "': row " + std::to_string(i) + " has r = " + num(rs[i]) +
                             ", grid node is " + num(g.r(i)));
    return GridFunction(g, Eigen::Map<const Eigen::VectorXd>(vs.data(), g.M));
}

std::vector<CheckRow> run_viscosity(const ExperimentConfig& cfg, std::vector<CheckRow>* detail) {
    const Verifier v = make_verifier(cfg);
    return viscosity_rows(cfg, v, detail);
}

std::vector<CheckRow> run_props(const ExperimentConfig& cfg) {
    validate(cfg);
    std::vector<CheckRow> out;
    const ProblemSpec p = make_problem(cfg);
    const ControlSets sets = make_sets(cfg);
    const Verifier v = make_verifier(cfg);
    const BFactorization& bf = *v.bf;

    operator_rows(cfg, bf, out);
    sobolev_rows(cfg, p, out);
    uniform_rows(cfg, p, sets, out);
    convergence_rows(cfg, sets, out);
    cn_rows(cfg, p, out);
    lyapunov_rows(cfg, sets, out);
    rate_rows(p, sets, v.bf, out);
    gronwall_rows(cfg, p, sets, bf, out);
    lipschitz_rows(cfg, p, sets, bf, v.cost, out);
    dpp_rows(cfg, p, sets, v.cost, random_states(cfg, p.grid, cfg.run.dpp_states, 5, 0.5), out);
    for (auto& r : viscosity_rows(cfg, v, nullptr)) out.push_back(std::move(r));
    gradient_rows(cfg, v, out);
    comparison_rows(cfg, p, sets, v.cost, out);
    hamiltonian_rows(cfg, p, sets, v.cost, out);
    return out;
}

// ---------------------------------------------------------------------------------------------
// Commands

int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir, const std::string& init_path) {
    return run_command("simulate", cfg, out_dir, [&] {
        const ProblemSpec p = make_problem(cfg);
        const ControlSets sets = make_sets(cfg);
        const GridFunction x0 = initial_state(p.grid, init_path);
        const double T = cfg.problem.horizon;
        const int N = p.steps(T);
        const auto& c = cfg.control;
        ControlPath path = ControlPath::zero(p, N);
        for (int k = 0; k < N; ++k) {
            const bool flip =
                c.sim_switch_period > 0.0 && static_cast<long>(std::floor(k * p.dt / c.sim_switch_period + 1e-9)) % 2;
            path.a[k] = flip ? -c.sim_a : c.sim_a;
            path.alpha[k].setConstant(flip ? -c.sim_alpha : c.sim_alpha);
        }
        path.validate(sets, p);

        const TrajectoryResult tr = march_characteristics(p, x0, path, T);
        std::vector<int> cols;
        for (int k = 0; k <= N; k += cfg.run.output_every) cols.push_back(k);
        if (cols.back() != N) cols.push_back(N);
        std::string csv = "r";
        for (int k : cols) csv += ",t=" + num(tr.times[k]);
        csv += "\n";
        for (int i = 0; i < p.grid.M; ++i) {
            csv += num(p.grid.r(i));
            for (int k : cols) csv += "," + num(tr.states[k][i]);
            csv += "\n";
        }
        write_file(out_dir, "trajectory.csv", csv);

        std::vector<CheckRow> rows;
        if (cfg.run.approx) {
            const auto conv = convergence_report(p, x0, path, T, cfg.run.n_list);
            std::string cc = "n,gap\n";
            for (const auto& r : conv) cc += std::to_string(r.n) + "," + num(r.gap) + "\n";
            write_file(out_dir, "convergence.csv", cc);
            const bool shrinks = conv.size() < 2 || conv.back().gap <= conv.front().gap;
            rows.push_back(row("approx_convergence", "n_list", conv.back().gap, conv.front().gap, 0.0, shrinks));
        }
        return rows;
    });
}

int cmd_value(const ExperimentConfig& cfg, const std::string& out_dir, const std::string& init_path) {
    return run_command("value", cfg, out_dir, [&] {
        const ProblemSpec p = make_problem(cfg);
        const ControlSets sets = make_sets(cfg);
        const GridFunction x0 = initial_state(p.grid, init_path);
        auto bf = std::make_shared<const BFactorization>(build_B(p, make_b_options(cfg)));
        const RunningCost cost = make_cost(cfg, bf);
        const Lattice lat = make_lattice(cfg);
        const ValueEstimate v = value_estimate(p, sets, cost, x0, lat, cfg.problem.horizon, make_value_options(cfg));
        std::string csv =
            "instance_id,value,gap_lattice,gap_tail,lower,upper,lattice_na,lattice_nalpha,segments,steps,horizon,"
            "certified\n";
        csv += "x0," + num(v.value) + "," + num(v.gap_lattice) + "," + num(v.gap_tail) + "," + num(v.lower()) + "," +
               num(v.upper()) + "," + std::to_string(lat.n_a) + "," + std::to_string(lat.n_alpha) + "," +
               std::to_string(lat.K) + "," + std::to_string(p.steps(cfg.problem.horizon)) + "," +
               num(cfg.problem.horizon) + "," + (v.certified ? "true" : "false") + "\n";
        write_file(out_dir, "value.csv", csv);
        std::string am = "segment,a,alpha\n";
        for (std::size_t k = 0; k < v.argmin_a.size(); ++k)
            am += std::to_string(k) + "," + num(v.argmin_a[k]) + "," + num(v.argmin_alpha[k]) + "\n";
        write_file(out_dir, "argmin.csv", am);
        return std::vector<CheckRow>{};
    });
}

int cmd_dpp(const ExperimentConfig& cfg, const std::string& out_dir, const std::string& init_path) {
    return run_command("dpp", cfg, out_dir, [&] {
        const ProblemSpec p = make_problem(cfg);
        const ControlSets sets = make_sets(cfg);
        auto bf = std::make_shared<const BFactorization>(build_B(p, make_b_options(cfg)));
        const RunningCost cost = make_cost(cfg, bf);
        const std::vector<GridFunction> states = init_path.empty()
                                                     ? random_states(cfg, p.grid, cfg.run.dpp_states, 5, 0.5)
                                                     : std::vector<GridFunction>{read_initial_state(init_path, p.grid)};
        std::vector<CheckRow> rows;
        dpp_rows(cfg, p, sets, cost, states, rows);
        return rows;
    });
}

int cmd_hjb_check(const ExperimentConfig& cfg, const std::string& out_dir) {
    return run_command("hjb-check", cfg, out_dir, [&] {
        const Verifier v = make_verifier(cfg);
        std::vector<CheckRow> detail;
        std::vector<CheckRow> rows = viscosity_rows(cfg, v, &detail);
        write_file(out_dir, "viscosity.csv", checks_csv(detail));
        gradient_rows(cfg, v, rows);
        comparison_rows(cfg, v.p, v.sets, v.cost, rows);
        return rows;
    });
}

int cmd_props(const ExperimentConfig& cfg, const std::string& out_dir) {
    return run_command("props", cfg, out_dir, [&] { return run_props(cfg); });
}

int cmd_operators(const ExperimentConfig& cfg, const std::string& out_dir) {
    return run_command("operators", cfg, out_dir, [&] {
        const ProblemSpec p = make_problem(cfg);
        const BFactorization bf = build_B(p, make_b_options(cfg));
        auto dump = [&](const Eigen::MatrixXd& m) {
            std::string s = "r";
            for (int j = 0; j < p.grid.M; ++j) s += ",c" + std::to_string(j);
            s += "\n";
            for (int i = 0; i < p.grid.M; ++i) {
                s += num(p.grid.r(i));
                for (int j = 0; j < p.grid.M; ++j) s += "," + num(m(i, j));
                s += "\n";
            }
            return s;
        };
        write_file(out_dir, "B.csv", dump(bf.B.entries));
        write_file(out_dir, "B_half.csv", dump(bf.B_half.entries));
        std::string ev = "index,eigenvalue\n";
        for (int i = 0; i < bf.eigenvalues.size(); ++i) ev += std::to_string(i) + "," + num(bf.eigenvalues[i]) + "\n";
        write_file(out_dir, "eigenvalues.csv", ev);
        std::vector<CheckRow> rows;
        operator_rows(cfg, bf, rows);
        return rows;
    });
}

}  // namespace hjbt
