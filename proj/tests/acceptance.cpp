// Acceptance suite: one PASS/FAIL line per criterion on the desk configuration
// (beta = 1, sbar = 1, rho = 1, lambda = 1/2, M = 201, Gamma = Lambda = [-1, 1], C_L = 1).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hjbt/experiments.hpp"

using namespace hjbt;

namespace {

const double kMus[] = {-1.0, 0.0, 1.0};

struct Desk {
    ProblemSpec p;
    ControlSets sets;
    std::shared_ptr<const BFactorization> bf;
    RunningCost cost;
};

Desk desk(double mu, int M = 201) {
    Desk d{ProblemSpec::make(1.0, mu, 1.0, 1.0, 0.5, M), ControlSets::make(-1, 1, -1, 1), nullptr, {}};
    d.bf = std::make_shared<const BFactorization>(build_B(d.p));
    d.cost = clipped_b_energy_cost(d.bf, 1.0);
    return d;
}

GridFunction random_state(const GridSpec& g, std::mt19937_64& rng, double amp) {
    std::uniform_real_distribution<double> u(-amp, amp);
    const double c0 = u(rng), c1 = u(rng), c2 = u(rng), c3 = u(rng);
    return GridFunction::sample(g, [&](double r) {
        return c0 + c1 * std::cos(M_PI * r) + c2 * std::cos(2 * M_PI * r) + c3 * std::sin(3 * M_PI * r);
    });
}

ControlPath random_path(const ProblemSpec& p, int N, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1, 1);
    ControlPath c;
    for (int k = 0; k < N; ++k) {
        c.a.push_back(u(rng));
        c.alpha.push_back(Eigen::VectorXd::Constant(p.grid.M, u(rng)));
    }
    return c;
}

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// ---------------------------------------------------------------------------------------------

Verdict operator_structure() {
    const Desk d = desk(0.0);
    const BFactorization& bf = *d.bf;
    const RenardyReport ren = check_renardy(bf, 1e-6);
    bool domain = true;
    for (int j = 0; j < d.p.grid.M; ++j) {
        const GridFunction col(d.p.grid, bf.B_half.entries.col(j));
        domain = domain && in_domain_astar(col, 1e-6 * sup_norm(col));
    }
    const bool ok = bf.raw_symmetry_defect <= 1e-6 && bf.min_eigenvalue_raw >= -1e-10 * bf.max_eigenvalue &&
                    ren.pass && ren.min_eigenvalue >= -1e-6 && bf.adjoint_defect <= 1e-6 && domain;
    return {ok, fmt("symmetry %.2e", bf.raw_symmetry_defect) + fmt(", min eig %.2e", bf.min_eigenvalue_raw) +
                    fmt(", renardy %.2e", ren.min_eigenvalue) + fmt(", adjoint %.2e", bf.adjoint_defect) +
                    (domain ? ", B_half columns in D(A*)" : ", B_half column outside D(A*)")};
}

Verdict state_solver() {
    using clock = std::chrono::steady_clock;
    double slowest = 0.0;
    auto lap = [&, t = clock::now()]() mutable {
        const auto now = clock::now();
        slowest = std::max(slowest, std::chrono::duration<double>(now - t).count());
        t = now;
    };
    // Shift.
    const ProblemSpec p1 = ProblemSpec::make(1.0, 0.0, 1.0, 1.0, 0.5, 201);
    const GridFunction x1 = solve_characteristics(p1, GridFunction::constant(p1.grid, 1.0), ControlPath::zero(p1, 100), 0.5);
    double e1 = 0.0;
    for (int i = 0; i < p1.grid.M; ++i) e1 = std::max(e1, std::abs(x1[i] - (p1.grid.r(i) >= 0.5 ? 1.0 : 0.0)));
    lap();
    // Boundary fill with mu = ln 2 on [0, 2].
    const ProblemSpec p2 = ProblemSpec::make(1.0, std::log(2.0), 2.0, 1.0, 0.5, 401);
    const GridFunction x2 =
        solve_characteristics(p2, GridFunction::constant(p2.grid, 1.0), ControlPath::constant(p2, p2.steps(1.0), 1.0, 0.0), 1.0);
    double e2 = 0.0;
    for (int i = 0; i < p2.grid.M; ++i) {
        const double r = p2.grid.r(i);
        e2 = std::max(e2, std::abs(x2[i] - (r >= 1.0 ? 0.5 : std::pow(2.0, -r))));
    }
    lap();
    // Constant distributed source.
    const double c = 0.7, s = 0.3;
    const GridFunction x0 = GridFunction::sample(p1.grid, [](double r) { return std::cos(3.0 * r); });
    const GridFunction x3 = solve_characteristics(p1, x0, ControlPath::constant(p1, p1.steps(s), 0.0, c), s);
    double e3 = 0.0;
    for (int i = 0; i < p1.grid.M; ++i) {
        const double r = p1.grid.r(i);
        e3 = std::max(e3, std::abs(x3[i] - (r >= s ? std::cos(3.0 * (r - s)) + c * s : c * r)));
    }
    lap();
    return {e1 <= 1e-10 && e2 <= 1e-6 && e3 <= 1e-6 && slowest <= 1.0,
            fmt("shift %.2e", e1) + fmt(", boundary fill %.2e", e2) + fmt(", constant source %.2e", e3) +
                fmt(", slowest example %.3f s", slowest)};
}

Verdict boundary_layer_convergence() {
    const ProblemSpec p = ProblemSpec::make(1.0, 0.0, 1.0, 1.0, 0.5, 801);
    const double T = 1.0;
    const auto rows = convergence_report(p, GridFunction::zeros(p.grid), ControlPath::constant(p, p.steps(T), 1.0, 0.0),
                                         T, {8, 16, 32, 64});
    const double first = rows.front().gap, last = rows.back().gap;
    const double target = 0.05 * ControlSets::make(-1, 1, -1, 1).gamma_norm();
    return {last < first && last <= target,
            fmt("initial gap %.4f", first) + fmt(", final gap %.4f", last) + fmt(", target %.3f", target)};
}

Verdict cn_gap() {
    const GridSpec g = GridSpec::make(201, 1.0);
    const GridFunction z = GridFunction::sample(g, [](double r) { return 1.0 - r; });
    double worst = 0.0;
    bool bound = true;
    for (int n = 8; n <= 64; ++n) {
        const double gap = std::abs(cn_functional(n, z) - z.front());
        worst = std::max(worst, std::abs(gap - 1.0 / (3.0 * n)));
        bound = bound && gap <= (l2_norm(z) + h1_seminorm(z)) / std::sqrt(double(n));
    }
    return {worst <= 1e-6 && bound, fmt("max |gap - 1/(3n)| %.2e", worst) + (bound ? ", norm bound holds" : ", norm bound violated")};
}

Verdict sobolev() {
    const GridSpec g = GridSpec::make(201, 1.0);
    const GridFunction x = GridFunction::sample(g, [](double r) { return r; });
    double e_err = 0.0, e_mono = 0.0, p_mono = 0.0, prev_e = 0.0, prev_p = 0.0;
    bool first = true;
    for (int k = 16; k >= 1; k /= 2) {
        const double s = k * g.dr();
        const double e = dq_energy(x, s), q = dq_pairing(x, s);
        e_err = std::max(e_err, std::abs(e - s * (1 - s)));
        if (!first) {
            e_mono = std::max(e_mono, e - prev_e);  // decreasing toward 0
            p_mono = std::max(p_mono, prev_p - q);  // increasing toward 1/2
        }
        first = false;
        prev_e = e;
        prev_p = q;
    }
    const double p_err = std::abs(dq_pairing(x, 0.05) - 0.45);
    return {e_err <= 1e-5 && p_err <= 1e-5 && e_mono <= 1e-6 && p_mono <= 1e-6,
            fmt("energy err %.2e", e_err) + fmt(", pairing(0.05) err %.2e", p_err) +
                fmt(", monotonicity defects %.1e", std::max(e_mono, p_mono))};
}

Verdict lyapunov() {
    bool ok = true;
    double worst = 0.0;
    for (double mu : kMus) {
        double prev = 0.0;
        for (int M : {201, 401}) {
            const Desk d = desk(mu, M);
            const GridFunction x0 = GridFunction::sample(d.p.grid, [](double r) { return (1 - r) * (0.5 + r); });
            const int N = d.p.steps(1.0);
            ControlPath path = ControlPath::zero(d.p, N);
            for (int k = 0; k < N; ++k) path.a[k] = (k * 4 / N) % 2 ? -1.0 : 1.0;
            const Test1Function phi = Test1Function::quadratic_b(d.bf, GridFunction::zeros(d.p.grid));
            const double res = lyapunov_identity_residual(d.p, phi, x0, path, 1.0).residual;
            if (M == 201) {
                ok = ok && res <= 1e-3;
                worst = std::max(worst, res);
            } else {
                ok = ok && res < prev;
            }
            prev = res;
        }
    }
    return {ok, fmt("worst residual at M=201 %.2e", worst) + (ok ? ", smaller at M=401" : "")};
}

Verdict gronwall() {
    std::mt19937_64 rng(2024);
    bool ok = true;
    int passed = 0;
    double worst_ratio = 0.0;
    for (double mu : kMus) {
        const Desk d = desk(mu);
        const double T = 1.0;
        const int N = d.p.steps(T);
        for (int i = 0; i < 20; ++i) {
            const GridFunction x0 = random_state(d.p.grid, rng, 1.0), y0 = random_state(d.p.grid, rng, 1.0);
            ControlPath path = random_path(d.p, N + 1, rng);
            ControlPath head = path;
            head.a.resize(N);
            head.alpha.resize(N);
            const GronwallReport r = trajectory_b_gronwall(d.p, *d.bf, x0, y0, head, T, 1e-6);
            const bool cT = std::abs(r.c_T - std::exp(2 * (1 + std::abs(mu)) * T)) <= 1e-12 * r.c_T;
            // One step past sbar / beta the two solutions coincide on every node.
            const GridFunction xs = solve_characteristics(d.p, x0, path, T + d.p.dt);
            const GridFunction ys = solve_characteristics(d.p, y0, path, T + d.p.dt);
            const bool forgets = r.forgets && max_abs(xs.values - ys.values) == 0.0;
            ok = ok && r.pass && cT && forgets;
            passed += r.pass && cT && forgets;
            worst_ratio = std::max(worst_ratio, r.rhs > 0 ? r.lhs / r.rhs : 0.0);
        }
    }
    return {ok, std::to_string(passed) + "/60 instances" + fmt(", worst lhs/rhs %.3f", worst_ratio)};
}

Verdict value_function() {
    // Constant cost.
    const Desk d = desk(0.0);
    const double c = 0.7, T = 1.0;
    std::mt19937_64 rng(5);
    const GridFunction x = random_state(d.p.grid, rng, 0.5);
    const ValueEstimate v = value_estimate(d.p, d.sets, constant_cost(c), x, {2, 2, 4}, T);
    const double exact = c * (1 - std::exp(-d.p.rho * T)) / d.p.rho;
    const double err = std::abs(v.value - exact);
    const bool bracket = v.lower() <= c / d.p.rho && c / d.p.rho <= v.upper();

    // Clipped energy, nonnegative boundary controls only.
    const ControlSets half = ControlSets::make(0, 1, 0, 0);
    const double T2 = 1.2;
    const GridFunction zero = GridFunction::zeros(d.p.grid);
    const ValueModel model(d.p, half, d.cost, {2, 1, 6}, T2);
    const ValueEstimate z = value_estimate(d.p, half, d.cost, zero, {2, 1, 6}, T2);
    bool zeros = z.value == 0.0;
    for (int digit : z.argmin) zeros = zeros && digit == 0;
    for (double a : z.argmin_a) zeros = zeros && a == 0.0;
    // Brute force over every sequence: only the all-zeros one has zero cost.
    long unique = 0;
    for (long i = 0; i < model.sequence_count(); ++i) unique += model.cost_of(i, zero) == 0.0;
    const bool ok = err <= 1e-12 && bracket && zeros && unique == 1 && model.sequence_count() == 64;
    return {ok, fmt("constant err %.1e", err) + (bracket ? ", bracket contains c/rho" : ", bracket misses c/rho") +
                    fmt(", clipped value %.1e", z.value) + ", " + std::to_string(model.sequence_count()) +
                    " sequences, " + std::to_string(unique) + " at zero cost"};
}

Verdict dpp() {
    std::mt19937_64 rng(77);
    bool ok = true;
    double worst = 0.0;
    int n = 0;
    for (double mu : kMus) {
        const Desk d = desk(mu);
        for (int i = 0; i < 5; ++i) {
            const DppReport r = dpp_residual(d.p, d.sets, d.cost, random_state(d.p.grid, rng, 0.5), 0.5, {2, 2, 4}, 1.0);
            ok = ok && r.pass && std::abs(r.residual) <= r.combined_gap;
            worst = std::max(worst, std::abs(r.residual) / r.combined_gap);
            ++n;
        }
    }
    return {ok, std::to_string(n) + " states" + fmt(", worst |residual| / gap %.2e", worst)};
}

Verdict lipschitz() {
    std::mt19937_64 rng(91);
    bool ok = true;
    double worst = 0.0;
    for (double mu : kMus) {
        const Desk d = desk(mu);
        std::vector<std::pair<GridFunction, GridFunction>> pairs;
        for (int i = 0; i < 10; ++i) pairs.push_back({random_state(d.p.grid, rng, 1.0), random_state(d.p.grid, rng, 1.0)});
        const LipschitzReport r = value_b_lipschitz_probe(d.p, d.sets, *d.bf, d.cost, pairs, {2, 2, 4}, 1.0);
        const double expect = 1.0 * std::exp(2 * (1 + std::abs(mu)) * 1.0 / 1.0) * 1.0;
        ok = ok && r.pass && !r.mode_mismatch && std::abs(r.constant - expect) <= 1e-12 * expect;
        for (const auto& pr : r.pairs) worst = std::max(worst, pr.lhs / pr.bound);
    }
    return {ok, "30 pairs" + fmt(", worst lhs / bound %.3f", worst)};
}

Verdict viscosity() {
    std::string detail;
    bool ok = true;
    // Constant cost: the constant c / rho solves the equation exactly.
    {
        const Desk d = desk(0.0);
        const double c = 0.7;
        const Candidate u = Candidate::constant(c / d.p.rho);
        const auto phi = Test1Function::zero(d.p.grid);
        const auto g = Test2Function::quadratic(0.0);
        const ViscosityReport sub = subsolution_residual(d.p, d.sets, constant_cost(c), *d.bf, u, phi, g, 1);
        const ViscosityReport sup = supersolution_residual(d.p, d.sets, constant_cost(c), *d.bf, u, phi, g, 1);
        const bool exact = sub.outcome == Outcome::pass && sup.outcome == Outcome::pass && sub.lhs == 0.0 &&
                           sup.lhs == 0.0 && sub.slack == 0.0 && sup.slack == 0.0;
        ok = ok && exact;
        detail += exact ? "constant exact" : "constant NOT exact";
    }
    for (double mu : kMus) {
        ExperimentConfig cfg;
        cfg.problem.mu = mu;
        cfg.run.negative_control = true;
        std::vector<CheckRow> seeds;
        const std::vector<CheckRow> agg = run_viscosity(cfg, &seeds);
        int pass_sub = 0, pass_sup = 0, fail = 0;
        bool negative_fails = false;
        for (const auto& r : seeds) {
            if (r.check == "viscosity_negative_control") {
                negative_fails = r.outcome == Outcome::fail;
                continue;
            }
            fail += r.outcome == Outcome::fail;
            (r.check == "viscosity_sub" ? pass_sub : pass_sup) += r.outcome == Outcome::pass;
        }
        ok = ok && fail == 0 && pass_sub >= 3 && pass_sup >= 3 && negative_fails;
        detail += fmt("; mu=%g: ", mu) + "sub " + std::to_string(pass_sub) + "/5, super " + std::to_string(pass_sup) +
                  "/5, " + std::to_string(fail) + " FAIL, negative control " + (negative_fails ? "FAILS" : "passes");
        (void)agg;
    }
    return {ok, detail};
}

Verdict comparison() {
    std::mt19937_64 rng(313);
    const Desk d = desk(0.0);
    std::vector<GridFunction> pts;
    for (int i = 0; i < 5; ++i) pts.push_back(random_state(d.p.grid, rng, 0.5));
    const ComparisonReport r = comparison_probe(d.p, d.sets, d.cost, pts, {{2, 2, 4}, 1.0, {}}, {{3, 3, 2}, 2.0, {}});
    double worst = 0.0;
    for (const auto& pt : r.points) worst = std::max(worst, std::abs(pt.v1 - pt.v2) / (pt.gap1 + pt.gap2));
    return {r.pass && r.points.size() == pts.size(),
            std::to_string(r.points.size()) + " points" + fmt(", worst |v1 - v2| / (gap1 + gap2) %.3f", worst)};
}

Verdict determinism() {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "hjbt_acceptance_determinism";
    fs::remove_all(root);
    ExperimentConfig cfg;
    cfg.run.seed = 11;
    cfg.run.workers = 1;
    const int c1 = cmd_props(cfg, (root / "w1").string());
    cfg.run.workers = 4;
    const int c4 = cmd_props(cfg, (root / "w4").string());
    auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    };
    const std::string a = slurp(root / "w1" / "checks.csv"), b = slurp(root / "w4" / "checks.csv");
    fs::remove_all(root);
    return {!a.empty() && a == b && c1 == c4,
            std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "different") + ", exit codes " +
                std::to_string(c1) + "/" + std::to_string(c4)};
}

struct Criterion {
    int id;
    const char* name;
    double limit_seconds;  // 0: no runtime limit
    std::function<Verdict()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "operator structure", 10, operator_structure},
        {2, "state solver closed forms", 3, state_solver},
        {3, "boundary-layer convergence", 30, boundary_layer_convergence},
        {4, "C_n versus delta0 gap", 1, cn_gap},
        {5, "difference-quotient functionals", 1, sobolev},
        {6, "Lyapunov identity", 10, lyapunov},
        {7, "Gronwall bound and forgetting", 20, gronwall},
        {8, "value function examples", 60, value_function},
        {9, "dynamic programming residual", 120, dpp},
        {10, "value B-Lipschitz bound", 120, lipschitz},
        {11, "viscosity sub/supersolution checks", 300, viscosity},
        {12, "comparison probe", 120, comparison},
        {13, "determinism across worker counts", 0, determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = c.limit_seconds == 0 || secs <= c.limit_seconds;
        const bool pass = v.pass && in_time;
        failed += !pass;
        std::printf("%s criterion %d: %s (%s; %.2f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), secs,
                    in_time ? "" : ", over time limit");
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
