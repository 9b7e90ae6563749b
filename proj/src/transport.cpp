#include "hjbt/transport.hpp"

#include <cmath>
#include <string>

#include "hjbt/errors.hpp"
#include "hjbt/operators.hpp"

namespace hjbt {

namespace {

void check_inputs(const ProblemSpec& p, const GridFunction& x0, const ControlPath& path, int N) {
    require_same_grid(p.grid, x0.spec);
    if (path.steps() < N)
        throw HorizonError("control path covers " + std::to_string(path.steps()) + " steps, " + std::to_string(N) +
                           " needed");
    if (path.alpha.size() != path.a.size()) throw ShapeError("control path has mismatched a/alpha lengths");
    for (int k = 0; k < N; ++k)
        if (path.alpha[k].size() != p.grid.M) throw ShapeError("alpha has wrong length");
}

// One transport step along characteristics with inflow value `inflow` and source f
// integrated by trapezoid in time.
void step(const ProblemSpec& p, double decay, const Eigen::VectorXd& x, const Eigen::VectorXd& f, double inflow,
          Eigen::VectorXd& out) {
    const int M = p.grid.M;
    const double h = 0.5 * p.dt;
    for (int i = M - 1; i >= 1; --i) out[i] = decay * x[i - 1] + h * (decay * f[i - 1] + f[i]);
    out[0] = inflow;
}

}  // namespace

GridFunction semigroup_apply(const ProblemSpec& p, const GridFunction& f, double s) {
    require_same_grid(p.grid, f.spec);
    const int N = p.steps(s);
    const int M = p.grid.M;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(M);
    for (int i = N; i < M; ++i) out[i] = f.values[i - N];
    return {p.grid, std::move(out)};
}

GridFunction solve_characteristics(const ProblemSpec& p, const GridFunction& x0, const ControlPath& path, double s) {
    const int N = p.steps(s);
    check_inputs(p, x0, path, N);
    const int M = p.grid.M;
    Eigen::VectorXd E(N + 2);
    for (int j = 0; j <= N + 1; ++j) E[j] = std::exp(-p.mu * j * p.dt);
    bool has_alpha = false;
    for (int k = 0; k < N && !has_alpha; ++k) has_alpha = path.alpha[k].cwiseAbs().maxCoeff() != 0.0;

    Eigen::VectorXd out(M);
    for (int i = 0; i < M; ++i) {
        int cells;
        double v;
        if (i >= N) {
            v = E[N] * x0.values[i - N];
            cells = N;
        } else {
            v = E[i] * path.a[N - 1 - i];
            cells = i;
        }
        if (has_alpha) {
            double acc = 0.0;
            for (int j = 0; j < cells; ++j) {
                const Eigen::VectorXd& al = path.alpha[N - 1 - j];
                acc += E[j] * al[i - j] + E[j + 1] * al[i - j - 1];
            }
            v += 0.5 * p.dt * acc;
        }
        out[i] = v;
    }
    return {p.grid, std::move(out)};
}

TrajectoryResult march_characteristics(const ProblemSpec& p, const GridFunction& x0, const ControlPath& path,
                                       double s) {
    const int N = p.steps(s);
    check_inputs(p, x0, path, N);
    const double decay = std::exp(-p.mu * p.dt);
    TrajectoryResult tr;
    tr.times.reserve(N + 1);
    tr.states.reserve(N + 1);
    tr.times.push_back(0.0);
    tr.states.push_back(x0);
    Eigen::VectorXd x = x0.values, nx(p.grid.M);
    for (int k = 0; k < N; ++k) {
        step(p, decay, x, path.alpha[k], path.a[k], nx);
        x.swap(nx);
        tr.times.push_back((k + 1) * p.dt);
        tr.states.emplace_back(p.grid, x);
    }
    return tr;
}

TrajectoryResult march_approx(const ProblemSpec& p, int n, const GridFunction& x0, const ControlPath& path,
                              double s) {
    if (n < 1) throw ConfigError("n must be >= 1");
    const int N = p.steps(s);
    check_inputs(p, x0, path, N);
    const Eigen::VectorXd eta = eta_n(p.grid, n, false).values;
    const double decay = std::exp(-p.mu * p.dt);
    TrajectoryResult tr;
    tr.times.push_back(0.0);
    tr.states.push_back(x0);
    Eigen::VectorXd x = x0.values, nx(p.grid.M), f(p.grid.M);
    for (int k = 0; k < N; ++k) {
        f = path.alpha[k] + (p.beta * path.a[k]) * eta;
        step(p, decay, x, f, 0.0, nx);
        x.swap(nx);
        tr.times.push_back((k + 1) * p.dt);
        tr.states.emplace_back(p.grid, x);
    }
    return tr;
}

ApproxResult solve_approx(const ProblemSpec& p, int n, const GridFunction& x0, const ControlPath& path, double s) {
    TrajectoryResult tr = march_approx(p, n, x0, path, s);
    return {tr.states.back(), 1.0 / n < 2.0 * p.dr()};
}

std::vector<ConvergenceRow> convergence_report(const ProblemSpec& p, const GridFunction& x0,
                                               const ControlPath& path, double T, const std::vector<int>& n_list) {
    for (int n : n_list)
        if (n < 1 || 1.0 / n < 2.0 * p.dr())
            throw ResolutionError("n = " + std::to_string(n) + " gives a boundary layer narrower than two cells");
    const TrajectoryResult exact = march_characteristics(p, x0, path, T);
    std::vector<ConvergenceRow> rows;
    for (int n : n_list) {
        const TrajectoryResult ap = march_approx(p, n, x0, path, T);
        double gap = 0.0;
        for (std::size_t k = 0; k < exact.states.size(); ++k) {
            GridFunction d(p.grid, ap.states[k].values - exact.states[k].values);
            gap = std::max(gap, l2_norm(d));
        }
        rows.push_back({n, gap});
    }
    return rows;
}

double uniform_continuity_bound(const ProblemSpec& p, const ControlSets& sets, const GridFunction& x0, double s,
                                double dom_tol_rel) {
    require_same_grid(p.grid, x0.spec);
    if (!in_domain_astar(x0, domain_tol(x0, dom_tol_rel)))
        throw DomainError("initial state is not in the D(A*) proxy: x(sbar) = " + std::to_string(x0.back()));
    if (s < 0.0 || s > 1.0) throw DomainError("the majorant is stated for 0 <= s <= 1");
    const int N = p.steps(s);
    const double em = std::exp(-p.mu * s);
    Eigen::VectorXd d(p.grid.M);
    for (int i = 0; i < p.grid.M; ++i) d[i] = em * x0.values[std::max(i - N, 0)] - x0.values[i];
    const double shift_term = 2.0 * inner_product(GridFunction(p.grid, d), GridFunction(p.grid, d));
    const double eg = std::exp(std::abs(p.mu));
    const double alpha_term = 2.0 * s * s * p.sbar * std::pow(eg * sets.lambda_norm(), 2);
    const double layer = eg * sets.gamma_norm() + sup_norm(x0) + s * eg * sets.lambda_norm();
    return std::sqrt(shift_term + alpha_term + s * p.beta * layer * layer);
}

}  // namespace hjbt
