#pragma once

#include <vector>

#include "hjbt/controls.hpp"
#include "hjbt/grid.hpp"
#include "hjbt/problem.hpp"

namespace hjbt {

struct TrajectoryResult {
    std::vector<double> times;
    std::vector<GridFunction> states;
};

/// Shift right by beta*s with zero fill (exact node copy).
GridFunction semigroup_apply(const ProblemSpec& p, const GridFunction& f, double s);

/// Closed-form characteristics solution at time s, evaluated node by node.
GridFunction solve_characteristics(const ProblemSpec& p, const GridFunction& x0, const ControlPath& path, double s);

/// Same solution advanced one dt step at a time; returns every step of [0, s].
TrajectoryResult march_characteristics(const ProblemSpec& p, const GridFunction& x0, const ControlPath& path,
                                       double s);

struct ApproxResult {
    GridFunction state;
    /// The boundary layer 1/n is narrower than two grid cells.
    bool grid_limited = false;
};

/// Bounded-input dynamics dx/ds = Ax - mu x + alpha + beta C_n^* a, zero inflow.
ApproxResult solve_approx(const ProblemSpec& p, int n, const GridFunction& x0, const ControlPath& path, double s);
TrajectoryResult march_approx(const ProblemSpec& p, int n, const GridFunction& x0, const ControlPath& path,
                              double s);

struct ConvergenceRow {
    int n = 0;
    double gap = 0.0;  // sup over the time grid of the L2 gap
};

std::vector<ConvergenceRow> convergence_report(const ProblemSpec& p, const GridFunction& x0,
                                               const ControlPath& path, double T, const std::vector<int>& n_list);

/// Control-independent majorant of |x(s) - x0| for x0 in the D(A*) proxy, 0 <= s <= 1.
double uniform_continuity_bound(const ProblemSpec& p, const ControlSets& sets, const GridFunction& x0, double s,
                                double dom_tol_rel = 1e-8);

}  // namespace hjbt
