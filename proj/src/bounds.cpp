#include <algorithm>
#include <cmath>

#include "hjbt/control.hpp"
#include "hjbt/errors.hpp"

namespace hjbt {

GronwallReport trajectory_b_gronwall(const ProblemSpec& p, const BFactorization& bf, const GridFunction& x0,
                                     const GridFunction& y0, const ControlPath& path, double T, double slack) {
    require_same_grid(x0.spec, y0.spec);
    require_same_grid(p.grid, x0.spec);
    const TrajectoryResult tx = march_characteristics(p, x0, path, T);
    const TrajectoryResult ty = march_characteristics(p, y0, path, T);
    GronwallReport rep;
    rep.c_T = std::exp(2.0 * (1.0 + std::abs(p.mu)) * T);
    rep.rhs = rep.c_T * bf.quad(x0.values - y0.values);
    const int M = p.grid.M;
    const int exit_step = M - 1;  // sbar / beta in dt steps
    for (std::size_t k = 0; k < tx.states.size(); ++k) {
        const Eigen::VectorXd d = tx.states[k].values - ty.states[k].values;
        rep.lhs = std::max(rep.lhs, bf.quad(d));
        const int step = static_cast<int>(k);
        if (step > exit_step && d.cwiseAbs().maxCoeff() != 0.0) rep.forgets = false;
        if (step == exit_step && M > 1 && d.head(M - 1).cwiseAbs().maxCoeff() != 0.0) rep.forgets = false;
    }
    rep.pass = rep.lhs <= rep.rhs * (1.0 + slack) + 1e-300;
    return rep;
}

double value_b_lipschitz_constant(const ProblemSpec& p, const RunningCost& cost) {
    return p.sbar * std::exp(2.0 * (1.0 + std::abs(p.mu)) * p.sbar / p.beta) * cost.c_l;
}

LipschitzReport value_b_lipschitz_probe(const ProblemSpec& p, const ControlSets& sets, const BFactorization& bf,
                                        const RunningCost& cost,
                                        const std::vector<std::pair<GridFunction, GridFunction>>& pairs,
                                        const Lattice& lat, double T, const ValueOptions& opt) {
    LipschitzReport rep;
    rep.constant = value_b_lipschitz_constant(p, cost);
    rep.mode_mismatch = cost.l1_mode == L1Mode::squared;
    rep.pass = true;
    const ValueEstimator est(p, sets, cost, lat, T, opt);
    for (const auto& [x, y] : pairs) {
        const ValueEstimate vx = est.at(x), vy = est.at(y);
        LipschitzPair lp;
        lp.b_distance = std::sqrt(std::max(0.0, bf.quad(x.values - y.values)));
        const double d = rep.mode_mismatch ? lp.b_distance * lp.b_distance : lp.b_distance;
        lp.lhs = std::abs(vx.value - vy.value);
        lp.bound = rep.constant * d + vx.gap() + vy.gap();
        lp.pass = lp.lhs <= lp.bound;
        rep.pass = rep.pass && lp.pass;
        rep.pairs.push_back(lp);
    }
    return rep;
}

}  // namespace hjbt
