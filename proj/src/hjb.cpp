#include "hjbt/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "hjbt/errors.hpp"

namespace hjbt {

const char* to_string(AlphaClass c) { return c == AlphaClass::constant ? "constant" : "pointwise"; }

AlphaClass alpha_class_from_string(const std::string& s) {
    if (s == "constant") return AlphaClass::constant;
    if (s == "pointwise") return AlphaClass::pointwise;
    throw ConfigError("unknown alpha class '" + s + "'");
}

const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::pass: return "PASS";
        case Outcome::fail: return "FAIL";
        default: return "INCONCLUSIVE";
    }
}

// ---------------------------------------------------------------------------------------------
// Hamiltonian

HamiltonianResult hamiltonian_lattice(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost,
                                      const GridFunction& x, const GridFunction& p_boundary,
                                      const GridFunction& p_alpha, int n) {
    if (n < 1) throw ConfigError("lattice size must be >= 1");
    const double b = p.beta * delta0(p_boundary, 1e-6);
    const double S = p.grid.weights().dot(p_alpha.values);
    auto pick = [n](double lo, double hi, int i) {
        if (n == 1 || lo == hi) return 0.5 * (lo + hi);
        return i == n - 1 ? hi : lo + (hi - lo) * i / (n - 1);
    };
    HamiltonianResult best;
    best.value = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double a = pick(sets.gamma_lo, sets.gamma_hi, i);
            const double al = pick(sets.lambda_lo, sets.lambda_hi, j);
            const Eigen::VectorXd alpha = Eigen::VectorXd::Constant(p.grid.M, al);
            const double v = b * a + al * S + cost(x.values, alpha, a);
            if (v < best.value) best = {v, a, alpha, 0.0};
        }
    return best;
}

HamiltonianResult hamiltonian(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost,
                              const GridFunction& x, const GridFunction& p_boundary, const GridFunction& p_alpha,
                              AlphaClass cls, double dom_tol_rel) {
    require_same_grid(p.grid, x.spec);
    require_same_grid(p.grid, p_boundary.spec);
    require_same_grid(p.grid, p_alpha.spec);
    if (!cost.control_independent) {
        if (cls != AlphaClass::constant)
            throw ConfigError("pointwise distributed controls need a control-independent cost");
        HamiltonianResult fine = hamiltonian_lattice(p, sets, cost, x, p_boundary, p_alpha, 101);
        const HamiltonianResult coarse = hamiltonian_lattice(p, sets, cost, x, p_boundary, p_alpha, 51);
        fine.gap = coarse.value - fine.value;
        return fine;
    }
    // Linear in (alpha, a) plus a control-free cost: minimize at the box vertices.
    const double b = p.beta * delta0(p_boundary, dom_tol_rel);
    HamiltonianResult h;
    h.a = b >= 0.0 ? sets.gamma_lo : sets.gamma_hi;
    const Eigen::VectorXd w = p.grid.weights();
    if (cls == AlphaClass::constant) {
        const double S = w.dot(p_alpha.values);
        h.alpha = Eigen::VectorXd::Constant(p.grid.M, S >= 0.0 ? sets.lambda_lo : sets.lambda_hi);
    } else {
        h.alpha.resize(p.grid.M);
        for (int i = 0; i < p.grid.M; ++i) h.alpha[i] = p_alpha[i] >= 0.0 ? sets.lambda_lo : sets.lambda_hi;
    }
    h.value = b * h.a + w.dot(p_alpha.values.cwiseProduct(h.alpha)) + cost(x.values, h.alpha, h.a);
    return h;
}

// ---------------------------------------------------------------------------------------------
// Test functions

Test1Function Test1Function::zero(const GridSpec& g) {
    Test1Function f;
    f.grid_ = g;
    return f;
}

Test1Function Test1Function::quadratic_b(std::shared_ptr<const BFactorization> bf, GridFunction p, double scale) {
    if (!bf) throw ConfigError("quadratic test function needs B");
    require_same_grid(bf->grid(), p.spec);
    Test1Function f;
    f.family_ = Family::quadratic_b;
    f.grid_ = bf->grid();
    f.scale_ = scale;
    f.bf_ = std::move(bf);
    f.p_ = std::move(p);
    return f;
}

Test1Function Test1Function::cylinder(const ProblemSpec& p, std::vector<GridFunction> dirs, double h0,
                                      Eigen::VectorXd h1, Eigen::MatrixXd h2, double dom_tol_rel) {
    const int k = static_cast<int>(dirs.size());
    if (h1.size() != k || h2.rows() != k || h2.cols() != k) throw ShapeError("cylinder coefficients do not match directions");
    Test1Function f;
    f.family_ = Family::cylinder;
    f.grid_ = p.grid;
    for (const auto& d : dirs) {
        require_same_grid(p.grid, d.spec);
        f.astar_dirs_.push_back(apply_Astar(p, d, dom_tol_rel));
    }
    f.dirs_ = std::move(dirs);
    f.h0_ = h0;
    f.h1_ = std::move(h1);
    f.h2_ = 0.5 * (h2 + h2.transpose());
    return f;
}

Test1Function Test1Function::negated() const {
    Test1Function f = *this;
    f.scale_ = -scale_;
    f.h0_ = -h0_;
    f.h1_ = -h1_;
    f.h2_ = -h2_;
    return f;
}

double Test1Function::value(const GridFunction& x) const {
    require_same_grid(grid_, x.spec);
    switch (family_) {
        case Family::zero: return 0.0;
        case Family::quadratic_b: {
            const Eigen::VectorXd w = grid_.weights();
            return scale_ * (bf_->quad(x.values) + x.values.dot(w.cwiseProduct(bf_->apply(p_.values))));
        }
        case Family::cylinder: {
            Eigen::VectorXd z(dirs_.size());
            for (std::size_t i = 0; i < dirs_.size(); ++i) z[i] = inner_product(x, dirs_[i]);
            return h0_ + h1_.dot(z) + 0.5 * z.dot(h2_ * z);
        }
    }
    return 0.0;
}

GridFunction Test1Function::gradient(const GridFunction& x) const {
    require_same_grid(grid_, x.spec);
    switch (family_) {
        case Family::zero: return GridFunction::zeros(grid_);
        case Family::quadratic_b:
            return {grid_, scale_ * bf_->apply(2.0 * x.values + p_.values)};
        case Family::cylinder: {
            Eigen::VectorXd z(dirs_.size());
            for (std::size_t i = 0; i < dirs_.size(); ++i) z[i] = inner_product(x, dirs_[i]);
            const Eigen::VectorXd c = h1_ + h2_ * z;
            GridFunction g = GridFunction::zeros(grid_);
            for (std::size_t i = 0; i < dirs_.size(); ++i) g.values += c[i] * dirs_[i].values;
            return g;
        }
    }
    return GridFunction::zeros(grid_);
}

GridFunction Test1Function::astar_gradient(const GridFunction& x) const {
    require_same_grid(grid_, x.spec);
    switch (family_) {
        case Family::zero: return GridFunction::zeros(grid_);
        case Family::quadratic_b: {
            GridFunction y = bf_->astar_b({grid_, 2.0 * x.values + p_.values});
            y.values *= scale_;
            return y;
        }
        case Family::cylinder: {
            Eigen::VectorXd z(dirs_.size());
            for (std::size_t i = 0; i < dirs_.size(); ++i) z[i] = inner_product(x, dirs_[i]);
            const Eigen::VectorXd c = h1_ + h2_ * z;
            GridFunction g = GridFunction::zeros(grid_);
            for (std::size_t i = 0; i < dirs_.size(); ++i) g.values += c[i] * astar_dirs_[i].values;
            return g;
        }
    }
    return GridFunction::zeros(grid_);
}

Test2Function Test2Function::quadratic(double c) {
    if (!(c >= 0.0)) throw ConfigError("test2 coefficient must be >= 0");
    return {Kind::quadratic, c};
}

Test2Function Test2Function::soft(double c) {
    if (!(c >= 0.0)) throw ConfigError("test2 coefficient must be >= 0");
    return {Kind::soft, c};
}

double Test2Function::g0(double t) const {
    return kind == Kind::quadratic ? c * t * t : c * (std::sqrt(1.0 + t * t) - 1.0);
}

double Test2Function::g0_prime(double t) const {
    return kind == Kind::quadratic ? 2.0 * c * t : c * t / std::sqrt(1.0 + t * t);
}

double Test2Function::radial_quotient(const GridFunction& x) const {
    const double t = l2_norm(x);
    return kind == Kind::quadratic ? 2.0 * c : c / std::sqrt(1.0 + t * t);
}

GridFunction Test2Function::gradient(const GridFunction& x) const {
    return {x.spec, radial_quotient(x) * x.values};
}

// ---------------------------------------------------------------------------------------------
// Lyapunov identity and rate checks

LyapunovReport lyapunov_identity_residual(const ProblemSpec& p, const Test1Function& phi, const GridFunction& x0,
                                          const ControlPath& path, double s, double dom_tol_rel) {
    const int N = p.steps(s);
    const TrajectoryResult tr = march_characteristics(p, x0, path, s);
    const Eigen::VectorXd w = p.grid.weights();
    std::vector<Eigen::VectorXd> grad(N + 1);
    std::vector<double> drift(N + 1), d0(N + 1);
    for (int k = 0; k <= N; ++k) {
        const GridFunction& x = tr.states[k];
        const GridFunction g = phi.gradient(x);
        try {
            d0[k] = delta0(g, dom_tol_rel);
        } catch (const DomainError& e) {
            throw DomainError("gradient leaves the D(A*) proxy at t = " + std::to_string(tr.times[k]) + ": " +
                              e.what());
        }
        drift[k] = w.dot(phi.astar_gradient(x).values.cwiseProduct(x.values)) - p.mu * w.dot(g.values.cwiseProduct(x.values));
        grad[k] = g.values;
    }
    // The boundary input at node t_k is the inflow trace x(t_k, 0): a_{k-1} for k >= 1 since a is
    // left-continuous, and x0(0) at t = 0. alpha is constant on each closed step.
    auto rate = [&](int k, int step) {
        double v = drift[k] + p.beta * d0[k] * tr.states[k].front();
        if (path.alpha[step].size() > 0) v += w.dot(grad[k].cwiseProduct(path.alpha[step]));
        return v;
    };
    LyapunovReport rep;
    for (int j = 0; j < N; ++j) rep.rhs += 0.5 * p.dt * (rate(j, j) + rate(j + 1, j));
    rep.lhs = phi.value(tr.states[N]) - phi.value(x0);
    rep.residual = std::abs(rep.lhs - rep.rhs);
    return rep;
}

std::vector<ConstantControl> vertex_controls(const ControlSets& sets) {
    std::vector<ConstantControl> out;
    for (double a : {sets.gamma_lo, sets.gamma_hi})
        for (double al : {sets.lambda_lo, sets.lambda_hi}) {
            const ConstantControl c{a, al};
            const bool dup = std::any_of(out.begin(), out.end(),
                                         [&](const ConstantControl& o) { return o.a == c.a && o.alpha == c.alpha; });
            if (!dup) out.push_back(c);
        }
    return out;
}

namespace {

/// Runs expansion(x0, control, s) -> lhs over the family for each s (sorted decreasing).
template <class Expansion>
RateReport rate_table(const std::vector<ConstantControl>& controls, std::vector<double> s_list, double bound,
                      double noise, Expansion&& expansion) {
    if (controls.empty() || s_list.empty()) throw ConfigError("rate check needs controls and step sizes");
    std::sort(s_list.begin(), s_list.end(), std::greater<>());
    RateReport rep;
    rep.pass = true;
    double prev_pos = std::numeric_limits<double>::infinity();
    for (double s : s_list) {
        RateRow row;
        row.s = s;
        row.bound = bound;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const ConstantControl& c : controls) {
            const double v = expansion(c, s);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        row.lhs = hi;
        row.spread = hi - lo;
        row.excess = hi - bound;
        const double pos = std::max(row.excess, 0.0);
        if (pos > prev_pos + noise * (1.0 + std::abs(bound) + hi)) rep.pass = false;
        prev_pos = pos;
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace

RateReport test2_rate_check(const ProblemSpec& p, const ControlSets& sets, const Test2Function& g,
                            const GridFunction& x0, const std::vector<ConstantControl>& controls,
                            const std::vector<double>& s_list, double noise) {
    require_same_grid(p.grid, x0.spec);
    const Eigen::VectorXd w = p.grid.weights();
    const GridFunction grad = g.gradient(x0);
    const double g_x0 = g.value(x0);
    const double mu_term = -p.mu * w.dot(grad.values.cwiseProduct(x0.values));
    const double grad_mass = w.dot(grad.values);
    const double bound = g.radial_quotient(x0) * p.beta * sets.gamma_norm() * sets.gamma_norm() / 2.0;
    return rate_table(controls, s_list, bound, noise, [&](const ConstantControl& c, double s) {
        const int N = p.steps(s);
        const GridFunction xs = solve_characteristics(p, x0, ControlPath::constant(p, N, c.a, c.alpha), s);
        return std::abs((g.value(xs) - g_x0) / s - c.alpha * grad_mass - mu_term);
    });
}

RateReport test1_rate_check(const ProblemSpec& p, const Test1Function& phi, const GridFunction& x0,
                            const std::vector<ConstantControl>& controls, const std::vector<double>& s_list,
                            double noise) {
    require_same_grid(p.grid, x0.spec);
    const Eigen::VectorXd w = p.grid.weights();
    const GridFunction grad = phi.gradient(x0);
    const double d0 = delta0(grad, 1e-6);
    const double phi_x0 = phi.value(x0);
    const double drift = w.dot(phi.astar_gradient(x0).values.cwiseProduct(x0.values)) -
                         p.mu * w.dot(grad.values.cwiseProduct(x0.values));
    const double grad_mass = w.dot(grad.values);
    return rate_table(controls, s_list, 0.0, noise, [&](const ConstantControl& c, double s) {
        const int N = p.steps(s);
        const GridFunction xs = solve_characteristics(p, x0, ControlPath::constant(p, N, c.a, c.alpha), s);
        // Time average of the inflow trace by the trapezoid rule: x0(0) at t = 0, then a.
        const double a_avg = c.a - (c.a - x0.front()) * p.dt / (2.0 * s);
        return std::abs((phi.value(xs) - phi_x0) / s - c.alpha * grad_mass - drift - p.beta * d0 * a_avg);
    });
}

// ---------------------------------------------------------------------------------------------
// Gradient range

GradientBoundReport gradient_b_bound_check(const BFactorization& bf, const GridFunction& grad, double C, int n_random,
                                           unsigned long long seed, double slack) {
    require_same_grid(bf.grid(), grad.spec);
    const int M = bf.grid().M;
    const Eigen::VectorXd& w = bf.w;
    const double scale = std::sqrt(w.dot(grad.values.cwiseAbs2()));
    GradientBoundReport rep;
    auto ratio = [&](const Eigen::VectorXd& om) {
        const double num = std::abs(w.dot(grad.values.cwiseProduct(om)));
        const double den = C * std::sqrt(std::max(0.0, bf.quad(om)));
        ++rep.directions;
        if (num <= 1e-13 * (1.0 + scale) * std::sqrt(w.dot(om.cwiseAbs2()))) return 0.0;
        return den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
    };
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    for (int k = 0; k < n_random; ++k) {
        Eigen::VectorXd om(M);
        for (int i = 0; i < M; ++i) om[i] = nd(rng);
        rep.worst_ratio = std::max(rep.worst_ratio, ratio(om));
    }
    for (int i = 0; i < M; ++i) rep.worst_ratio = std::max(rep.worst_ratio, ratio(Eigen::VectorXd::Unit(M, i)));
    int smallest = 0;
    while (smallest < M && bf.eigenvalues[smallest] <= 0.0) ++smallest;
    for (int i = smallest; i < M; ++i) {
        const double r = ratio(bf.eigenfunction(i).values);
        if (i == smallest) rep.near_kernel_ratio = r;
        rep.worst_ratio = std::max(rep.worst_ratio, r);
    }
    rep.pass = rep.worst_ratio <= 1.0 + slack;
    return rep;
}

// ---------------------------------------------------------------------------------------------
// Candidates

Candidate Candidate::constant(double c) {
    return Candidate(
        "constant",
        [c](const GridFunction&, const std::vector<GridFunction>&) -> SliceFn {
            return [c](const Eigen::VectorXd&) { return CandidateValue{c, 0.0}; };
        },
        [c](const GridFunction&) { return CandidateValue{c, 0.0}; });
}

Candidate Candidate::value_function(std::shared_ptr<const ValueEstimator> est) {
    return Candidate(
        "value",
        [est](const GridFunction& anchor, const std::vector<GridFunction>& dirs) -> SliceFn {
            auto sl = std::make_shared<ValueModel::Slice>(est->fine().slice(anchor, dirs));
            return [est, sl](const Eigen::VectorXd& t) { return CandidateValue{sl->eval(t).value, 0.0}; };
        },
        [est](const GridFunction& x) {
            const ValueEstimate v = est->at(x);
            return CandidateValue{v.value, v.gap()};
        });
}

Candidate Candidate::with_spike(const Candidate& u, GridFunction center, double amp, double width) {
    auto spike = [center, amp, width](const GridFunction& x) {
        const double d = l2_norm(GridFunction{x.spec, x.values - center.values});
        return amp * std::exp(-d * d / (width * width));
    };
    return Candidate(
        u.name() + "+spike",
        [u, spike](const GridFunction& anchor, const std::vector<GridFunction>& dirs) -> SliceFn {
            SliceFn base = u.on_slice(anchor, dirs);
            return [base, spike, anchor, dirs](const Eigen::VectorXd& t) {
                GridFunction x = anchor;
                for (std::size_t i = 0; i < dirs.size(); ++i) x.values += t[i] * dirs[i].values;
                CandidateValue v = base(t);
                v.value += spike(x);
                return v;
            };
        },
        [u, spike](const GridFunction& x) {
            CandidateValue v = u.at(x);
            v.value += spike(x);
            return v;
        });
}

// ---------------------------------------------------------------------------------------------
// Viscosity checks

std::vector<GridFunction> top_eigen_directions(const BFactorization& bf, int d) {
    const int M = bf.grid().M;
    if (d < 0 || d > M) throw ConfigError("slice dimension out of range");
    std::vector<GridFunction> out;
    for (int i = 0; i < d; ++i) out.push_back(bf.eigenfunction(M - 1 - i));
    return out;
}

GridFunction seed_anchor(const BFactorization& bf, int seed, int d_slice, double amplitude) {
    std::mt19937_64 rng(static_cast<unsigned long long>(seed) * 0x9E3779B97F4A7C15ULL + 17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double c[4];
    for (double& ci : c) ci = u(rng);
    const GridSpec& g = bf.grid();
    const GridFunction raw = GridFunction::sample(g, [&](double r) {
        const double z = r / g.sbar;
        return (g.sbar - r) * (c[0] + c[1] * z + c[2] * z * z + c[3] * z * z * z);
    });
    GridFunction out = GridFunction::zeros(g);
    for (const GridFunction& e : top_eigen_directions(bf, d_slice)) out.values += inner_product(raw, e) * e.values;
    const double n = l2_norm(out);
    if (n > 0.0) out.values *= amplitude / n;
    return out;
}

namespace {

/// Compass search for a local max of F, halving the step when no move improves.
ExtremumReport pattern_search(const std::function<double(const Eigen::VectorXd&)>& F, int d,
                              const ViscosityOptions& opt) {
    ExtremumReport rep;
    rep.t = Eigen::VectorXd::Zero(d);
    if (opt.max_evals <= 0) return rep;
    double f = F(rep.t);
    rep.evals = 1;
    rep.trace.push_back(f);
    double h = opt.step0;
    while (h >= opt.step_min && rep.evals < opt.max_evals) {
        double best = f;
        Eigen::VectorXd best_t = rep.t;
        for (int i = 0; i < d && rep.evals < opt.max_evals; ++i)
            for (double sg : {1.0, -1.0}) {
                if (rep.evals >= opt.max_evals) break;
                Eigen::VectorXd t = rep.t;
                t[i] += sg * h;
                const double v = F(t);
                ++rep.evals;
                if (v > best) {
                    best = v;
                    best_t = t;
                }
            }
        if (best > f) {
            f = best;
            rep.t = best_t;
            rep.trace.push_back(f);
        } else {
            h *= 0.5;
        }
    }
    rep.objective = f;
    rep.final_step = h;
    if (h >= opt.step_min) return rep;  // budget ran out first
    // One-sided slopes at the final step; a converged compass search leaves none positive.
    const double hs = 2.0 * h;
    double slope = 0.0;
    for (int i = 0; i < d; ++i)
        for (double sg : {1.0, -1.0}) {
            Eigen::VectorXd t = rep.t;
            t[i] += sg * hs;
            slope = std::max(slope, (F(t) - f) / hs);
            ++rep.evals;
        }
    rep.stationarity = slope;
    rep.located = slope <= opt.stationarity_tol;
    return rep;
}

struct HjbTerms {
    double lhs = 0.0;
    double a = 0.0;
    double alpha = 0.0;
};

/// rho u - <A* grad phi, x> + mu <grad phi + grad g, x> - H(x, grad phi, grad phi + grad g).
HjbTerms hjb_expression(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost, double u,
                        const GridFunction& x, const Test1Function& phi, const Test2Function& g, double sign,
                        AlphaClass cls) {
    const Eigen::VectorXd w = p.grid.weights();
    GridFunction gphi = phi.gradient(x);
    GridFunction aphi = phi.astar_gradient(x);
    GridFunction gg = g.gradient(x);
    gphi.values *= sign;
    aphi.values *= sign;
    gg.values *= sign;
    const GridFunction gsum{x.spec, gphi.values + gg.values};
    const HamiltonianResult h = hamiltonian(p, sets, cost, x, gphi, gsum, cls);
    HjbTerms t;
    t.lhs = p.rho * u - w.dot(aphi.values.cwiseProduct(x.values)) + p.mu * w.dot(gsum.values.cwiseProduct(x.values)) -
            h.value;
    t.a = h.a;
    t.alpha = h.alpha.size() > 0 ? h.alpha.mean() : 0.0;
    return t;
}

ViscosityReport viscosity_check(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost,
                                const BFactorization& bf, const Candidate& u, const Test1Function& phi,
                                const Test2Function& g, int seed, const ViscosityOptions& opt, bool sub) {
    ViscosityReport rep;
    rep.check = sub ? "subsolution" : "supersolution";
    rep.seed = seed;
    const GridFunction anchor = seed_anchor(bf, seed, opt.d_slice);
    const std::vector<GridFunction> dirs = top_eigen_directions(bf, opt.d_slice);
    const Candidate::SliceFn us = u.on_slice(anchor, dirs);
    auto point = [&](const Eigen::VectorXd& t) {
        GridFunction x = anchor;
        for (int i = 0; i < opt.d_slice; ++i) x.values += t[i] * dirs[i].values;
        return x;
    };
    // Subsolution: max of u - (phi + g). Supersolution: min of u + (phi + g).
    const double sg = sub ? 1.0 : -1.0;
    auto objective = [&](const Eigen::VectorXd& t) {
        const GridFunction x = point(t);
        const double psi = phi.value(x) + g.value(x);
        return sg * us(t).value - psi;
    };
    rep.extremum = pattern_search(objective, opt.d_slice, opt);
    rep.extremum.x = point(rep.extremum.t);
    if (!rep.extremum.located) {
        rep.outcome = Outcome::inconclusive;
        return rep;
    }
    const GridFunction& x = rep.extremum.x;
    const CandidateValue uv = u.at(x);
    const double remainder = g.radial_quotient(x) * p.beta * sets.gamma_norm() * sets.gamma_norm() / 2.0;
    const HjbTerms terms = hjb_expression(p, sets, cost, uv.value, x, phi, g, sg, opt.alpha_class);
    rep.lhs = terms.lhs;
    rep.rhs = sub ? remainder : -remainder;

    rep.slack_value = p.rho * uv.gap;
    // Location uncertainty: variation of the expression over the final search stencil.
    const double hs = 2.0 * rep.extremum.final_step;
    double var = 0.0;
    for (int i = 0; i < opt.d_slice; ++i)
        for (double dir : {1.0, -1.0}) {
            Eigen::VectorXd t = rep.extremum.t;
            t[i] += dir * hs;
            const GridFunction y = point(t);
            const double uy = us(t).value;
            const double ry = g.radial_quotient(y) * p.beta * sets.gamma_norm() * sets.gamma_norm() / 2.0;
            const HjbTerms ty = hjb_expression(p, sets, cost, uy, y, phi, g, sg, opt.alpha_class);
            // Compare the margins, since the remainder also moves with x.
            const double m0 = sub ? terms.lhs - remainder : terms.lhs + remainder;
            const double m1 = sub ? ty.lhs - ry : ty.lhs + ry;
            var = std::max(var, std::abs(m1 - m0));
        }
    rep.slack_stationarity = var;
    // Discretization: Lyapunov residual rate for the signed phi under the minimizing control.
    if (phi.family() != Test1Function::Family::zero && opt.lyapunov_window > 0.0) {
        const double s = opt.lyapunov_window;
        const int N = p.steps(s);
        const Test1Function sphi = sub ? phi : phi.negated();
        const LyapunovReport ly =
            lyapunov_identity_residual(p, sphi, x, ControlPath::constant(p, N, terms.a, terms.alpha), s);
        rep.slack_discretization = ly.residual / s;
    }
    rep.slack = rep.slack_value + rep.slack_stationarity + rep.slack_discretization;
    const bool ok = sub ? rep.lhs - rep.rhs <= rep.slack : rep.lhs - rep.rhs >= -rep.slack;
    rep.outcome = ok ? Outcome::pass : Outcome::fail;
    return rep;
}

}  // namespace

ViscosityReport subsolution_residual(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost,
                                     const BFactorization& bf, const Candidate& u, const Test1Function& phi,
                                     const Test2Function& g, int seed, const ViscosityOptions& opt) {
    return viscosity_check(p, sets, cost, bf, u, phi, g, seed, opt, true);
}

ViscosityReport supersolution_residual(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost,
                                       const BFactorization& bf, const Candidate& v, const Test1Function& phi,
                                       const Test2Function& g, int seed, const ViscosityOptions& opt) {
    return viscosity_check(p, sets, cost, bf, v, phi, g, seed, opt, false);
}

// ---------------------------------------------------------------------------------------------
// Comparison

ComparisonReport comparison_probe(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost,
                                  const std::vector<GridFunction>& points, const ValueConfig& c1,
                                  const ValueConfig& c2) {
    const ValueEstimator e1(p, sets, cost, c1.lattice, c1.horizon, c1.options);
    const ValueEstimator e2(p, sets, cost, c2.lattice, c2.horizon, c2.options);
    ComparisonReport rep;
    rep.pass = true;
    for (const GridFunction& x : points) {
        const ValueEstimate v1 = e1.at(x), v2 = e2.at(x);
        ComparisonPoint cp{v1.value, v1.gap(), v2.value, v2.gap(), false};
        cp.pass = std::abs(cp.v1 - cp.v2) <= cp.gap1 + cp.gap2;
        rep.pass = rep.pass && cp.pass;
        rep.points.push_back(cp);
    }
    return rep;
}

}  // namespace hjbt
