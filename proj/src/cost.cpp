#include <cmath>
#include <limits>
#include <random>

#include "hjbt/control.hpp"
#include "hjbt/errors.hpp"

namespace hjbt {

const char* to_string(L1Mode m) { return m == L1Mode::squared ? "squared" : "unsquared"; }

L1Mode l1_mode_from_string(const std::string& s) {
    if (s == "squared") return L1Mode::squared;
    if (s == "unsquared") return L1Mode::unsquared;
    throw ConfigError("unknown l1_mode '" + s + "'");
}

RunningCost constant_cost(double c) {
    RunningCost L;
    L.kind = RunningCost::Kind::constant;
    L.family = "constant";
    L.c_l = std::abs(c);
    L.constant_value = c;
    L.fn = [c](const Eigen::VectorXd&, const Eigen::VectorXd&, double) { return c; };
    return L;
}

RunningCost clipped_b_energy_cost(std::shared_ptr<const BFactorization> bf, double c_l, L1Mode mode) {
    if (!(c_l >= 0.0) || !std::isfinite(c_l)) throw ConfigError("C_L must be finite and nonnegative");
    if (!bf) throw ConfigError("clipped B-energy cost needs a B factorization");
    RunningCost L;
    L.kind = RunningCost::Kind::clipped_b_energy;
    L.family = "clipped_b_energy";
    L.c_l = c_l;
    L.l1_mode = mode;
    L.cap = std::min(c_l, 0.25 * c_l * c_l);
    L.bf = bf;
    const double cap = L.cap;
    const BFactorization* b = bf.get();
    L.fn = [cap, b](const Eigen::VectorXd& x, const Eigen::VectorXd&, double) { return std::min(cap, b->quad(x)); };
    return L;
}

RunningCost l2_energy_cost(const GridSpec& g, double claimed_c_l) {
    const Eigen::VectorXd w = g.weights();
    return generic_cost(
        "l2_energy", [w](const Eigen::VectorXd& x, const Eigen::VectorXd&, double) { return x.dot(w.cwiseProduct(x)); },
        claimed_c_l, L1Mode::unsquared, true);
}

RunningCost generic_cost(std::string family, RunningCost::Fn fn, double c_l, L1Mode mode, bool control_independent) {
    RunningCost L;
    L.kind = RunningCost::Kind::generic;
    L.family = std::move(family);
    L.c_l = c_l;
    L.l1_mode = mode;
    L.control_independent = control_independent;
    L.fn = std::move(fn);
    return L;
}

CostAudit validate_cost(const RunningCost& cost, const BFactorization& bf, const ControlSets& sets, int n_samples,
                        unsigned long long seed, bool throw_on_violation) {
    if (n_samples < 1) throw ConfigError("validate_cost needs at least one sample");
    const GridSpec& g = bf.grid();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    auto unit = [&] {
        Eigen::VectorXd v(g.M);
        for (int i = 0; i < g.M; ++i) v[i] = nd(rng);
        return Eigen::VectorXd(v / std::sqrt(v.dot(bf.w.cwiseProduct(v))));
    };
    auto in = [&](double lo, double hi) { return lo + (hi - lo) * uni(rng); };

    CostAudit rep;
    rep.samples = n_samples;
    const double C = cost.c_l;
    for (int s = 0; s < n_samples; ++s) {
        const Eigen::VectorXd x = (s == 0 ? 0.0 : std::pow(10.0, in(-2.0, 2.0))) * unit();
        Eigen::VectorXd y;
        if (s % 2 == 0)
            y = std::pow(10.0, in(-2.0, 2.0)) * unit();
        else
            y = x + std::pow(10.0, in(-4.0, 0.0)) * unit();
        Eigen::VectorXd alpha(g.M);
        for (int i = 0; i < g.M; ++i) alpha[i] = in(sets.lambda_lo, sets.lambda_hi);
        const double a = in(sets.gamma_lo, sets.gamma_hi);

        const double Lx = cost(x, alpha, a), Ly = cost(y, alpha, a);
        for (double Lv : {Lx, Ly}) {
            const double ratio = C > 0.0 ? std::abs(Lv) / C : (Lv == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
            rep.worst_l2_ratio = std::max(rep.worst_l2_ratio, ratio);
            if (std::abs(Lv) > C * (1.0 + 1e-12) + 1e-300) rep.l2_pass = false;
        }
        const Eigen::VectorXd d = x - y;
        const double bn = std::sqrt(std::max(0.0, bf.quad(d)));
        const double dist = cost.l1_mode == L1Mode::squared ? bn * bn : bn;
        const double dL = std::abs(Lx - Ly);
        const double allow = C * dist * (1.0 + 1e-9) + 1e-13 * (1.0 + std::abs(Lx));
        if (dL > allow) rep.l1_pass = false;
        if (dL > 0.0)
            rep.worst_l1_ratio =
                std::max(rep.worst_l1_ratio, C * dist > 0.0 ? dL / (C * dist) : std::numeric_limits<double>::infinity());
    }
    if (throw_on_violation && !rep.pass()) {
        std::string what = "running cost '" + cost.family + "' violates";
        if (!rep.l2_pass) what += " boundedness (worst |L|/C_L = " + std::to_string(rep.worst_l2_ratio) + ")";
        if (!rep.l1_pass)
            what += std::string(" the ") + to_string(cost.l1_mode) +
                    " B-Lipschitz bound (worst ratio = " + std::to_string(rep.worst_l1_ratio) + ")";
        throw CostRejectedError(what);
    }
    return rep;
}

std::pair<double, double> discount_step_weights(double rho, double t, double h) {
    const double x = rho * h;
    double A, Bv;  // integrals over u in [0,1] of e^{-xu}(1-u) and e^{-xu} u
    if (x < 1e-2) {
        const double x2 = x * x, x3 = x2 * x, x4 = x3 * x, x5 = x4 * x;
        A = 0.5 - x / 6.0 + x2 / 24.0 - x3 / 120.0 + x4 / 720.0 - x5 / 5040.0;
        Bv = 0.5 - x / 3.0 + x2 / 8.0 - x3 / 30.0 + x4 / 144.0 - x5 / 840.0;
    } else {
        const double em = std::expm1(-x);
        A = (x + em) / (x * x);
        Bv = (-em - x * std::exp(-x)) / (x * x);
    }
    const double s = std::exp(-rho * t) * h;
    return {s * A, s * Bv};
}

CostResult cost_functional(const ProblemSpec& p, const RunningCost& cost, const GridFunction& x0,
                           const ControlPath& path, double T) {
    const int N = p.steps(T);
    const TrajectoryResult tr = march_characteristics(p, x0, path, T);
    double J = 0.0;
    if (cost.control_independent) {
        std::vector<double> Lk(N + 1);
        const Eigen::VectorXd none;  // the cost ignores the controls
        for (int k = 0; k <= N; ++k) Lk[k] = cost(tr.states[k].values, none, 0.0);
        for (int k = 0; k < N; ++k) {
            const auto [w0, w1] = discount_step_weights(p.rho, k * p.dt, p.dt);
            J += w0 * Lk[k] + w1 * Lk[k + 1];
        }
    } else {
        for (int k = 0; k < N; ++k) {
            const auto [w0, w1] = discount_step_weights(p.rho, k * p.dt, p.dt);
            J += w0 * cost(tr.states[k].values, path.alpha[k], path.a[k]) +
                 w1 * cost(tr.states[k + 1].values, path.alpha[k], path.a[k]);
        }
    }
    return {J, cost.c_l * std::exp(-p.rho * T) / p.rho};
}

}  // namespace hjbt
