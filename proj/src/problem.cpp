#include "hjbt/problem.hpp"

#include <cmath>

#include "hjbt/controls.hpp"
#include "hjbt/errors.hpp"

namespace hjbt {

ProblemSpec ProblemSpec::make(double beta, double mu, double sbar, double rho, double lambda_b, int M) {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be positive");
    if (!std::isfinite(mu)) throw ConfigError("mu must be finite");
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ConfigError("rho must be positive");
    if (!(lambda_b > 0.0 && lambda_b < 1.0)) throw ConfigError("lambda_b must lie in (0, 1)");
    ProblemSpec p;
    p.beta = beta;
    p.mu = mu;
    p.sbar = sbar;
    p.rho = rho;
    p.lambda_b = lambda_b;
    p.grid = GridSpec::make(M, sbar);
    p.dt = p.grid.dr() / beta;
    return p;
}

int ProblemSpec::steps(double s) const {
    if (s < 0.0) throw AlignmentError("negative time");
    return aligned_steps(s, dt, "time");
}

ControlSets ControlSets::make(double gamma_lo, double gamma_hi, double lambda_lo, double lambda_hi) {
    for (double v : {gamma_lo, gamma_hi, lambda_lo, lambda_hi})
        if (!std::isfinite(v)) throw ConfigError("control bounds must be finite");
    if (gamma_lo > gamma_hi) throw ConfigError("gamma_lo > gamma_hi");
    if (lambda_lo > lambda_hi) throw ConfigError("lambda_lo > lambda_hi");
    return {gamma_lo, gamma_hi, lambda_lo, lambda_hi};
}

double ControlSets::gamma_norm() const { return std::max(std::abs(gamma_lo), std::abs(gamma_hi)); }
double ControlSets::lambda_norm() const { return std::max(std::abs(lambda_lo), std::abs(lambda_hi)); }
double ControlSets::sigma_norm(double sbar) const { return lambda_norm() * std::sqrt(sbar); }

ControlPath ControlPath::zero(const ProblemSpec& p, int K) { return constant(p, K, 0.0, 0.0); }

ControlPath ControlPath::constant(const ProblemSpec& p, int K, double a, double alpha) {
    ControlPath c;
    c.a.assign(K, a);
    c.alpha.assign(K, Eigen::VectorXd::Constant(p.grid.M, alpha));
    return c;
}

ControlPath ControlPath::segments(const ProblemSpec& p, int steps_per_segment, const std::vector<double>& a_seg,
                                  const std::vector<double>& alpha_seg) {
    if (a_seg.size() != alpha_seg.size()) throw ShapeError("segment lists differ in length");
    ControlPath c;
    for (std::size_t j = 0; j < a_seg.size(); ++j)
        for (int k = 0; k < steps_per_segment; ++k) {
            c.a.push_back(a_seg[j]);
            c.alpha.push_back(Eigen::VectorXd::Constant(p.grid.M, alpha_seg[j]));
        }
    return c;
}

void ControlPath::validate(const ControlSets& sets, const ProblemSpec& p) const {
    if (alpha.size() != a.size()) throw ShapeError("control path has mismatched a/alpha lengths");
    const double eps = 1e-12;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] < sets.gamma_lo - eps || a[k] > sets.gamma_hi + eps)
            throw ConfigError("boundary control outside Gamma at step " + std::to_string(k));
        if (alpha[k].size() != p.grid.M) throw ShapeError("alpha has wrong length at step " + std::to_string(k));
        if (alpha[k].minCoeff() < sets.lambda_lo - eps || alpha[k].maxCoeff() > sets.lambda_hi + eps)
            throw ConfigError("distributed control outside Lambda at step " + std::to_string(k));
    }
}

}  // namespace hjbt
