#pragma once

#include <vector>

#include <Eigen/Dense>

#include "hjbt/problem.hpp"

namespace hjbt {

/// Compact boxes Gamma (boundary control) and Lambda (distributed control values).
struct ControlSets {
    double gamma_lo = -1.0, gamma_hi = 1.0;
    double lambda_lo = -1.0, lambda_hi = 1.0;

    static ControlSets make(double gamma_lo, double gamma_hi, double lambda_lo, double lambda_hi);

    double gamma_norm() const;
    double lambda_norm() const;
    /// ||Sigma|| = ||Lambda|| * sqrt(sbar).
    double sigma_norm(double sbar) const;
};

/// Piecewise-constant controls: step k acts on (k dt, (k+1) dt].
struct ControlPath {
    std::vector<double> a;                  // boundary value per step
    std::vector<Eigen::VectorXd> alpha;     // distributed control per step, one value per node

    int steps() const { return static_cast<int>(a.size()); }

    static ControlPath zero(const ProblemSpec& p, int K);
    static ControlPath constant(const ProblemSpec& p, int K, double a, double alpha);
    /// Equal-length segments, each holding one boundary value and one spatially constant alpha.
    static ControlPath segments(const ProblemSpec& p, int steps_per_segment, const std::vector<double>& a_seg,
                                const std::vector<double>& alpha_seg);

    /// Throws ConfigError when a value leaves Gamma or Lambda.
    void validate(const ControlSets& sets, const ProblemSpec& p) const;
};

}  // namespace hjbt
