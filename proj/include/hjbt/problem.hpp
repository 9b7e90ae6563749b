#pragma once

#include "hjbt/grid.hpp"

namespace hjbt {

/// Scalar data of the transport problem plus its grid; dt*beta = dr (unit CFL).
struct ProblemSpec {
    double beta = 1.0;
    double mu = 0.0;
    double sbar = 1.0;
    double rho = 1.0;
    double lambda_b = 0.5;
    GridSpec grid;
    double dt = 0.0;

    static ProblemSpec make(double beta, double mu, double sbar, double rho, double lambda_b, int M);

    double dr() const { return grid.dr(); }
    /// Number of dt steps in a time span; throws AlignmentError if not a multiple.
    int steps(double s) const;
};

}  // namespace hjbt
