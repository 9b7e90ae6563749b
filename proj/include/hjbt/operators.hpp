#pragma once

#include <Eigen/Dense>

#include "hjbt/grid.hpp"
#include "hjbt/problem.hpp"

namespace hjbt {

/// Dense operator on grid functions. weight_aware means the entries already carry
/// trapezoid weights, so v.dot(entries * v) is a quadratic form.
struct OperatorMatrix {
    GridSpec spec;
    Eigen::MatrixXd entries;
    bool weight_aware = false;

    GridFunction apply(const GridFunction& f) const;
};

/// Absolute domain tolerance rel * sup_norm(f).
double domain_tol(const GridFunction& f, double rel);

/// A f = -beta f' on D(A) = {f(0) = 0}; central differences, second-order one-sided at the ends.
GridFunction apply_A(const ProblemSpec& p, const GridFunction& f, double dom_tol_rel = 1e-8);
/// A* f = beta f' on D(A*) = {f(sbar) = 0}.
GridFunction apply_Astar(const ProblemSpec& p, const GridFunction& f, double dom_tol_rel = 1e-8);

/// (A - lam)^-1 phi by trapezoid quadrature of its kernel; output(0) = 0.
GridFunction resolvent_A(const ProblemSpec& p, double lam, const GridFunction& phi);
/// (A* - lam)^-1 phi by trapezoid quadrature of its kernel; output(sbar) = 0.
GridFunction resolvent_Astar(const ProblemSpec& p, double lam, const GridFunction& phi);
OperatorMatrix resolvent_A_matrix(const ProblemSpec& p, double lam);
OperatorMatrix resolvent_Astar_matrix(const ProblemSpec& p, double lam);

/// Exact weighted adjoint of the trapezoid (A* - lam)^-1. It coincides with the trapezoid
/// (A - lam)^-1 except at the two corner entries, and is the factor B is built from.
GridFunction resolvent_A_paired(const ProblemSpec& p, double lam, const GridFunction& phi);
OperatorMatrix resolvent_A_paired_matrix(const ProblemSpec& p, double lam);

struct BOptions {
    double sym_tol = 1e-6;
    /// Eigenvalues with |e| <= clip_rel * max eigenvalue are set to 0; more negative ones are an error.
    double clip_rel = 1e-10;
};

/// B = (A* - lam)^-1 (A - lam)^-1 with its eigen square root.
struct BFactorization {
    ProblemSpec problem;
    double lam = 0.5;
    Eigen::VectorXd w;           // trapezoid weights
    OperatorMatrix B;            // symmetrized in the weighted inner product
    OperatorMatrix R;            // paired (A - lam)^-1 factor
    OperatorMatrix Rstar;        // trapezoid (A* - lam)^-1 factor
    Eigen::VectorXd eigenvalues; // ascending, clipped at 0
    Eigen::MatrixXd sym_vectors; // orthonormal eigenvectors of W^1/2 B W^-1/2
    OperatorMatrix B_half;

    double raw_symmetry_defect = 0.0;
    double min_eigenvalue_raw = 0.0;
    double max_eigenvalue = 0.0;
    double adjoint_defect = 0.0;
    int kernel_dim = 0;  // eigenvalues clipped to 0

    const GridSpec& grid() const { return problem.grid; }
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return B.entries * x; }
    GridFunction apply(const GridFunction& x) const;
    /// <Bx, x> in the trapezoid inner product.
    double quad(const Eigen::VectorXd& x) const;
    double b_norm(const GridFunction& x) const;
    GridFunction apply_half(const GridFunction& x) const;
    /// A* B x through the identity A*B = (A - lam)^-1 + lam B.
    GridFunction astar_b(const GridFunction& x) const;
    /// Eigenvector i (ascending order) as a W-unit grid function.
    GridFunction eigenfunction(int i) const;
    /// Norm of the functional x -> (Bx)(0) with respect to the L2 norm.
    double delta0_b_norm() const;
};

BFactorization build_B(const ProblemSpec& p, const BOptions& opt = {});

struct RenardyReport {
    double min_eigenvalue = 0.0;       // on range(B)
    double min_eigenvalue_full = 0.0;  // diagnostic over every grid vector
    double tol = 1e-6;
    bool pass = false;
};

/// Minimum eigenvalue of the symmetrized form of B - A*B on range(B).
RenardyReport check_renardy(const BFactorization& bf, double tol = 1e-6);

/// max |<A* (B x), y> - <((A - lam)^-1 + lam B) x, y>| over smooth unit probes, with A* by
/// central differences. Uses O(M) recursions so fine grids are cheap.
double astar_b_identity_defect(const ProblemSpec& p, int n_probes = 6);

/// Triangular mollifier [2n - 2n^2 r]^+ projected onto the grid, unit discrete integral.
GridFunction eta_n(const GridSpec& g, int n, bool strict = true);
double cn_functional(int n, const GridFunction& x);
GridFunction cn_adjoint(const GridSpec& g, int n, double gamma);

/// f(0) for f in the D(A*) proxy.
double delta0(const GridFunction& f, double dom_tol_rel = 1e-8);
/// nu(r) = exp(-mu r / beta).
GridFunction nu(const ProblemSpec& p);

}  // namespace hjbt
