#pragma once

#include <Eigen/Dense>

namespace hjbt {

/// Uniform grid r_i = i*dr on [0, sbar] with M nodes.
struct GridSpec {
    int M = 0;
    double sbar = 0.0;

    static GridSpec make(int M, double sbar);

    double dr() const { return sbar / (M - 1); }
    /// Node coordinate; the last node is sbar exactly.
    double r(int i) const { return i == M - 1 ? sbar : i * dr(); }
    Eigen::VectorXd nodes() const;
    /// Composite trapezoid weights (dr/2 at the ends, dr inside).
    Eigen::VectorXd weights() const;

    bool operator==(const GridSpec& o) const { return M == o.M && sbar == o.sbar; }
    bool operator!=(const GridSpec& o) const { return !(*this == o); }
};

/// A real function sampled on the nodes of a GridSpec.
struct GridFunction {
    GridSpec spec;
    Eigen::VectorXd values;

    GridFunction() = default;
    GridFunction(GridSpec s, Eigen::VectorXd v);

    static GridFunction zeros(const GridSpec& s);
    static GridFunction constant(const GridSpec& s, double c);
    template <class F>
    static GridFunction sample(const GridSpec& s, F&& f) {
        Eigen::VectorXd v(s.M);
        for (int i = 0; i < s.M; ++i) v[i] = f(s.r(i));
        return GridFunction(s, std::move(v));
    }

    int size() const { return spec.M; }
    double operator[](int i) const { return values[i]; }
    double front() const { return values[0]; }
    double back() const { return values[spec.M - 1]; }
};

void require_same_grid(const GridSpec& a, const GridSpec& b);

double inner_product(const GridFunction& f, const GridFunction& g);
double l2_norm(const GridFunction& f);
/// L2 norm of the forward-difference derivative; the last node reuses the preceding difference.
double h1_seminorm(const GridFunction& f);
double sup_norm(const GridFunction& f);

/// True iff |f(sbar)| <= tol (and the finite-difference H1 proxy is finite).
bool in_domain_astar(const GridFunction& f, double tol);
/// True iff |f(0)| <= tol (and the finite-difference H1 proxy is finite).
bool in_domain_a(const GridFunction& f, double tol);

/// Number of grid steps in a shift of length s; throws AlignmentError when s/dr is not an integer.
int aligned_steps(double s, double step, const char* what);

/// Trapezoid value of int_s^sbar (x(r) - x(r-s))^2 / s dr.
double dq_energy(const GridFunction& x, double s);
/// Trapezoid value of int_s^{sbar-s} (x(r+s) - x(r))/s * x(r) dr.
double dq_pairing(const GridFunction& x, double s);

}  // namespace hjbt
