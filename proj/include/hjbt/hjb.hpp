#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hjbt/control.hpp"

namespace hjbt {

/// Class of distributed controls the Hamiltonian minimizes over. It should match the class
/// the value function was computed with.
enum class AlphaClass { constant, pointwise };

const char* to_string(AlphaClass c);
AlphaClass alpha_class_from_string(const std::string& s);

struct HamiltonianResult {
    double value = 0.0;
    double a = 0.0;
    Eigen::VectorXd alpha;
    double gap = 0.0;  // lattice coarseness when enumeration was needed
};

/// inf over controls of beta delta0(p_boundary) a + <p_alpha, alpha> + L(x, alpha, a).
/// Costs that do not depend on the controls use the vertex rule; other costs fall back to a
/// 101-point lattice per axis (constant class only).
HamiltonianResult hamiltonian(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost,
                              const GridFunction& x, const GridFunction& p_boundary, const GridFunction& p_alpha,
                              AlphaClass cls = AlphaClass::constant, double dom_tol_rel = 1e-6);

inline HamiltonianResult hamiltonian(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost,
                                     const GridFunction& x, const GridFunction& costate,
                                     AlphaClass cls = AlphaClass::constant) {
    return hamiltonian(p, sets, cost, x, costate, costate, cls);
}

/// Brute-force reference over n points per axis of (a, constant alpha).
HamiltonianResult hamiltonian_lattice(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost,
                                      const GridFunction& x, const GridFunction& p_boundary,
                                      const GridFunction& p_alpha, int n);

/// Test function of type 1: gradient in the D(A*) proxy with A* of the gradient available.
class Test1Function {
public:
    enum class Family { zero, quadratic_b, cylinder };

    /// phi = 0.
    static Test1Function zero(const GridSpec& g);
    /// phi(x) = scale (<Bx, x> + <Bp, x>), gradient scale B(2x + p).
    static Test1Function quadratic_b(std::shared_ptr<const BFactorization> bf, GridFunction p, double scale = 1.0);
    /// phi(x) = h0 + h1.z + z^T H2 z / 2 with z_i = <x, w_i>; each w_i must lie in the D(A*) proxy.
    static Test1Function cylinder(const ProblemSpec& p, std::vector<GridFunction> dirs, double h0, Eigen::VectorXd h1,
                                  Eigen::MatrixXd h2, double dom_tol_rel = 1e-6);

    Family family() const { return family_; }
    double value(const GridFunction& x) const;
    GridFunction gradient(const GridFunction& x) const;
    GridFunction astar_gradient(const GridFunction& x) const;
    Test1Function negated() const;

private:
    Family family_ = Family::zero;
    GridSpec grid_;
    double scale_ = 1.0;
    std::shared_ptr<const BFactorization> bf_;
    GridFunction p_;
    std::vector<GridFunction> dirs_;
    std::vector<GridFunction> astar_dirs_;
    double h0_ = 0.0;
    Eigen::VectorXd h1_;
    Eigen::MatrixXd h2_;
};

/// Test function of type 2: g(x) = g0(|x|) with g0 nondecreasing.
struct Test2Function {
    enum class Kind { quadratic, soft };
    Kind kind = Kind::quadratic;
    double c = 0.0;

    static Test2Function quadratic(double c);
    static Test2Function soft(double c);

    double g0(double t) const;
    double g0_prime(double t) const;
    /// g0'(|x|) / |x|, with its limit at 0.
    double radial_quotient(const GridFunction& x) const;
    double value(const GridFunction& x) const { return g0(l2_norm(x)); }
    GridFunction gradient(const GridFunction& x) const;
};

struct LyapunovReport {
    double lhs = 0.0;  // phi(x(s)) - phi(x0)
    double rhs = 0.0;  // time integral of the generator terms
    double residual = 0.0;
};

/// Checks phi(x(s)) - phi(x0) against the integral of <A* grad, x> + beta delta0(grad) a +
/// <grad, alpha> - mu <grad, x>, trapezoid in time with each step's controls at both ends.
/// Throws DomainError naming the time at which grad phi leaves the D(A*) proxy.
LyapunovReport lyapunov_identity_residual(const ProblemSpec& p, const Test1Function& phi, const GridFunction& x0,
                                          const ControlPath& path, double s, double dom_tol_rel = 1e-6);

struct ConstantControl {
    double a = 0.0;
    double alpha = 0.0;
};

struct RateRow {
    double s = 0.0;
    double lhs = 0.0;     // worst over the control family
    double bound = 0.0;   // remainder term (0 for test1)
    double excess = 0.0;  // lhs - bound
    double spread = 0.0;  // max - min of lhs across the family
};

struct RateReport {
    std::vector<RateRow> rows;  // in the order of s_list
    bool pass = false;
};

/// Vertices of Gamma x Lambda as constant controls.
std::vector<ConstantControl> vertex_controls(const ControlSets& sets);

/// Expansion of g(x(s)) for small s against its remainder term. PASS iff the positive part of
/// the excess over the remainder is nonincreasing along s_list (taken in decreasing s).
RateReport test2_rate_check(const ProblemSpec& p, const ControlSets& sets, const Test2Function& g,
                            const GridFunction& x0, const std::vector<ConstantControl>& controls,
                            const std::vector<double>& s_list, double noise = 1e-12);

/// The same for phi, whose expansion has no remainder term.
RateReport test1_rate_check(const ProblemSpec& p, const Test1Function& phi, const GridFunction& x0,
                            const std::vector<ConstantControl>& controls, const std::vector<double>& s_list,
                            double noise = 1e-12);

struct GradientBoundReport {
    double worst_ratio = 0.0;          // max |<grad psi, w>| / (C |w|_B)
    double near_kernel_ratio = 0.0;    // the same for the smallest retained eigenvector
    int directions = 0;
    bool pass = false;
};

/// |<grad, w>| <= C |w|_B (1 + slack) over random, coordinate and eigen directions.
GradientBoundReport gradient_b_bound_check(const BFactorization& bf, const GridFunction& grad, double C,
                                           int n_random = 32, unsigned long long seed = 1, double slack = 1e-6);

enum class Outcome { pass, fail, inconclusive };
const char* to_string(Outcome o);

/// Candidate solution u with an error bar at each point.
struct CandidateValue {
    double value = 0.0;
    double gap = 0.0;
};

/// u restricted to affine slices anchor + sum t_i dirs_i.
class Candidate {
public:
    using SliceFn = std::function<CandidateValue(const Eigen::VectorXd&)>;
    using SliceFactory = std::function<SliceFn(const GridFunction&, const std::vector<GridFunction>&)>;
    using PointFn = std::function<CandidateValue(const GridFunction&)>;

    Candidate(std::string name, SliceFactory factory, PointFn point)
        : name_(std::move(name)), factory_(std::move(factory)), point_(std::move(point)) {}

    /// Constant function c with zero gap.
    static Candidate constant(double c);
    /// Lattice value estimate; the slice evaluates the fine model, and gaps are recomputed at
    /// located extrema only.
    static Candidate value_function(std::shared_ptr<const ValueEstimator> est);
    /// u + amp * exp(-|x - center|^2 / width^2).
    static Candidate with_spike(const Candidate& u, GridFunction center, double amp, double width);

    const std::string& name() const { return name_; }
    SliceFn on_slice(const GridFunction& anchor, const std::vector<GridFunction>& dirs) const {
        return factory_(anchor, dirs);
    }
    /// Value and error bar at a single point (exact gap for the value function).
    CandidateValue at(const GridFunction& x) const { return point_(x); }

private:
    std::string name_;
    SliceFactory factory_;
    PointFn point_;
};

struct ViscosityOptions {
    int d_slice = 6;
    double step0 = 0.25;       // initial pattern step in slice coordinates
    double step_min = 1e-3;
    int max_evals = 4000;      // search budget per seed; 0 makes every search inconclusive
    double stationarity_tol = 1e-3;
    double lyapunov_window = 0.05;  // s for the discretization term
    AlphaClass alpha_class = AlphaClass::constant;
    int workers = 1;
};

struct ExtremumReport {
    GridFunction x;
    Eigen::VectorXd t;
    double objective = 0.0;
    double stationarity = 0.0;  // largest one-sided improving slope at the final step
    double final_step = 0.0;
    int evals = 0;
    bool located = false;
    std::vector<double> trace;  // objective after each accepted move
};

struct ViscosityReport {
    std::string check;  // "subsolution" or "supersolution"
    int seed = 0;
    Outcome outcome = Outcome::inconclusive;
    double lhs = 0.0;    // HJB expression at the extremum
    double rhs = 0.0;    // remainder term
    double slack = 0.0;  // value gap + discretization + stationarity terms
    double slack_value = 0.0;
    double slack_discretization = 0.0;
    double slack_stationarity = 0.0;
    ExtremumReport extremum;
};

/// Seed anchors: (sbar - r) times a seeded cubic, projected onto the span of the top d_slice
/// B-eigenvectors so that the search stays in that span.
GridFunction seed_anchor(const BFactorization& bf, int seed, int d_slice, double amplitude = 0.5);

/// Top d B-eigenvectors (largest first) as W-unit grid functions.
std::vector<GridFunction> top_eigen_directions(const BFactorization& bf, int d);

/// Local max of u - (phi + g) in the slice, then rho u - <A* grad phi, x> - <grad phi + grad g, -mu x>
/// - H(x, grad phi, grad phi + grad g) <= g0'(|x|)/|x| beta ||Gamma||^2 / 2 within slack.
ViscosityReport subsolution_residual(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost,
                                     const BFactorization& bf, const Candidate& u, const Test1Function& phi,
                                     const Test2Function& g, int seed, const ViscosityOptions& opt = {});

/// Local min of v + (phi + g), then the mirrored inequality >= -remainder within slack.
ViscosityReport supersolution_residual(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost,
                                       const BFactorization& bf, const Candidate& v, const Test1Function& phi,
                                       const Test2Function& g, int seed, const ViscosityOptions& opt = {});

struct ComparisonPoint {
    double v1 = 0.0, gap1 = 0.0;
    double v2 = 0.0, gap2 = 0.0;
    bool pass = false;
};

struct ComparisonReport {
    std::vector<ComparisonPoint> points;
    bool pass = false;
};

struct ValueConfig {
    Lattice lattice;
    double horizon = 1.0;
    ValueOptions options;
};

/// |V1(x) - V2(x)| <= gap1 + gap2 at every probe point.
ComparisonReport comparison_probe(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost,
                                  const std::vector<GridFunction>& points, const ValueConfig& c1,
                                  const ValueConfig& c2);

}  // namespace hjbt
