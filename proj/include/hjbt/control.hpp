#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hjbt/controls.hpp"
#include "hjbt/operators.hpp"
#include "hjbt/transport.hpp"

namespace hjbt {

enum class L1Mode { squared, unsquared };

const char* to_string(L1Mode m);
L1Mode l1_mode_from_string(const std::string& s);

/// Running cost L(x, alpha, a) with its constant C_L.
struct RunningCost {
    enum class Kind { constant, clipped_b_energy, generic };
    using Fn = std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& alpha, double a)>;

    Kind kind = Kind::constant;
    std::string family;
    double c_l = 0.0;
    L1Mode l1_mode = L1Mode::unsquared;
    bool control_independent = true;
    double constant_value = 0.0;               // constant family
    double cap = 0.0;                          // clipped family: L = min(cap, <Bx,x>)
    std::shared_ptr<const BFactorization> bf;  // clipped family
    Fn fn;

    double operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& alpha, double a) const { return fn(x, alpha, a); }
};

/// L = c, C_L = |c|.
RunningCost constant_cost(double c);
/// L = min(h, <Bx,x>) with h = min(C_L, C_L^2/4), so that |L(x) - L(y)| <= C_L |x - y|_B.
RunningCost clipped_b_energy_cost(std::shared_ptr<const BFactorization> bf, double c_l,
                                  L1Mode mode = L1Mode::unsquared);
/// L = |x|^2, which is unbounded; C_L is whatever the caller claims.
RunningCost l2_energy_cost(const GridSpec& g, double claimed_c_l);
RunningCost generic_cost(std::string family, RunningCost::Fn fn, double c_l, L1Mode mode, bool control_independent);

struct CostAudit {
    bool l2_pass = true;
    bool l1_pass = true;
    double worst_l2_ratio = 0.0;  // max |L| / C_L
    double worst_l1_ratio = 0.0;  // max |L(x) - L(y)| / (C_L * d), d = |x-y|_B or its square
    int samples = 0;
    bool pass() const { return l2_pass && l1_pass; }
};

/// Samples (x, y, alpha, a), including near pairs, and checks (L2) and (L1) in the cost's mode.
/// Throws CostRejectedError on a violation unless throw_on_violation is false.
CostAudit validate_cost(const RunningCost& cost, const BFactorization& bf, const ControlSets& sets, int n_samples,
                        unsigned long long seed = 1, bool throw_on_violation = true);

struct CostResult {
    double value = 0.0;  // discounted cost on [0, T]
    double tail = 0.0;   // C_L e^{-rho T} / rho bounds the neglected part
};

/// Discounted cost on [0, T]; L is linear between dt nodes and integrated against e^{-rho t} exactly.
CostResult cost_functional(const ProblemSpec& p, const RunningCost& cost, const GridFunction& x0,
                           const ControlPath& path, double T);

/// Weights (w0, w1) of the two ends of a step of length h starting at t: the exact integral of
/// e^{-rho s} times the linear interpolant of the end values.
std::pair<double, double> discount_step_weights(double rho, double t, double h);

struct Lattice {
    int n_a = 2;
    int n_alpha = 2;
    int K = 4;  // equal time segments on [0, T]
};

enum class AlphaBasis { constant, fourier2 };

const char* to_string(AlphaBasis b);
AlphaBasis alpha_basis_from_string(const std::string& s);

struct ValueOptions {
    AlphaBasis alpha_basis = AlphaBasis::constant;
    long budget = 2000000;
    int workers = 1;
    bool beam = false;
    int beam_width = 64;
};

struct LatticeMin {
    double value = 0.0;
    long index = 0;
};

/// Enumerates piecewise-constant lattice controls for one problem instance.
class ValueModel {
public:
    ValueModel(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost, const Lattice& lat, double T,
               const ValueOptions& opt = {});

    long sequence_count() const { return n_seq_; }
    int choices_per_segment() const { return n_choice_; }
    int steps_per_segment() const { return seg_steps_; }
    int segments() const { return lat_.K; }
    double horizon() const { return T_; }
    /// Choice digits of a sequence index, first segment first.
    std::vector<int> digits(long index) const;
    ControlPath path_for(long index) const;
    /// Cost of one sequence by direct simulation (reference route).
    double cost_of(long index, const GridFunction& x0) const;

    /// Minimum over all sequences (or beam search when enabled) at x0.
    LatticeMin minimize(const GridFunction& x0) const;

    /// Value restricted to the affine slice anchor + sum_i t_i dirs_i, with setup shared across points.
    class Slice {
    public:
        LatticeMin eval(const Eigen::VectorXd& t) const;
        GridFunction point(const Eigen::VectorXd& t) const;
        int dim() const { return static_cast<int>(dirs_.size()); }

    private:
        friend class ValueModel;
        const ValueModel* model_ = nullptr;
        GridFunction anchor_;
        std::vector<GridFunction> dirs_;
        // Gram route data
        bool gram_ = false;
        int nx_ = 0;                          // 1 + dim
        std::vector<Eigen::MatrixXd> gxx_;    // per time node
        std::vector<Eigen::MatrixXd> gux_;    // per time node, rows = control basis
    };
    Slice slice(const GridFunction& anchor, const std::vector<GridFunction>& dirs) const;

    const ProblemSpec& problem() const { return p_; }
    const RunningCost& cost() const { return cost_; }
    const ControlSets& sets() const { return sets_; }
    const Lattice& lattice() const { return lat_; }
    const ValueOptions& options() const { return opt_; }

private:
    struct Choice {
        double a;
        int profile;  // index into profiles_
        double coef;  // multiplies the profile
    };

    double node_weight(int k) const { return omega_[k]; }
    double sequence_cost_gram(const Slice& s, long index, const Eigen::VectorXd& xi,
                              const std::vector<double>& xx, const std::vector<Eigen::VectorXd>& ux) const;
    double control_quad(long index, int k) const;
    void control_vector(long index, std::vector<int>& pos, std::vector<double>& val) const;
    LatticeMin reduce_min(long n, const std::function<double(long)>& f) const;
    LatticeMin beam_min(const std::function<double(const std::vector<int>&, int)>& partial) const;

    ProblemSpec p_;
    ControlSets sets_;
    RunningCost cost_;
    Lattice lat_;
    double T_;
    ValueOptions opt_;
    int N_ = 0;
    int seg_steps_ = 0;
    int n_choice_ = 0;
    long n_seq_ = 0;
    std::vector<Choice> choices_;
    std::vector<Eigen::VectorXd> profiles_;
    std::vector<double> omega_;  // node weights for control-independent costs
    // Unit responses of the zero-state system, indexed by (segment, basis) then time node.
    int n_ctrl_basis_ = 0;  // per segment: 1 (boundary) + number of profiles
    Eigen::MatrixXd ctrl_resp_;         // M x (n_ctrl_basis * (N+1)) responses to segment 0, column = k * nb + b
    std::vector<Eigen::MatrixXd> guu_;  // per time node, over the K * n_ctrl_basis control coordinates
    std::vector<double> quu_;           // per sequence and node, when tabulated
    bool gram_ = false;
};

struct ValueEstimate {
    double value = 0.0;
    double gap_lattice = 0.0;
    double gap_tail = 0.0;
    Lattice lattice;
    double horizon = 0.0;
    std::vector<int> argmin;  // choice digits per segment
    std::vector<double> argmin_a;
    std::vector<double> argmin_alpha;
    bool certified = true;  // false for beam search

    double gap() const { return gap_lattice + gap_tail; }
    double lower() const { return value - gap(); }
    double upper() const { return value + gap_tail; }
};

/// Coarser sub-lattice used for the Richardson gap: K/2 segments for even K; for K = 1 the
/// endpoint-only value sets; otherwise a single segment.
Lattice coarse_lattice(const Lattice& lat);

/// Value estimates with a shared fine and coarse lattice model.
class ValueEstimator {
public:
    ValueEstimator(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost, const Lattice& lat, double T,
                   const ValueOptions& opt = {});
    ValueEstimate at(const GridFunction& x0) const;
    const ValueModel& fine() const { return fine_; }
    const ValueModel& coarse() const { return coarse_; }
    double tail() const;
    ValueEstimate assemble(const LatticeMin& fine, const LatticeMin& coarse) const;

private:
    ValueModel fine_;
    ValueModel coarse_;
};

ValueEstimate value_estimate(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost,
                             const GridFunction& x0, const Lattice& lat, double T, const ValueOptions& opt = {});

struct DppReport {
    double value = 0.0;        // value_estimate(x0)
    double bellman = 0.0;      // min over leading segments of cost + e^{-rho s} value(x(s))
    double residual = 0.0;
    double combined_gap = 0.0;
    bool pass = false;
};

/// s must be a multiple of the segment length T/K.
DppReport dpp_residual(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost, const GridFunction& x0,
                       double s, const Lattice& lat, double T, const ValueOptions& opt = {});

struct GronwallReport {
    double lhs = 0.0;        // sup_t |x(t) - y(t)|_B^2
    double rhs = 0.0;        // c_T |x0 - y0|_B^2
    double c_T = 0.0;
    bool pass = false;
    bool forgets = true;     // difference is exactly 0 once the data have left the domain
};

GronwallReport trajectory_b_gronwall(const ProblemSpec& p, const BFactorization& bf, const GridFunction& x0,
                                     const GridFunction& y0, const ControlPath& path, double T, double slack = 1e-6);

struct LipschitzPair {
    double lhs = 0.0;
    double bound = 0.0;
    double b_distance = 0.0;
    bool pass = false;
};

struct LipschitzReport {
    std::vector<LipschitzPair> pairs;
    double constant = 0.0;  // sbar * c_sbar * C_L
    bool mode_mismatch = false;
    bool pass = false;
};

LipschitzReport value_b_lipschitz_probe(const ProblemSpec& p, const ControlSets& sets, const BFactorization& bf,
                                        const RunningCost& cost,
                                        const std::vector<std::pair<GridFunction, GridFunction>>& pairs,
                                        const Lattice& lat, double T, const ValueOptions& opt = {});

/// B-Lipschitz constant sbar * exp(2 (1 + |mu|) sbar / beta) * C_L.
double value_b_lipschitz_constant(const ProblemSpec& p, const RunningCost& cost);

}  // namespace hjbt
