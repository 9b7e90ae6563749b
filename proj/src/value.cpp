#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hjbt/control.hpp"
#include "hjbt/errors.hpp"
#include "hjbt/parallel.hpp"

namespace hjbt {

namespace {

std::vector<double> lattice_values(double lo, double hi, int n) {
    if (n < 1) throw ConfigError("lattice sizes must be >= 1");
    if (lo == hi) return {lo};
    if (n == 1) return {0.5 * (lo + hi)};
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = i == n - 1 ? hi : lo + (hi - lo) * i / (n - 1);
    return v;
}

constexpr long kQuuTableLimit = 20000000;

}  // namespace

const char* to_string(AlphaBasis b) { return b == AlphaBasis::constant ? "constant" : "fourier2"; }

AlphaBasis alpha_basis_from_string(const std::string& s) {
    if (s == "constant") return AlphaBasis::constant;
    if (s == "fourier2") return AlphaBasis::fourier2;
    throw ConfigError("unknown alpha_basis '" + s + "'");
}

ValueModel::ValueModel(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost, const Lattice& lat,
                       double T, const ValueOptions& opt)
    : p_(p), sets_(sets), cost_(cost), lat_(lat), T_(T), opt_(opt) {
    if (T < 0.0) throw ConfigError("horizon must be nonnegative");
    N_ = p.steps(T);
    if (lat.K < 0) throw ConfigError("segment count must be >= 0");
    if (N_ > 0 && lat.K < 1) throw ConfigError("a positive horizon needs at least one segment");
    if (lat.K > 0) {
        if (N_ % lat.K != 0)
            throw AlignmentError("horizon of " + std::to_string(N_) + " steps does not split into " +
                                 std::to_string(lat.K) + " equal segments");
        seg_steps_ = N_ / lat.K;
    }
    const int M = p.grid.M;

    // Control choices per segment.
    const std::vector<double> avals = lattice_values(sets.gamma_lo, sets.gamma_hi, lat.n_a);
    const std::vector<double> lvals = lattice_values(sets.lambda_lo, sets.lambda_hi, lat.n_alpha);
    std::vector<std::pair<int, double>> alpha_choices;  // (profile, coef)
    if (opt.alpha_basis == AlphaBasis::constant) {
        profiles_.push_back(Eigen::VectorXd::Ones(M));
        for (double v : lvals) alpha_choices.push_back({0, v});
    } else {
        for (double v1 : lvals)
            for (double v2 : lvals) {
                Eigen::VectorXd prof(M);
                for (int i = 0; i < M; ++i)
                    prof[i] = std::clamp(v1 + v2 * std::cos(M_PI * p.grid.r(i) / p.sbar), sets.lambda_lo,
                                         sets.lambda_hi);
                int found = -1;
                for (std::size_t q = 0; q < profiles_.size(); ++q)
                    if (profiles_[q] == prof) found = static_cast<int>(q);
                if (found < 0) {
                    profiles_.push_back(prof);
                    alpha_choices.push_back({static_cast<int>(profiles_.size()) - 1, 1.0});
                }
            }
    }
    for (double a : avals)
        for (const auto& [prof, coef] : alpha_choices) choices_.push_back({a, prof, coef});
    n_choice_ = static_cast<int>(choices_.size());

    double count = std::pow(static_cast<double>(n_choice_), lat.K);
    if (!opt.beam && count > static_cast<double>(opt.budget))
        throw BudgetError("exhaustive search needs " + std::to_string(count) + " sequences, budget is " +
                          std::to_string(opt.budget) + "; enable beam mode");
    n_seq_ = 1;
    for (int j = 0; j < lat.K; ++j) n_seq_ = count > 9e18 ? -1 : n_seq_ * n_choice_;

    omega_.assign(N_ + 1, 0.0);
    for (int k = 0; k < N_; ++k) {
        const auto [w0, w1] = discount_step_weights(p.rho, k * p.dt, p.dt);
        omega_[k] += w0;
        omega_[k + 1] += w1;
    }

    gram_ = cost.kind == RunningCost::Kind::clipped_b_energy && cost.bf && N_ > 0;
    if (!gram_) return;

    // Zero-state responses to unit controls acting on segment 0 only.
    const int nb = 1 + static_cast<int>(profiles_.size());
    n_ctrl_basis_ = nb;
    ctrl_resp_.resize(M, static_cast<Eigen::Index>(nb) * (N_ + 1));
    for (int b = 0; b < nb; ++b) {
        ControlPath path = ControlPath::zero(p, N_);
        for (int k = 0; k < seg_steps_; ++k) {
            if (b == 0)
                path.a[k] = 1.0;
            else
                path.alpha[k] = profiles_[b - 1];
        }
        const TrajectoryResult tr = march_characteristics(p, GridFunction::zeros(p.grid), path, T);
        for (int k = 0; k <= N_; ++k) ctrl_resp_.col(static_cast<Eigen::Index>(k) * nb + b) = tr.states[k].values;
    }

    const int nu = lat.K * nb;
    const Eigen::MatrixXd WB = cost.bf->w.asDiagonal() * cost.bf->B.entries;
    guu_.resize(N_ + 1);
    Eigen::MatrixXd U(M, nu);
    for (int k = 0; k <= N_; ++k) {
        U.setZero();
        for (int j = 0; j < lat.K; ++j) {
            const int kk = k - j * seg_steps_;
            if (kk <= 0) continue;
            for (int b = 0; b < nb; ++b) U.col(j * nb + b) = ctrl_resp_.col(static_cast<Eigen::Index>(kk) * nb + b);
        }
        guu_[k] = U.transpose() * (WB * U);
        guu_[k] = 0.5 * (guu_[k] + guu_[k].transpose()).eval();
    }

    if (!opt.beam && static_cast<double>(n_seq_) * (N_ + 1) <= kQuuTableLimit) {
        quu_.assign(static_cast<std::size_t>(n_seq_) * (N_ + 1), 0.0);
        parallel_chunks(n_seq_, opt.workers, [&](long b, long e, int) {
            for (long s = b; s < e; ++s)
                for (int k = 0; k <= N_; ++k) quu_[static_cast<std::size_t>(s) * (N_ + 1) + k] = control_quad(s, k);
        });
    }
}

std::vector<int> ValueModel::digits(long index) const {
    std::vector<int> d(lat_.K, 0);
    for (int j = lat_.K - 1; j >= 0; --j) {
        d[j] = static_cast<int>(index % n_choice_);
        index /= n_choice_;
    }
    return d;
}

ControlPath ValueModel::path_for(long index) const {
    const std::vector<int> d = digits(index);
    ControlPath path;
    for (int j = 0; j < lat_.K; ++j) {
        const Choice& c = choices_[d[j]];
        for (int k = 0; k < seg_steps_; ++k) {
            path.a.push_back(c.a);
            path.alpha.push_back(c.coef * profiles_[c.profile]);
        }
    }
    return path;
}

double ValueModel::cost_of(long index, const GridFunction& x0) const {
    if (N_ == 0) return 0.0;
    return cost_functional(p_, cost_, x0, path_for(index), T_).value;
}

void ValueModel::control_vector(long index, std::vector<int>& pos, std::vector<double>& val) const {
    pos.clear();
    val.clear();
    const std::vector<int> d = digits(index);
    for (int j = 0; j < lat_.K; ++j) {
        const Choice& c = choices_[d[j]];
        pos.push_back(j * n_ctrl_basis_);
        val.push_back(c.a);
        pos.push_back(j * n_ctrl_basis_ + 1 + c.profile);
        val.push_back(c.coef);
    }
}

double ValueModel::control_quad(long index, int k) const {
    std::vector<int> pos;
    std::vector<double> val;
    control_vector(index, pos, val);
    const Eigen::MatrixXd& G = guu_[k];
    double q = 0.0;
    for (std::size_t i = 0; i < pos.size(); ++i)
        for (std::size_t j = 0; j < pos.size(); ++j) q += val[i] * G(pos[i], pos[j]) * val[j];
    return q;
}

ValueModel::Slice ValueModel::slice(const GridFunction& anchor, const std::vector<GridFunction>& dirs) const {
    require_same_grid(p_.grid, anchor.spec);
    for (const auto& d : dirs) require_same_grid(p_.grid, d.spec);
    Slice s;
    s.model_ = this;
    s.anchor_ = anchor;
    s.dirs_ = dirs;
    if (!gram_) return s;
    s.gram_ = true;
    s.nx_ = 1 + static_cast<int>(dirs.size());
    const int M = p_.grid.M;
    // Free responses e^{-mu t} T(t) of the anchor and directions.
    std::vector<TrajectoryResult> free;
    const ControlPath zero = ControlPath::zero(p_, N_);
    free.push_back(march_characteristics(p_, anchor, zero, T_));
    for (const auto& d : dirs) free.push_back(march_characteristics(p_, d, zero, T_));

    const int nb = n_ctrl_basis_;
    const int nu = lat_.K * nb;
    const Eigen::MatrixXd WB = cost_.bf->w.asDiagonal() * cost_.bf->B.entries;
    s.gxx_.resize(N_ + 1);
    s.gux_.resize(N_ + 1);
    Eigen::MatrixXd X(M, s.nx_), U(M, nu);
    for (int k = 0; k <= N_; ++k) {
        for (int c = 0; c < s.nx_; ++c) X.col(c) = free[c].states[k].values;
        U.setZero();
        for (int j = 0; j < lat_.K; ++j) {
            const int kk = k - j * seg_steps_;
            if (kk <= 0) continue;
            for (int b = 0; b < nb; ++b) U.col(j * nb + b) = ctrl_resp_.col(static_cast<Eigen::Index>(kk) * nb + b);
        }
        const Eigen::MatrixXd WBX = WB * X;
        s.gxx_[k] = X.transpose() * WBX;
        s.gxx_[k] = 0.5 * (s.gxx_[k] + s.gxx_[k].transpose()).eval();
        s.gux_[k] = U.transpose() * WBX;
    }
    return s;
}

GridFunction ValueModel::Slice::point(const Eigen::VectorXd& t) const {
    if (t.size() != dim()) throw ShapeError("slice coordinate has wrong dimension");
    Eigen::VectorXd v = anchor_.values;
    for (int i = 0; i < dim(); ++i) v += t[i] * dirs_[i].values;
    return {anchor_.spec, std::move(v)};
}

LatticeMin ValueModel::reduce_min(long n, const std::function<double(long)>& f) const {
    const int chunks = chunk_count(n, opt_.workers);
    std::vector<LatticeMin> best(chunks, {std::numeric_limits<double>::infinity(), -1});
    parallel_chunks(n, opt_.workers, [&](long b, long e, int c) {
        LatticeMin m{std::numeric_limits<double>::infinity(), -1};
        for (long s = b; s < e; ++s) {
            const double v = f(s);
            if (v < m.value || m.index < 0) m = {v, s};
        }
        best[c] = m;
    });
    LatticeMin out = best[0];
    for (int c = 1; c < chunks; ++c)
        if (best[c].value < out.value) out = best[c];
    return out;
}

LatticeMin ValueModel::beam_min(const std::function<double(const std::vector<int>&, int)>& partial) const {
    // Prefixes are ranked by the cost of the prefix completed with choice 0.
    std::vector<std::vector<int>> beam{{}};
    for (int j = 0; j < lat_.K; ++j) {
        std::vector<std::pair<double, std::vector<int>>> cand;
        for (const auto& pre : beam)
            for (int c = 0; c < n_choice_; ++c) {
                std::vector<int> d = pre;
                d.push_back(c);
                cand.push_back({partial(d, j + 1), d});
            }
        std::stable_sort(cand.begin(), cand.end(), [](const auto& x, const auto& y) {
            return x.first < y.first || (x.first == y.first && x.second < y.second);
        });
        beam.clear();
        for (std::size_t i = 0; i < cand.size() && static_cast<int>(i) < opt_.beam_width; ++i)
            beam.push_back(cand[i].second);
    }
    const std::vector<int>& d = beam.front();
    long idx = 0;
    for (int j = 0; j < lat_.K; ++j) idx = idx * n_choice_ + d[j];
    return {partial(d, lat_.K), idx};
}

LatticeMin ValueModel::Slice::eval(const Eigen::VectorXd& t) const {
    const ValueModel& m = *model_;
    if (t.size() != dim()) throw ShapeError("slice coordinate has wrong dimension");
    if (m.N_ == 0) return {0.0, 0};
    if (m.cost_.kind == RunningCost::Kind::constant) {
        double J = 0.0;
        for (int k = 0; k <= m.N_; ++k) J += m.omega_[k] * m.cost_.constant_value;
        return {J, 0};
    }
    if (!gram_) {
        const GridFunction x0 = point(t);
        auto f = [&](long s) { return m.cost_of(s, x0); };
        if (m.opt_.beam) {
            return m.beam_min([&](const std::vector<int>& pre, int) {
                long idx = 0;
                for (int j = 0; j < m.lat_.K; ++j) idx = idx * m.n_choice_ + (j < static_cast<int>(pre.size()) ? pre[j] : 0);
                return f(idx);
            });
        }
        return m.reduce_min(m.n_seq_, f);
    }

    Eigen::VectorXd xi(nx_);
    xi[0] = 1.0;
    for (int i = 0; i < dim(); ++i) xi[i + 1] = t[i];
    std::vector<double> xx(m.N_ + 1);
    std::vector<Eigen::VectorXd> ux(m.N_ + 1);
    for (int k = 0; k <= m.N_; ++k) {
        xx[k] = xi.dot(gxx_[k] * xi);
        ux[k] = gux_[k] * xi;
    }
    auto f = [&](long s) { return m.sequence_cost_gram(*this, s, xi, xx, ux); };
    if (m.opt_.beam) {
        return m.beam_min([&](const std::vector<int>& pre, int) {
            long idx = 0;
            for (int j = 0; j < m.lat_.K; ++j) idx = idx * m.n_choice_ + (j < static_cast<int>(pre.size()) ? pre[j] : 0);
            return f(idx);
        });
    }
    return m.reduce_min(m.n_seq_, f);
}

double ValueModel::sequence_cost_gram(const Slice&, long index, const Eigen::VectorXd&, const std::vector<double>& xx,
                                      const std::vector<Eigen::VectorXd>& ux) const {
    thread_local std::vector<int> pos;
    thread_local std::vector<double> val;
    control_vector(index, pos, val);
    const double cap = cost_.cap;
    const bool tab = !quu_.empty();
    double J = 0.0;
    for (int k = 0; k <= N_; ++k) {
        double cross = 0.0;
        for (std::size_t i = 0; i < pos.size(); ++i) cross += val[i] * ux[k][pos[i]];
        const double quu = tab ? quu_[static_cast<std::size_t>(index) * (N_ + 1) + k] : control_quad(index, k);
        const double q = xx[k] + 2.0 * cross + quu;
        J += omega_[k] * std::min(cap, q);
    }
    return J;
}

LatticeMin ValueModel::minimize(const GridFunction& x0) const { return slice(x0, {}).eval(Eigen::VectorXd()); }

Lattice coarse_lattice(const Lattice& lat) {
    if (lat.K >= 2 && lat.K % 2 == 0) return {lat.n_a, lat.n_alpha, lat.K / 2};
    if (lat.K <= 1) return {std::min(lat.n_a, 2), std::min(lat.n_alpha, 2), lat.K};
    return {lat.n_a, lat.n_alpha, 1};
}

ValueEstimator::ValueEstimator(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost,
                               const Lattice& lat, double T, const ValueOptions& opt)
    : fine_(p, sets, cost, lat, T, opt), coarse_(p, sets, cost, coarse_lattice(lat), T, opt) {}

double ValueEstimator::tail() const {
    const ProblemSpec& p = fine_.problem();
    return fine_.cost().c_l * std::exp(-p.rho * fine_.horizon()) / p.rho;
}

ValueEstimate ValueEstimator::assemble(const LatticeMin& f, const LatticeMin& c) const {
    ValueEstimate ve;
    ve.value = f.value;
    ve.gap_lattice = std::abs(c.value - f.value);
    ve.gap_tail = tail();
    ve.lattice = fine_.lattice();
    ve.horizon = fine_.horizon();
    ve.certified = !fine_.options().beam;
    ve.argmin = fine_.digits(f.index);
    const ControlPath path = fine_.path_for(f.index);
    for (int j = 0; j < fine_.segments(); ++j) {
        const int k = j * fine_.steps_per_segment();
        ve.argmin_a.push_back(path.a[k]);
        ve.argmin_alpha.push_back(path.alpha[k].mean());
    }
    return ve;
}

ValueEstimate ValueEstimator::at(const GridFunction& x0) const {
    return assemble(fine_.minimize(x0), coarse_.minimize(x0));
}

ValueEstimate value_estimate(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost,
                             const GridFunction& x0, const Lattice& lat, double T, const ValueOptions& opt) {
    return ValueEstimator(p, sets, cost, lat, T, opt).at(x0);
}

DppReport dpp_residual(const ProblemSpec& p, const ControlSets& sets, const RunningCost& cost, const GridFunction& x0,
                       double s, const Lattice& lat, double T, const ValueOptions& opt) {
    if (s < 0.0 || s > T) throw ConfigError("dpp split time must lie in [0, T]");
    const ValueEstimator root(p, sets, cost, lat, T, opt);
    const ValueEstimate v0 = root.at(x0);
    DppReport rep;
    rep.value = v0.value;
    const int Ls = root.fine().steps_per_segment();
    const int m = Ls == 0 ? 0 : aligned_steps(p.steps(s), Ls, "split time (in steps) over segment length");
    if (m == 0) {
        rep.bellman = v0.value;
        rep.residual = 0.0;
        rep.combined_gap = v0.gap();
        rep.pass = true;
        return rep;
    }
    const Lattice rest{lat.n_a, lat.n_alpha, lat.K - m};
    const ValueEstimator cont(p, sets, cost, rest, T - s, opt);
    const int C = root.fine().choices_per_segment();
    long n_pre = 1;
    for (int j = 0; j < m; ++j) n_pre *= C;
    const double disc = std::exp(-p.rho * s);
    double best = std::numeric_limits<double>::infinity(), worst_gap = 0.0;
    for (long pre = 0; pre < n_pre; ++pre) {
        // Leading digits followed by zeros select the prefix controls.
        long idx = pre;
        for (int j = m; j < lat.K; ++j) idx *= C;
        ControlPath path = root.fine().path_for(idx);
        path.a.resize(static_cast<std::size_t>(m) * Ls);
        path.alpha.resize(static_cast<std::size_t>(m) * Ls);
        const double J = cost_functional(p, cost, x0, path, s).value;
        const GridFunction xs = march_characteristics(p, x0, path, s).states.back();
        const ValueEstimate vc = cont.at(xs);
        const double total = J + disc * vc.value;
        if (total < best) best = total;
        worst_gap = std::max(worst_gap, vc.gap());
    }
    rep.bellman = best;
    rep.residual = v0.value - best;
    rep.combined_gap = v0.gap() + disc * worst_gap;
    rep.pass = std::abs(rep.residual) <= rep.combined_gap;
    return rep;
}

}  // namespace hjbt
