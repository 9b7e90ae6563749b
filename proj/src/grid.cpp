#include "hjbt/grid.hpp"

#include <cmath>
#include <string>

#include "hjbt/errors.hpp"

namespace hjbt {

namespace {

// Trapezoid sum of g over nodes lo..hi (inclusive) with spacing dr.
template <class G>
double trapz_range(int lo, int hi, double dr, G&& g) {
    if (hi <= lo) return 0.0;
    double acc = 0.5 * (g(lo) + g(hi));
    for (int i = lo + 1; i < hi; ++i) acc += g(i);
    return acc * dr;
}

}  // namespace

GridSpec GridSpec::make(int M, double sbar) {
    if (M < 3) throw ConfigError("grid needs at least 3 nodes, got " + std::to_string(M));
    if (!(sbar > 0.0) || !std::isfinite(sbar)) throw ConfigError("sbar must be positive and finite");
    return GridSpec{M, sbar};
}

Eigen::VectorXd GridSpec::nodes() const {
    Eigen::VectorXd r(M);
    for (int i = 0; i < M; ++i) r[i] = this->r(i);
    return r;
}

Eigen::VectorXd GridSpec::weights() const {
    Eigen::VectorXd w = Eigen::VectorXd::Constant(M, dr());
    w[0] *= 0.5;
    w[M - 1] *= 0.5;
    return w;
}

GridFunction::GridFunction(GridSpec s, Eigen::VectorXd v) : spec(s), values(std::move(v)) {
    if (values.size() != spec.M)
        throw ShapeError("grid function has " + std::to_string(values.size()) + " values for " +
                         std::to_string(spec.M) + " nodes");
}

GridFunction GridFunction::zeros(const GridSpec& s) { return {s, Eigen::VectorXd::Zero(s.M)}; }

GridFunction GridFunction::constant(const GridSpec& s, double c) {
    return {s, Eigen::VectorXd::Constant(s.M, c)};
}

void require_same_grid(const GridSpec& a, const GridSpec& b) {
    if (a != b) throw ShapeError("grid functions live on different grids");
}

double inner_product(const GridFunction& f, const GridFunction& g) {
    require_same_grid(f.spec, g.spec);
    return trapz_range(0, f.spec.M - 1, f.spec.dr(), [&](int i) { return f.values[i] * g.values[i]; });
}

double l2_norm(const GridFunction& f) { return std::sqrt(inner_product(f, f)); }

double h1_seminorm(const GridFunction& f) {
    const int M = f.spec.M;
    const double dr = f.spec.dr();
    Eigen::VectorXd d(M);
    for (int i = 0; i + 1 < M; ++i) d[i] = (f.values[i + 1] - f.values[i]) / dr;
    d[M - 1] = d[M - 2];
    return l2_norm(GridFunction(f.spec, std::move(d)));
}

double sup_norm(const GridFunction& f) { return f.values.cwiseAbs().maxCoeff(); }

bool in_domain_astar(const GridFunction& f, double tol) {
    return std::abs(f.back()) <= tol && std::isfinite(h1_seminorm(f));
}

bool in_domain_a(const GridFunction& f, double tol) {
    return std::abs(f.front()) <= tol && std::isfinite(h1_seminorm(f));
}

int aligned_steps(double s, double step, const char* what) {
    const double q = s / step;
    const double n = std::round(q);
    if (!std::isfinite(q) || std::abs(q - n) > 1e-9 * std::max(1.0, std::abs(n)))
        throw AlignmentError(std::string(what) + " = " + std::to_string(s) +
                             " is not a multiple of the grid step " + std::to_string(step));
    return static_cast<int>(n);
}

double dq_energy(const GridFunction& x, double s) {
    const GridSpec& g = x.spec;
    if (!(s > 0.0 && s < g.sbar)) throw DomainError("dq_energy needs 0 < s < sbar");
    const int k = aligned_steps(s, g.dr(), "shift");
    return trapz_range(k, g.M - 1, g.dr(), [&](int i) {
        const double d = x.values[i] - x.values[i - k];
        return d * d / s;
    });
}

double dq_pairing(const GridFunction& x, double s) {
    const GridSpec& g = x.spec;
    if (!(s > 0.0 && 2.0 * s < g.sbar)) throw DomainError("dq_pairing needs 0 < 2s < sbar");
    const int k = aligned_steps(s, g.dr(), "shift");
    return trapz_range(k, g.M - 1 - k, g.dr(), [&](int i) {
        return (x.values[i + k] - x.values[i]) / s * x.values[i];
    });
}

}  // namespace hjbt
