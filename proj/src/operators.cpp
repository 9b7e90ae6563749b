#include "hjbt/operators.hpp"

#include <cmath>
#include <string>

#include "hjbt/errors.hpp"

namespace hjbt {

namespace {

Eigen::VectorXd derivative(const GridSpec& g, const Eigen::VectorXd& f) {
    const int M = g.M;
    const double dr = g.dr();
    Eigen::VectorXd d(M);
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dr);
    for (int i = 1; i + 1 < M; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * dr);
    d[M - 1] = (3.0 * f[M - 1] - 4.0 * f[M - 2] + f[M - 3]) / (2.0 * dr);
    return d;
}

void check_lam(double lam) {
    if (!(lam > 0.0) || !std::isfinite(lam)) throw ConfigError("resolvent shift must be positive");
}

}  // namespace

GridFunction OperatorMatrix::apply(const GridFunction& f) const {
    require_same_grid(spec, f.spec);
    return {spec, entries * f.values};
}

double domain_tol(const GridFunction& f, double rel) { return rel * sup_norm(f); }

GridFunction apply_A(const ProblemSpec& p, const GridFunction& f, double dom_tol_rel) {
    require_same_grid(p.grid, f.spec);
    if (!in_domain_a(f, domain_tol(f, dom_tol_rel)))
        throw DomainError("apply_A: f(0) = " + std::to_string(f.front()) + " is not zero");
    return {p.grid, -p.beta * derivative(p.grid, f.values)};
}

GridFunction apply_Astar(const ProblemSpec& p, const GridFunction& f, double dom_tol_rel) {
    require_same_grid(p.grid, f.spec);
    if (!in_domain_astar(f, domain_tol(f, dom_tol_rel)))
        throw DomainError("apply_Astar: f(sbar) = " + std::to_string(f.back()) + " is not zero");
    return {p.grid, p.beta * derivative(p.grid, f.values)};
}

GridFunction resolvent_A(const ProblemSpec& p, double lam, const GridFunction& phi) {
    check_lam(lam);
    require_same_grid(p.grid, phi.spec);
    const int M = p.grid.M;
    const double h = 0.5 * p.dr();
    const double e = std::exp(-lam * p.dr() / p.beta);
    Eigen::VectorXd I(M);
    I[0] = 0.0;
    for (int i = 1; i < M; ++i) I[i] = e * I[i - 1] + h * (e * phi.values[i - 1] + phi.values[i]);
    return {p.grid, -I / p.beta};
}

GridFunction resolvent_Astar(const ProblemSpec& p, double lam, const GridFunction& phi) {
    check_lam(lam);
    require_same_grid(p.grid, phi.spec);
    const int M = p.grid.M;
    const double h = 0.5 * p.dr();
    const double e = std::exp(-lam * p.dr() / p.beta);
    Eigen::VectorXd J(M);
    J[M - 1] = 0.0;
    for (int i = M - 2; i >= 0; --i) J[i] = e * J[i + 1] + h * (phi.values[i] + e * phi.values[i + 1]);
    return {p.grid, -J / p.beta};
}

GridFunction resolvent_A_paired(const ProblemSpec& p, double lam, const GridFunction& phi) {
    GridFunction out = resolvent_A(p, lam, phi);
    const int M = p.grid.M;
    const double c = 0.5 * p.dr() / p.beta;
    out.values[0] = -c * phi.values[0];
    out.values[M - 1] += c * phi.values[M - 1];
    return out;
}

OperatorMatrix resolvent_A_matrix(const ProblemSpec& p, double lam) {
    check_lam(lam);
    const int M = p.grid.M;
    const double dr = p.dr();
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(M, M);
    for (int i = 1; i < M; ++i)
        for (int j = 0; j <= i; ++j) {
            const double wt = (j == 0 || j == i) ? 0.5 * dr : dr;
            R(i, j) = -std::exp(-lam * (i - j) * dr / p.beta) * wt / p.beta;
        }
    return {p.grid, std::move(R), false};
}

OperatorMatrix resolvent_Astar_matrix(const ProblemSpec& p, double lam) {
    check_lam(lam);
    const int M = p.grid.M;
    const double dr = p.dr();
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(M, M);
    for (int i = 0; i + 1 < M; ++i)
        for (int j = i; j < M; ++j) {
            const double wt = (j == i || j == M - 1) ? 0.5 * dr : dr;
            R(i, j) = -std::exp(-lam * (j - i) * dr / p.beta) * wt / p.beta;
        }
    return {p.grid, std::move(R), false};
}

OperatorMatrix resolvent_A_paired_matrix(const ProblemSpec& p, double lam) {
    const OperatorMatrix Rs = resolvent_Astar_matrix(p, lam);
    const Eigen::VectorXd w = p.grid.weights();
    Eigen::MatrixXd R = w.cwiseInverse().asDiagonal() * Rs.entries.transpose() * w.asDiagonal();
    return {p.grid, std::move(R), false};
}

GridFunction BFactorization::apply(const GridFunction& x) const {
    require_same_grid(grid(), x.spec);
    return {grid(), B.entries * x.values};
}

double BFactorization::quad(const Eigen::VectorXd& x) const { return x.dot(w.cwiseProduct(B.entries * x)); }

double BFactorization::b_norm(const GridFunction& x) const {
    require_same_grid(grid(), x.spec);
    return std::sqrt(std::max(0.0, quad(x.values)));
}

GridFunction BFactorization::apply_half(const GridFunction& x) const {
    require_same_grid(grid(), x.spec);
    return {grid(), B_half.entries * x.values};
}

GridFunction BFactorization::astar_b(const GridFunction& x) const {
    require_same_grid(grid(), x.spec);
    return {grid(), R.entries * x.values + lam * (B.entries * x.values)};
}

GridFunction BFactorization::eigenfunction(int i) const {
    return {grid(), sym_vectors.col(i).cwiseQuotient(w.cwiseSqrt())};
}

double BFactorization::delta0_b_norm() const {
    return std::sqrt(B.entries.row(0).transpose().cwiseAbs2().cwiseQuotient(w).sum());
}

BFactorization build_B(const ProblemSpec& p, const BOptions& opt) {
    const double lam = p.lambda_b;
    if (!(lam > 0.0 && lam < 1.0)) throw ConfigError("lambda_b must lie in (0, 1)");
    BFactorization bf;
    bf.problem = p;
    bf.lam = lam;
    bf.w = p.grid.weights();
    const Eigen::VectorXd sw = bf.w.cwiseSqrt();
    const Eigen::VectorXd isw = sw.cwiseInverse();

    bf.Rstar = resolvent_Astar_matrix(p, lam);
    bf.R = resolvent_A_paired_matrix(p, lam);

    // Adjointness in the weighted inner product: W R = (W R*)^T.
    const Eigen::MatrixXd WR = bf.w.asDiagonal() * bf.R.entries;
    const Eigen::MatrixXd WRs = bf.w.asDiagonal() * bf.Rstar.entries;
    bf.adjoint_defect = (WR - WRs.transpose()).cwiseAbs().maxCoeff();

    const Eigen::MatrixXd Braw = bf.Rstar.entries * bf.R.entries;
    Eigen::MatrixXd S = sw.asDiagonal() * Braw * isw.asDiagonal();
    bf.raw_symmetry_defect = (S - S.transpose()).cwiseAbs().maxCoeff();
    if (bf.raw_symmetry_defect > opt.sym_tol)
        throw OperatorConstructionError("B symmetry defect " + std::to_string(bf.raw_symmetry_defect) +
                                        " exceeds tolerance; grid too coarse");
    S = 0.5 * (S + S.transpose()).eval();
    bf.B = {p.grid, isw.asDiagonal() * S * sw.asDiagonal(), false};

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    if (es.info() != Eigen::Success) throw OperatorConstructionError("eigendecomposition of B failed");
    Eigen::VectorXd ev = es.eigenvalues();
    bf.min_eigenvalue_raw = ev.minCoeff();
    bf.max_eigenvalue = ev.maxCoeff();
    const double clip = opt.clip_rel * bf.max_eigenvalue;
    if (bf.min_eigenvalue_raw < -clip)
        throw OperatorConstructionError("B has eigenvalue " + std::to_string(bf.min_eigenvalue_raw) +
                                        " below the clipping threshold");
    for (int i = 0; i < ev.size(); ++i)
        if (std::abs(ev[i]) <= clip) {
            ev[i] = 0.0;
            ++bf.kernel_dim;
        }
    bf.eigenvalues = ev;
    bf.sym_vectors = es.eigenvectors();
    const Eigen::MatrixXd& Q = bf.sym_vectors;
    bf.B_half = {p.grid,
                 isw.asDiagonal() * (Q * ev.cwiseSqrt().asDiagonal() * Q.transpose()) * sw.asDiagonal(), false};
    return bf;
}

RenardyReport check_renardy(const BFactorization& bf, double tol) {
    const Eigen::VectorXd sw = bf.w.cwiseSqrt();
    const Eigen::VectorXd isw = sw.cwiseInverse();
    // Quadratic form of B - A*B = (1 - lam) B - R in orthonormal coordinates y = W^1/2 x.
    const Eigen::MatrixXd K = (1.0 - bf.lam) * bf.B.entries - bf.R.entries;
    Eigen::MatrixXd Qn = sw.asDiagonal() * K * isw.asDiagonal();
    Qn = 0.5 * (Qn + Qn.transpose()).eval();

    RenardyReport rep;
    rep.tol = tol;
    rep.min_eigenvalue_full = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Qn, Eigen::EigenvaluesOnly)
                                  .eigenvalues()
                                  .minCoeff();
    const int M = bf.grid().M;
    const int r = M - bf.kernel_dim;
    const Eigen::MatrixXd P = bf.sym_vectors.rightCols(r);  // eigenvalues ascending, kernel first
    const Eigen::MatrixXd Qr = P.transpose() * Qn * P;
    rep.min_eigenvalue =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Qr, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    rep.pass = rep.min_eigenvalue >= -tol;
    return rep;
}

double astar_b_identity_defect(const ProblemSpec& p, int n_probes) {
    const double lam = p.lambda_b;
    const GridSpec& g = p.grid;
    std::vector<GridFunction> probes;
    for (int k = 0; k < n_probes; ++k) {
        GridFunction x = GridFunction::sample(g, [&](double r) { return std::cos(k * M_PI * r / g.sbar); });
        x.values /= l2_norm(x);
        probes.push_back(std::move(x));
    }
    double worst = 0.0;
    for (const GridFunction& x : probes) {
        const GridFunction Rx = resolvent_A_paired(p, lam, x);
        const GridFunction Bx = resolvent_Astar(p, lam, Rx);
        const GridFunction lhs = apply_Astar(p, Bx);
        const GridFunction err(g, lhs.values - Rx.values - lam * Bx.values);
        for (const GridFunction& y : probes) worst = std::max(worst, std::abs(inner_product(err, y)));
    }
    return worst;
}

GridFunction eta_n(const GridSpec& g, int n, bool strict) {
    if (n < 1) throw ResolutionError("n must be >= 1");
    const double dr = g.dr();
    if (strict && 1.0 / n < 2.0 * dr)
        throw ResolutionError("eta_n support 1/" + std::to_string(n) + " is narrower than two grid cells");
    const double c = 1.0 / n;
    auto eta = [n](double r) { return std::max(0.0, 2.0 * n - 2.0 * n * n * r); };
    // Exact integrals of hat_i * eta: two-point Gauss is exact on each linear piece.
    const double gq = 0.5 / std::sqrt(3.0);
    Eigen::VectorXd m = Eigen::VectorXd::Zero(g.M);
    for (int j = 0; j + 1 < g.M; ++j) {
        const double a = g.r(j), b = g.r(j + 1);
        if (a >= c) break;
        const double cuts[3] = {a, std::min(b, c), b};
        for (int piece = 0; piece < 2; ++piece) {
            const double lo = cuts[piece], hi = cuts[piece + 1];
            if (hi <= lo) continue;
            const double mid = 0.5 * (lo + hi), half = hi - lo;
            for (double t : {mid - gq * half, mid + gq * half}) {
                const double e = eta(t) * 0.5 * half;
                m[j] += e * (b - t) / dr;
                m[j + 1] += e * (t - a) / dr;
            }
        }
    }
    GridFunction out(g, m.cwiseQuotient(g.weights()));
    const double mass = inner_product(out, GridFunction::constant(g, 1.0));
    out.values /= mass;
    return out;
}

double cn_functional(int n, const GridFunction& x) { return inner_product(x, eta_n(x.spec, n)); }

GridFunction cn_adjoint(const GridSpec& g, int n, double gamma) {
    GridFunction e = eta_n(g, n);
    e.values *= gamma;
    return e;
}

double delta0(const GridFunction& f, double dom_tol_rel) {
    if (!in_domain_astar(f, domain_tol(f, dom_tol_rel)))
        throw DomainError("delta0 needs f(sbar) = 0, got " + std::to_string(f.back()));
    return f.front();
}

GridFunction nu(const ProblemSpec& p) {
    return GridFunction::sample(p.grid, [&](double r) { return std::exp(-p.mu * r / p.beta); });
}

}  // namespace hjbt
