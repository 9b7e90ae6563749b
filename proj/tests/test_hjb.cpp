#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <memory>
#include <random>

#include "hjbt/errors.hpp"
#include "hjbt/hjb.hpp"

using namespace hjbt;

namespace {

struct Desk {
    ProblemSpec p;
    ControlSets sets;
    std::shared_ptr<const BFactorization> bf;
};

Desk desk(double mu = 0.0, int M = 201) {
    Desk d{ProblemSpec::make(1.0, mu, 1.0, 1.0, 0.5, M), ControlSets::make(-1, 1, -1, 1), nullptr};
    d.bf = std::make_shared<const BFactorization>(build_B(d.p));
    return d;
}

GridFunction random_smooth(const GridSpec& g, std::mt19937_64& rng, bool vanish_at_end) {
    std::uniform_real_distribution<double> u(-1, 1);
    const double c0 = u(rng), c1 = u(rng), c2 = u(rng);
    return GridFunction::sample(g, [&](double r) {
        const double v = c0 + c1 * std::cos(M_PI * r) + c2 * std::sin(2 * M_PI * r);
        return vanish_at_end ? (1 - r) * v : v;
    });
}

/// Central difference of f along direction v.
template <class F>
double directional(F&& f, const GridFunction& x, const GridFunction& v, double h = 1e-5) {
    return (f(GridFunction{x.spec, x.values + h * v.values}) - f(GridFunction{x.spec, x.values - h * v.values})) /
           (2 * h);
}

}  // namespace

TEST_CASE("Hamiltonian examples") {
    const Desk d = desk();
    const GridFunction zero = GridFunction::zeros(d.p.grid);
    const HamiltonianResult h0 = hamiltonian(d.p, d.sets, constant_cost(0.3), zero, zero);
    CHECK(h0.value == doctest::Approx(0.3).epsilon(1e-15));

    const ControlSets box = ControlSets::make(-1, 1, 0, 0);
    const GridFunction p2 = GridFunction::sample(d.p.grid, [](double r) { return 2 * (1 - r); });
    // <p, alpha> vanishes because Lambda = {0}.
    const HamiltonianResult h = hamiltonian(d.p, box, constant_cost(0.0), zero, p2);
    CHECK(h.value == doctest::Approx(-2.0).epsilon(1e-14));
    CHECK(h.a == -1.0);

    const GridFunction bad = GridFunction::constant(d.p.grid, 1.0);
    CHECK_THROWS_AS(hamiltonian(d.p, d.sets, constant_cost(0.0), zero, bad), DomainError);
}

TEST_CASE("vertex rule agrees with dense lattice enumeration") {
    std::mt19937_64 rng(3);
    const Desk d = desk(0.5);
    const RunningCost L = clipped_b_energy_cost(d.bf, 1.0);
    for (int k = 0; k < 20; ++k) {
        const GridFunction x = random_smooth(d.p.grid, rng, false);
        const GridFunction pb = random_smooth(d.p.grid, rng, true);
        const GridFunction pa = random_smooth(d.p.grid, rng, false);
        const double v = hamiltonian(d.p, d.sets, L, x, pb, pa).value;
        const double o = hamiltonian_lattice(d.p, d.sets, L, x, pb, pa, 101).value;
        CHECK(std::abs(v - o) <= 1e-9);
        // Pointwise distributed controls form a larger class.
        CHECK(hamiltonian(d.p, d.sets, L, x, pb, pa, AlphaClass::pointwise).value <= v + 1e-15);
    }
}

TEST_CASE("control-dependent costs use lattice enumeration with a gap") {
    const Desk d = desk();
    const RunningCost L = generic_cost(
        "quadratic control", [](const Eigen::VectorXd&, const Eigen::VectorXd& al, double a) {
            return 0.5 * (a - 0.3) * (a - 0.3) + (al.size() ? 0.1 * al[0] * al[0] : 0.0);
        },
        1.0, L1Mode::unsquared, false);
    const GridFunction x = GridFunction::zeros(d.p.grid);
    const GridFunction pb = GridFunction::sample(d.p.grid, [](double r) { return 0.2 * (1 - r); });
    const HamiltonianResult h = hamiltonian(d.p, d.sets, L, x, pb, GridFunction::zeros(d.p.grid));
    // min_a 0.2 a + (a - 0.3)^2 / 2 at a = 0.1; alpha = 0.
    CHECK(h.value == doctest::Approx(0.2 * 0.1 + 0.5 * 0.04).epsilon(1e-12));
    CHECK(h.gap >= 0.0);
    CHECK_THROWS_AS(hamiltonian(d.p, d.sets, L, x, pb, pb, AlphaClass::pointwise), ConfigError);
}

TEST_CASE("Hamiltonian is concave in the costate") {
    std::mt19937_64 rng(13);
    const Desk d = desk(-1.0);
    const RunningCost L = clipped_b_energy_cost(d.bf, 1.0);
    std::uniform_real_distribution<double> u(0, 1);
    for (AlphaClass cls : {AlphaClass::constant, AlphaClass::pointwise})
        for (int k = 0; k < 20; ++k) {
            const GridFunction x = random_smooth(d.p.grid, rng, false);
            const GridFunction p1 = random_smooth(d.p.grid, rng, true), p2 = random_smooth(d.p.grid, rng, true);
            const double t = u(rng);
            const GridFunction pt{d.p.grid, t * p1.values + (1 - t) * p2.values};
            const double lhs = hamiltonian(d.p, d.sets, L, x, pt, cls).value;
            const double rhs = t * hamiltonian(d.p, d.sets, L, x, p1, cls).value +
                               (1 - t) * hamiltonian(d.p, d.sets, L, x, p2, cls).value;
            CHECK(lhs >= rhs - 1e-9);
        }
}

TEST_CASE("test functions: gradients and A* of gradients") {
    std::mt19937_64 rng(17);
    const Desk d = desk();
    const GridFunction x = random_smooth(d.p.grid, rng, false), v = random_smooth(d.p.grid, rng, false);
    const Test1Function q = Test1Function::quadratic_b(d.bf, random_smooth(d.p.grid, rng, true), 1.5);
    auto qv = [&](const GridFunction& y) { return q.value(y); };
    CHECK(directional(qv, x, v) == doctest::Approx(inner_product(q.gradient(x), v)).epsilon(1e-7));
    CHECK(std::abs(q.gradient(x).back()) == 0.0);

    std::vector<GridFunction> dirs{GridFunction::sample(d.p.grid, [](double r) { return std::cos(M_PI * r / 2); }),
                                   GridFunction::sample(d.p.grid, [](double r) { return 1 - r * r; })};
    Eigen::MatrixXd H(2, 2);
    H << 1.0, 0.3, 0.3, -0.5;
    const Test1Function c = Test1Function::cylinder(d.p, dirs, 0.2, Eigen::Vector2d(0.5, -1.0), H);
    auto cv = [&](const GridFunction& y) { return c.value(y); };
    CHECK(directional(cv, x, v) == doctest::Approx(inner_product(c.gradient(x), v)).epsilon(1e-7));
    const GridFunction ag = c.astar_gradient(x);
    CHECK((ag.values - apply_Astar(d.p, c.gradient(x)).values).cwiseAbs().maxCoeff() < 1e-10);
    const GridFunction off = GridFunction::constant(d.p.grid, 1.0);
    CHECK_THROWS_AS(Test1Function::cylinder(d.p, {off}, 0, Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Zero(1, 1)),
                    DomainError);

    const Test1Function n = q.negated();
    CHECK(n.value(x) == doctest::Approx(-q.value(x)));
    CHECK(Test1Function::zero(d.p.grid).gradient(x).values.isZero());

    for (const Test2Function g : {Test2Function::quadratic(0.7), Test2Function::soft(0.7)}) {
        auto gv = [&](const GridFunction& y) { return g.value(y); };
        CHECK(directional(gv, x, v) == doctest::Approx(inner_product(g.gradient(x), v)).epsilon(1e-7));
        const double lim = g.kind == Test2Function::Kind::quadratic ? 1.4 : 0.7;
        CHECK(g.radial_quotient(GridFunction::zeros(d.p.grid)) == doctest::Approx(lim));
        CHECK(g.g0_prime(0.5) >= 0.0);
    }
    CHECK_THROWS_AS(Test2Function::quadratic(-1.0), ConfigError);
}

TEST_CASE("Lyapunov identity: trivial and smooth cases") {
    const Desk d = desk();
    const GridFunction x0 = GridFunction::sample(d.p.grid, [](double r) { return (1 - r) * (0.5 + r); });
    const int N = d.p.steps(1.0);
    const LyapunovReport z = lyapunov_identity_residual(d.p, Test1Function::zero(d.p.grid), x0, ControlPath::zero(d.p, N), 1.0);
    CHECK(z.residual == 0.0);

    double prev = 0.0;
    for (int M : {201, 401}) {
        const Desk e = desk(0.0, M);
        const GridFunction y0 = GridFunction::sample(e.p.grid, [](double r) { return (1 - r) * (0.5 + r); });
        const Test1Function phi = Test1Function::quadratic_b(e.bf, GridFunction::zeros(e.p.grid));
        const LyapunovReport r =
            lyapunov_identity_residual(e.p, phi, y0, ControlPath::zero(e.p, e.p.steps(0.6)), 0.6);
        CHECK(r.residual <= 1e-3);
        if (M == 401) CHECK(r.residual < prev);
        prev = r.residual;
    }
}

TEST_CASE("Lyapunov identity on bang-bang boundary trajectories") {
    for (double mu : {-1.0, 0.0, 1.0}) {
        double prev = 0.0;
        for (int M : {201, 401}) {
            const Desk e = desk(mu, M);
            const GridFunction y0 = GridFunction::sample(e.p.grid, [](double r) { return (1 - r) * (0.5 + r); });
            const int N = e.p.steps(1.0);
            ControlPath path = ControlPath::zero(e.p, N);
            for (int k = 0; k < N; ++k) path.a[k] = (k * 4 / N) % 2 ? -1.0 : 1.0;
            const Test1Function phi = Test1Function::quadratic_b(e.bf, GridFunction::zeros(e.p.grid));
            const LyapunovReport r = lyapunov_identity_residual(e.p, phi, y0, path, 1.0);
            CHECK(r.residual <= 1e-3);
            if (M == 401) CHECK(r.residual < prev);
            prev = r.residual;
        }
    }
}

TEST_CASE("test2 expansion rate") {
    const Desk d = desk();
    const std::vector<double> sl{8 * d.p.dt, 4 * d.p.dt, 2 * d.p.dt, d.p.dt};
    const GridFunction x0 = GridFunction::sample(d.p.grid, [](double r) { return (1 - r) * (0.5 + r); });

    // Zero controls and a compatible inflow value: the expansion closes to 0.
    const GridFunction xc = GridFunction::sample(d.p.grid, [](double r) { return (1 - r) * r; });
    const RateReport z = test2_rate_check(d.p, d.sets, Test2Function::quadratic(1.0), xc, {{0, 0}}, sl);
    CHECK(z.pass);
    CHECK(z.rows.back().lhs < z.rows.front().lhs);
    CHECK(z.rows.back().lhs < 1e-2);

    const RateReport r = test2_rate_check(d.p, d.sets, Test2Function::quadratic(1.0), x0, {{1, 0}}, sl);
    CHECK(r.pass);
    for (std::size_t i = 1; i < r.rows.size(); ++i) CHECK(r.rows[i].excess < r.rows[i - 1].excess);
    CHECK(r.rows.front().s > r.rows.back().s);

    const RateReport r3 = test2_rate_check(d.p, d.sets, Test2Function::quadratic(3.0), x0, {{1, 0}}, sl);
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        CHECK(r3.rows[i].lhs == doctest::Approx(3 * r.rows[i].lhs).epsilon(1e-12));
        CHECK(r3.rows[i].bound == doctest::Approx(3 * r.rows[i].bound).epsilon(1e-14));
    }
    CHECK(test2_rate_check(d.p, d.sets, Test2Function::soft(2.0), x0, vertex_controls(d.sets), sl).pass);
}

TEST_CASE("test1 expansion rate") {
    const Desk d = desk(0.5);
    const std::vector<double> sl{8 * d.p.dt, 4 * d.p.dt, 2 * d.p.dt, d.p.dt};
    const GridFunction x0 = GridFunction::sample(d.p.grid, [](double r) { return 1 - r * r; });
    const RateReport z = test1_rate_check(d.p, Test1Function::zero(d.p.grid), x0, vertex_controls(d.sets), sl);
    for (const auto& row : z.rows) CHECK(row.lhs == 0.0);

    const Test1Function phi = Test1Function::quadratic_b(d.bf, GridFunction::zeros(d.p.grid));
    const RateReport r = test1_rate_check(d.p, phi, x0, {{1, 0}}, sl);
    CHECK(r.pass);
    CHECK(r.rows.back().lhs < r.rows.front().lhs);

    const std::vector<ConstantControl> five{{-1, 0}, {-0.5, 0}, {0, 0}, {0.5, 0}, {1, 0}};
    const RateReport f = test1_rate_check(d.p, phi, x0, five, sl);
    CHECK(f.pass);
    CHECK(f.rows.back().spread <= 2 * r.rows.back().lhs);
}

TEST_CASE("gradient range bound") {
    const Desk d = desk();
    const double C = std::exp(2.0);
    const GradientBoundReport z = gradient_b_bound_check(*d.bf, GridFunction::zeros(d.p.grid), C);
    CHECK(z.pass);
    CHECK(z.worst_ratio == 0.0);

    const RunningCost L = clipped_b_energy_cost(d.bf, 1.0);
    auto est = std::make_shared<const ValueEstimator>(d.p, d.sets, L, Lattice{2, 2, 4}, 1.0);
    const Test1Function phi = Test1Function::quadratic_b(d.bf, seed_anchor(*d.bf, 99, 6, 0.5));
    const ViscosityReport v = subsolution_residual(d.p, d.sets, L, *d.bf, Candidate::value_function(est), phi,
                                                   Test2Function::quadratic(0.0), 1);
    REQUIRE(v.extremum.located);
    const GradientBoundReport g = gradient_b_bound_check(*d.bf, phi.gradient(v.extremum.x), C);
    CHECK(g.pass);
    CHECK(g.near_kernel_ratio <= g.worst_ratio);
    CHECK(g.directions > d.p.grid.M);
    // A gradient with a component outside the range of B violates the bound.
    const GridFunction rough = GridFunction::sample(d.p.grid, [](double r) { return r < 0.5 ? 1.0 : 0.0; });
    CHECK_FALSE(gradient_b_bound_check(*d.bf, rough, C).pass);
}

TEST_CASE("constant solution passes both viscosity checks exactly") {
    const Desk d = desk();
    const double c = 0.7;
    const ViscosityReport sub = subsolution_residual(d.p, d.sets, constant_cost(c), *d.bf, Candidate::constant(c / 1.0),
                                                     Test1Function::zero(d.p.grid), Test2Function::quadratic(0), 1);
    const ViscosityReport sup = supersolution_residual(d.p, d.sets, constant_cost(c), *d.bf, Candidate::constant(c),
                                                       Test1Function::zero(d.p.grid), Test2Function::quadratic(0), 1);
    CHECK(sub.outcome == Outcome::pass);
    CHECK(sup.outcome == Outcome::pass);
    CHECK(sub.lhs == 0.0);
    CHECK(sup.lhs == 0.0);
    CHECK(sub.slack == 0.0);
}

TEST_CASE("value function passes the viscosity checks; a spiked candidate does not") {
    const Desk d = desk();
    const RunningCost L = clipped_b_energy_cost(d.bf, 1.0);
    auto est = std::make_shared<const ValueEstimator>(d.p, d.sets, L, Lattice{2, 2, 4}, 1.0);
    const Candidate V = Candidate::value_function(est);
    const Test1Function phi = Test1Function::quadratic_b(d.bf, seed_anchor(*d.bf, 99, 6, 0.5));
    const Test2Function g = Test2Function::quadratic(0.1);
    int pass = 0, fail = 0;
    for (int seed = 1; seed <= 3; ++seed) {
        for (const ViscosityReport& r : {subsolution_residual(d.p, d.sets, L, *d.bf, V, phi, g, seed),
                                         supersolution_residual(d.p, d.sets, L, *d.bf, V, phi, g, seed)}) {
            pass += r.outcome == Outcome::pass;
            fail += r.outcome == Outcome::fail;
            CHECK(r.slack == doctest::Approx(r.slack_value + r.slack_stationarity + r.slack_discretization));
        }
    }
    CHECK(fail == 0);
    CHECK(pass >= 4);

    const Candidate bad = Candidate::with_spike(V, seed_anchor(*d.bf, 1, 6), 0.5, 0.1);
    const ViscosityReport b = subsolution_residual(d.p, d.sets, L, *d.bf, bad, phi, g, 1);
    CHECK(b.outcome == Outcome::fail);

    ViscosityOptions none;
    none.max_evals = 0;
    CHECK(subsolution_residual(d.p, d.sets, L, *d.bf, V, phi, g, 1, none).outcome == Outcome::inconclusive);
}

TEST_CASE("seed anchors lie in the slice span") {
    const Desk d = desk();
    const std::vector<GridFunction> dirs = top_eigen_directions(*d.bf, 6);
    for (int s = 1; s <= 3; ++s) {
        const GridFunction a = seed_anchor(*d.bf, s, 6, 0.5);
        CHECK(l2_norm(a) == doctest::Approx(0.5));
        GridFunction rest = a;
        for (const auto& e : dirs) rest.values -= inner_product(a, e) * e.values;
        CHECK(l2_norm(rest) < 1e-12);
    }
    for (std::size_t i = 0; i < dirs.size(); ++i)
        for (std::size_t j = 0; j < dirs.size(); ++j)
            CHECK(inner_product(dirs[i], dirs[j]) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
}

TEST_CASE("comparison probe") {
    std::mt19937_64 rng(31);
    const Desk d = desk();
    std::vector<GridFunction> pts;
    for (int k = 0; k < 4; ++k) {
        GridFunction x = random_smooth(d.p.grid, rng, false);
        x.values *= 0.5;
        pts.push_back(x);
    }
    const ComparisonReport c = comparison_probe(d.p, d.sets, constant_cost(0.4), pts, {{2, 2, 4}, 1.0, {}},
                                                {{3, 2, 2}, 2.0, {}});
    CHECK(c.pass);
    for (const auto& pt : c.points) {
        CHECK(pt.v1 + pt.gap1 >= 0.4 - 1e-12);
        CHECK(pt.v2 + pt.gap2 >= 0.4 - 1e-12);
    }

    const RunningCost L = clipped_b_energy_cost(d.bf, 1.0);
    CHECK(comparison_probe(d.p, d.sets, L, pts, {{2, 2, 4}, 1.0, {}}, {{3, 2, 4}, 1.0, {}}).pass);
    const ComparisonReport h = comparison_probe(d.p, d.sets, L, pts, {{2, 2, 4}, 1.0, {}}, {{2, 2, 4}, 2.0, {}});
    CHECK(h.pass);
    for (const auto& pt : h.points) CHECK(pt.gap2 < pt.gap1);
}
