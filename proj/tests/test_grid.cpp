#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "hjbt/errors.hpp"
#include "hjbt/grid.hpp"

using namespace hjbt;

TEST_CASE("grid nodes end exactly at sbar") {
    const GridSpec g = GridSpec::make(201, 1.0);
    CHECK(g.r(200) == 1.0);
    CHECK(g.dr() == doctest::Approx(0.005));
    CHECK_THROWS_AS(GridSpec::make(2, 1.0), ConfigError);
    CHECK_THROWS_AS(GridSpec::make(10, -1.0), ConfigError);
}

TEST_CASE("trapezoid inner product") {
    const GridSpec g = GridSpec::make(101, 1.0);
    const auto one = GridFunction::constant(g, 1.0);
    const auto r = GridFunction::sample(g, [](double x) { return x; });
    CHECK(inner_product(one, one) == 1.0);
    CHECK(std::abs(inner_product(r, one) - 0.5) < 1e-15);
    CHECK(std::abs(inner_product(r, r) - 1.0 / 3.0) < 1e-4);
    CHECK_THROWS_AS(inner_product(r, GridFunction::zeros(GridSpec::make(11, 1.0))), ShapeError);
}

TEST_CASE("inner product is symmetric and bilinear") {
    const GridSpec g = GridSpec::make(57, 2.0);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    auto rnd = [&] { return GridFunction::sample(g, [&](double) { return nd(rng); }); };
    for (int t = 0; t < 20; ++t) {
        const auto f = rnd(), h = rnd(), k = rnd();
        CHECK(std::abs(inner_product(f, h) - inner_product(h, f)) < 1e-14);
        const GridFunction comb(g, 2.5 * f.values - 0.75 * k.values);
        CHECK(std::abs(inner_product(comb, h) - (2.5 * inner_product(f, h) - 0.75 * inner_product(k, h))) < 1e-13);
    }
}

TEST_CASE("norms") {
    const GridSpec g = GridSpec::make(101, 1.0);
    const auto z = GridFunction::zeros(g);
    CHECK(l2_norm(z) == 0.0);
    CHECK(h1_seminorm(z) == 0.0);
    CHECK(sup_norm(z) == 0.0);
    const auto r = GridFunction::sample(g, [](double x) { return x; });
    CHECK(std::abs(h1_seminorm(r) - 1.0) < 1e-12);
    const auto c = GridFunction::constant(g, -3.0);
    CHECK(sup_norm(c) == 3.0);
    CHECK(h1_seminorm(c) == 0.0);
}

TEST_CASE("domain proxies") {
    const GridSpec g = GridSpec::make(101, 1.0);
    const auto f = GridFunction::sample(g, [](double r) { return 1.0 - r; });
    CHECK(in_domain_astar(f, 1e-10));
    CHECK_FALSE(in_domain_a(f, 1e-10));
    const auto z = GridFunction::zeros(g);
    CHECK(in_domain_a(z, 1e-10));
    CHECK(in_domain_astar(z, 1e-10));
    const auto b = GridFunction::sample(g, [](double r) { return r * (1.0 - r); });
    CHECK(in_domain_a(b, 1e-10));
    CHECK(in_domain_astar(b, 1e-10));
}

TEST_CASE("difference-quotient energy") {
    const GridSpec g = GridSpec::make(201, 1.0);
    const auto r = GridFunction::sample(g, [](double x) { return x; });
    CHECK(std::abs(dq_energy(r, 0.1) - 0.09) < 1e-6);
    CHECK(dq_energy(GridFunction::constant(g, 4.0), 0.1) == 0.0);
    CHECK_THROWS_AS(dq_energy(r, 0.1234), AlignmentError);
    double prev = dq_energy(r, 16 * g.dr());
    for (int k : {8, 4, 2, 1}) {
        const double v = dq_energy(r, k * g.dr());
        CHECK(v <= prev + 1e-6);
        prev = v;
    }
}

TEST_CASE("difference-quotient energy decreases for cubic data") {
    const GridSpec g = GridSpec::make(201, 1.0);
    const auto x = GridFunction::sample(g, [](double r) { return 1.0 - 2.0 * r + 3.0 * r * r - r * r * r; });
    double prev = dq_energy(x, 16 * g.dr());
    for (int k : {8, 4, 2, 1}) {
        const double v = dq_energy(x, k * g.dr());
        CHECK(v >= 0.0);
        CHECK(v <= prev + 1e-6);
        prev = v;
    }
}

TEST_CASE("difference-quotient pairing") {
    const GridSpec g = GridSpec::make(201, 1.0);
    const auto r = GridFunction::sample(g, [](double x) { return x; });
    CHECK(std::abs(dq_pairing(r, 0.05) - 0.45) < 1e-6);
    CHECK(dq_pairing(GridFunction::constant(g, 2.0), 0.05) == doctest::Approx(0.0));
    double prev = dq_pairing(r, 16 * g.dr());
    for (int k : {8, 4, 2, 1}) {
        const double v = dq_pairing(r, k * g.dr());
        CHECK(std::abs(v - 0.5) <= std::abs(prev - 0.5) + 1e-6);
        prev = v;
    }
    CHECK(std::abs(prev - 0.5) < 0.01);
    CHECK_THROWS_AS(dq_pairing(r, 0.6), DomainError);
}

TEST_CASE("pairing slope in s stays bounded under refinement") {
    auto slope = [](int M) {
        const GridSpec g = GridSpec::make(M, 1.0);
        const auto x = GridFunction::sample(g, [](double r) { return std::sin(2.0 * r) + r; });
        const double lim = 0.5 * (x.back() * x.back() - x.front() * x.front());
        double worst = 0.0;
        for (int k = 1; k <= 16; k *= 2) {
            const double s = k * 0.01;
            worst = std::max(worst, std::abs(dq_pairing(x, s) - lim) / s);
        }
        return worst;
    };
    const double a = slope(101), b = slope(201), c = slope(401);
    CHECK(b <= 1.1 * a);
    CHECK(c <= 1.1 * b);
}
