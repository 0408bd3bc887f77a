#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "excursus/grid.hpp"

#include <cmath>

using namespace excursus;

TEST_CASE("grid basics") {
    Grid g(-1.0, 3.0, 8);
    CHECK(g.h() == doctest::Approx(0.5));
    CHECK(g.size() == 9);
    CHECK(g.point(0) == doctest::Approx(-1.0));
    CHECK(g.point(8) == doctest::Approx(3.0));
    CHECK(g.cell(-2.0) == 0);
    CHECK(g.cell(3.5) == 7);
    CHECK(g.cell(0.1) == 2);
    CHECK_THROWS(Grid(0.0, 1.0, 7));
    CHECK_THROWS(Grid(1.0, 0.0, 8));
}

TEST_CASE("simpson integrates cubics exactly") {
    Grid g(0.0, 2.0, 10);
    ArrayXd v = g.map([](double x) { return x * x * x - 2 * x + 1; });
    // antiderivative x^4/4 - x^2 + x at 2: 4 - 4 + 2 = 2
    CHECK(simpson(g, v) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("simpson on sin") {
    Grid g(0.0, M_PI, 200);
    ArrayXd v = g.map([](double x) { return std::sin(x); });
    CHECK(simpson(g, v) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("cumulative integral matches analytic antiderivative") {
    Grid g(0.0, 1.0, 100);
    ArrayXd v = g.map([](double x) { return 3 * x * x; });
    ArrayXd c = cumulative_integral(g, v);
    for (int i = 0; i <= 100; i += 7) {
        double x = g.point(i);
        CHECK(c[i] == doctest::Approx(x * x * x).epsilon(1e-8));
    }
    CHECK(c[100] == doctest::Approx(simpson(g, v)).epsilon(1e-12));
}

TEST_CASE("adaptive integrate") {
    double v = integrate([](double x) { return std::exp(x); }, 0.0, 1.0);
    CHECK(v == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-11));
}

TEST_CASE("improper integral converges and flags divergence") {
    TailIntegral a =
        improper_integral([](double x) { return std::exp(-x); }, 0.0, +1.0);
    CHECK(a.converged);
    CHECK(a.value == doctest::Approx(1.0).epsilon(1e-9));

    TailIntegral b =
        improper_integral([](double x) { return std::exp(x); }, 0.0, -1.0);
    CHECK(b.converged);
    CHECK(b.value == doctest::Approx(1.0).epsilon(1e-9));

    TailIntegral d =
        improper_integral([](double x) { return 1.0 / x; }, 1.0, +1.0);
    CHECK_FALSE(d.converged);
}

TEST_CASE("endpoint integral handles integrable singularities") {
    TailIntegral a = endpoint_integral(
        [](double x) { return 1.0 / std::sqrt(1.0 - x); }, 0.0, 1.0, 1e-10);
    CHECK(a.converged);
    CHECK(a.value == doctest::Approx(2.0).epsilon(1e-7));

    TailIntegral d = endpoint_integral(
        [](double x) { return 1.0 / (1.0 - x); }, 0.0, 1.0, 1e-10);
    CHECK_FALSE(d.converged);
}

TEST_CASE("tabulated function interpolates with fourth order accuracy") {
    Grid g(0.0, M_PI, 40);
    TabulatedFunction f{g, g.map([](double x) { return std::sin(x); }),
                        g.map([](double x) { return std::cos(x); })};
    double x = 1.2345;
    CHECK(f(x) == doctest::Approx(std::sin(x)).epsilon(1e-7));
    CHECK(f.derivative(x) == doctest::Approx(std::cos(x)).epsilon(1e-5));
}

TEST_CASE("invert monotone") {
    Grid g(0.0, 2.0, 200);
    TabulatedFunction f{g, g.map([](double x) { return x * x * x; }),
                        g.map([](double x) { return 3 * x * x; })};
    CHECK(invert_monotone(f, 1.0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(invert_monotone(f, 0.125) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("inverse cdf sampling on a linear density") {
    Grid g(0.0, 1.0, 100);
    ArrayXd dens = g.map([](double x) { return 2.0 * x; });
    // CDF is x^2, so u = 0.25 maps to x = 0.5
    CHECK(sample_inverse_cdf(g, dens, 0.25) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(sample_inverse_cdf(g, dens, 0.81) == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("hermite and linear eval clamp to the grid") {
    Grid g(0.0, 1.0, 4);
    ArrayXd v = g.map([](double x) { return x; });
    ArrayXd d = g.map([](double) { return 1.0; });
    CHECK(hermite_eval(g, v, d, 0.3) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(linear_eval(g, v, 0.3) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(linear_eval(g, v, 2.0) == doctest::Approx(1.0));
}
