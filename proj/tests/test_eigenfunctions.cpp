#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "excursus/eigenfunctions.hpp"

#include <cmath>

using namespace excursus;

TEST_CASE("brownian eigenfunctions are two-sided exponentials") {
    DiffusionSpec spec = make_brownian();
    EigenPair pair = solve_eigenfunctions(spec, 1.0);
    double lam = std::sqrt(2.0);
    for (double x : {-3.0, -1.0, 0.0, 0.5, 2.0}) {
        CHECK(pair.log_g1_at(x) == doctest::Approx(lam * x).epsilon(1e-9));
        CHECK(pair.log_g2_at(x) == doctest::Approx(-lam * x).epsilon(1e-9));
    }
    CHECK(pair.wronskian == doctest::Approx(2.0 * lam).epsilon(1e-10));
    CHECK(pair.wronskian_deviation() < 1e-10);
}

TEST_CASE("wronskian is flat across the window") {
    for (double alpha : {0.5, 1.0, 3.0}) {
        EigenPair pair = solve_eigenfunctions(make_brownian_drift(0.5), alpha);
        CHECK(pair.wronskian_deviation() < 1e-6);
    }
    EigenPair b3 = solve_eigenfunctions(make_bessel3(), 1.0);
    CHECK(b3.wronskian_deviation() < 1e-6);
}

TEST_CASE("hitting transform: frozen closed-form values") {
    // standard brownian motion, alpha = 1: E^1 e^{-T_0} = e^{-sqrt 2}
    CHECK(hitting_laplace(make_brownian(), 1.0, 0.0, 1.0) ==
          doctest::Approx(0.2431167344342142).epsilon(1e-7));
    // drift 1/2, alpha = 1, downward: exponent mu + sqrt(mu^2 + 2 alpha) = 2
    CHECK(hitting_laplace(make_brownian_drift(0.5), 1.0, 0.0, 1.0) ==
          doctest::Approx(0.1353352832366127).epsilon(1e-7));
    // drift 1/2, alpha = 1, upward: exponent -mu + sqrt(mu^2 + 2 alpha) = 1
    CHECK(hitting_laplace(make_brownian_drift(0.5), 0.0, 1.0, 1.0) ==
          doctest::Approx(0.36787944117144233).epsilon(1e-7));
    // at x = y the transform is 1
    CHECK(hitting_laplace(make_brownian(), 0.7, 0.7, 2.0) ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("killed hitting transform picks up the extra rate") {
    // constant kill beta acts as alpha -> alpha + beta
    DiffusionSpec killed = make_brownian(-8.0, 8.0, 2000, 0.75);
    DiffusionSpec plain = make_brownian();
    CHECK(hitting_laplace(killed, 1.0, 0.0, 1.0) ==
          doctest::Approx(hitting_laplace(plain, 1.0, 0.0, 1.75)).epsilon(1e-9));
}

TEST_CASE("resolvent density closed form on the brownian line") {
    DiffusionSpec spec = make_brownian();
    EigenPair pair = solve_eigenfunctions(spec, 1.0);
    double lam = std::sqrt(2.0);
    for (double x : {-1.5, 0.0, 0.8}) {
        for (double y : {-2.0, -0.3, 0.8, 1.7}) {
            double expect = std::exp(-lam * std::abs(x - y)) / (2.0 * lam);
            CHECK(resolvent_density(pair, x, y) ==
                  doctest::Approx(expect).epsilon(1e-9));
        }
    }
}

TEST_CASE("resolvent density is symmetric off the diagonal") {
    EigenPair pair = solve_eigenfunctions(make_bessel3(), 0.7);
    for (double x : {0.5, 1.0, 2.5}) {
        for (double y : {0.8, 3.0, 6.0}) {
            CHECK(resolvent_density(pair, x, y) ==
                  doctest::Approx(resolvent_density(pair, y, x)).epsilon(1e-12));
        }
    }
}

TEST_CASE("alpha U^alpha 1 = 1 up to the window truncation deficit") {
    // Integrating the kernel over the window only misses the exponential
    // tails past the edges; the miss is (e^{-lam(x-lo)} + e^{-lam(hi-x)})/2.
    DiffusionSpec spec = make_brownian();
    for (double alpha : {0.5, 1.0, 2.0}) {
        double lam = std::sqrt(2.0 * alpha);
        EigenPair pair = solve_eigenfunctions(spec, alpha);
        ArrayXd u = resolvent_apply(spec, pair, [](double) { return 1.0; });
        const Grid& g = pair.grid;
        for (int i = 0; i <= g.n; ++i) {
            double x = g.point(i);
            if (std::abs(x) > 4.0) continue;
            double deficit = 0.5 * (std::exp(-lam * (x - g.lo)) +
                                    std::exp(-lam * (g.hi - x)));
            CHECK(alpha * u[i] == doctest::Approx(1.0 - deficit).epsilon(2e-4));
        }
    }
}

TEST_CASE("constant killing shifts the resolvent of 1") {
    double beta = 0.75, alpha = 1.0;
    DiffusionSpec spec = make_brownian(-8.0, 8.0, 2000, beta);
    EigenPair pair = solve_eigenfunctions(spec, alpha);
    ArrayXd u = resolvent_apply(spec, pair, [](double) { return 1.0; });
    int mid = pair.grid.n / 2;
    double lam = std::sqrt(2.0 * (alpha + beta));
    double expect = (1.0 - std::exp(-8.0 * lam)) / (alpha + beta);
    CHECK(u[mid] == doctest::Approx(expect).epsilon(2e-4));
}

TEST_CASE("ruin function of the drifting line is exponential") {
    DiffusionSpec spec = make_brownian_drift(0.5);
    RuinFunction r = ruin_function(spec);
    CHECK(r.exact_route);
    // s(B) = 1/(2 mu) = 1 in this normalization
    CHECK(r.s_total == doctest::Approx(1.0).epsilon(1e-10));
    for (double x : {-2.0, -0.5, 0.0, 1.0, 3.0}) {
        CHECK(r.log_r_at(x) == doctest::Approx(-x).epsilon(1e-9));
    }
    CHECK(r.passage_prob(1.0, 0.0) ==
          doctest::Approx(0.36787944117144233).epsilon(1e-9));
    CHECK(escape_rate(r, 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    // escape rate in scale: -r+/r = 2 mu e^{2 mu y}
    CHECK(escape_rate(r, 1.0) == doctest::Approx(std::exp(1.0)).epsilon(1e-9));
}

TEST_CASE("recurrent diffusions have no ruin function") {
    CHECK_THROWS_AS((void)ruin_function(make_brownian()), std::domain_error);
    CHECK_THROWS_AS((void)ruin_function(make_brownian_drift(-0.4)),
                    std::domain_error);
}

TEST_CASE("bessel3 ruin function is 1/x") {
    DiffusionSpec spec = make_bessel3();
    RuinFunction r = ruin_function(spec);
    for (double x : {0.5, 1.0, 2.0, 5.0}) {
        CHECK(r.r(x) == doctest::Approx(1.0 / x).epsilon(1e-6));
    }
    // -r+/r with r = 1/x, s' = x^{-2}: escape rate at y equals y
    CHECK(escape_rate(r, 2.0) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("excursion resolvent of the constant function") {
    // W^alpha 1(y) = int u^alpha(y, z)/u^alpha(y, y) ... realized directly:
    // for brownian motion, int_{-inf}^{y} e^{-lam(y-z)} 2 dz
    //                    + int_y^{inf} e^{-lam(z-y)} 2 dz = 4/lam = 2 sqrt 2
    DiffusionSpec spec = make_brownian();
    EigenPair pair = solve_eigenfunctions(spec, 1.0);
    double w = excursion_resolvent(spec, pair, [](double) { return 1.0; }, 0.0);
    double lam = std::sqrt(2.0);
    double expect = 2.0 * lam * (1.0 - std::exp(-8.0 * lam));
    CHECK(w == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("alpha must be positive") {
    CHECK_THROWS(solve_eigenfunctions(make_brownian(), 0.0));
    CHECK_THROWS(solve_eigenfunctions(make_brownian(), -1.0));
}
