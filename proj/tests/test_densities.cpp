#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "excursus/densities.hpp"
#include "excursus/stats.hpp"

#include <cmath>
#include <vector>

using namespace excursus;

namespace {

DiffusionSpec generic_brownian(double mu) {
    // same process as the preset but without the closed-form tag, so the
    // tabulated/Stehfest paths are exercised
    return build_spec_sde([mu](double) { return mu; },
                          [](double) { return 1.0; }, nullptr, Interval{},
                          Grid(-8.0, 8.0, 2000), 0.0);
}

} // namespace

TEST_CASE("stehfest weights satisfy the moment identities") {
    for (int order : {10, 12}) {
        ArrayXd z = stehfest_weights(order);
        double sum = 0.0, harmonic = 0.0, scale = 0.0;
        for (int k = 1; k <= order; ++k) {
            sum += z[k - 1];
            harmonic += z[k - 1] / k;
            scale = std::max(scale, std::abs(z[k - 1]));
        }
        CHECK(std::abs(sum) < 1e-6 * scale);
        CHECK(harmonic == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("stehfest inverts simple transforms") {
    // F(s) = 1/(1+s)  ->  f(t) = e^{-t}. The order-12 rule carries its own
    // truncation error, so pin the exact rule output (60-digit arithmetic)
    // and bound the distance to the true inverse separately.
    auto F = [](double s) { return 1.0 / (1.0 + s); };
    CHECK(stehfest_invert(F, 0.5) ==
          doctest::Approx(0.606529686244).epsilon(1e-9));
    CHECK(stehfest_invert(F, 1.0) ==
          doctest::Approx(0.367869389212).epsilon(1e-9));
    for (double t : {0.5, 1.0, 2.0}) {
        double rel = std::abs(stehfest_invert(F, t) / std::exp(-t) - 1.0);
        CHECK(rel < 5e-4);
    }
    // F(s) = 1/s^2  ->  f(t) = t
    auto G = [](double s) { return 1.0 / (s * s); };
    CHECK(stehfest_invert(G, 3.0) == doctest::Approx(3.0).epsilon(2e-6));
    double gap = 0.0;
    stehfest_invert_checked(F, 1.0, &gap);
    // the order-10/order-12 gap is the truncation scale, not roundoff
    CHECK(gap < 1e-3);
    CHECK(gap > 1e-6);
}

TEST_CASE("first passage density: frozen closed-form values") {
    CHECK(first_passage_density(make_brownian(), 1.0, 1.0, 0.0) ==
          doctest::Approx(0.24197072451914337).epsilon(1e-12));
    CHECK(first_passage_density(make_brownian_drift(0.5), 1.0, 1.0, 0.0) ==
          doctest::Approx(0.12951759566589174).epsilon(1e-12));
    CHECK(first_passage_density(make_brownian(), 0.0, 1.0, 0.0) == 0.0);
}

TEST_CASE("first passage density integrates to the passage probability") {
    DiffusionSpec spec = make_brownian_drift(0.5);
    // upward drift, downward passage over distance 1: P = e^{-2 mu d} = e^{-1}
    TailIntegral total = improper_integral(
        [&](double t) { return first_passage_density(spec, t, 1.0, 0.0); },
        1e-12, +1.0, 1e-12);
    CHECK(total.converged);
    CHECK(total.value == doctest::Approx(0.36787944117144233).epsilon(1e-8));
    CHECK(first_passage_prob(spec, 1.0, 0.0) ==
          doctest::Approx(0.36787944117144233).epsilon(1e-9));
    CHECK(first_passage_prob(spec, 0.0, 1.0) == doctest::Approx(1.0));
    CHECK(first_passage_prob(make_brownian(), 1.0, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("stehfest route matches the closed form") {
    DiffusionSpec generic = generic_brownian(0.5);
    DiffusionSpec preset = make_brownian_drift(0.5);
    CHECK_FALSE(generic.brownian);
    LaplaceCache cache(generic);
    for (double t : {0.3, 1.0, 3.0}) {
        double a = first_passage_density(generic, cache, t, 1.0, 0.0);
        double b = first_passage_density(preset, t, 1.0, 0.0);
        CHECK(a == doctest::Approx(b).epsilon(2e-3));
    }
    // 3 times x 12 nodes, minus the k ln2 / t collisions across the t's
    CHECK(cache.size() == 30);
}

TEST_CASE("tabulated passage law") {
    DiffusionSpec spec = make_brownian_drift(0.5);
    PassageDensity law(spec, 1.0, 0.0, 200.0, 20000);
    CHECK(law.mass() == doctest::Approx(0.36787944117144233).epsilon(2e-4));
    // cdf and sample are inverse to each other
    for (double u : {0.1, 0.5, 0.9}) {
        double t = law.sample(u);
        CHECK(law.cdf(t) / law.mass() == doctest::Approx(u).epsilon(1e-6));
    }
    // median sits near the inverse-gaussian median
    double med = law.sample(0.5);
    CHECK(med > 0.5);
    CHECK(med < 3.0);
}

TEST_CASE("killed kernel image formula") {
    DiffusionSpec spec = make_brownian();
    KilledKernel k(spec, 0.0, true);
    CHECK(k.closed_form());
    // symmetric m-density
    CHECK(k.density(0.5, 0.8, 1.1) ==
          doctest::Approx(k.density(0.5, 1.1, 0.8)).epsilon(1e-12));
    // against the direct reflection formula
    auto p = [](double t, double d) {
        return std::exp(-d * d / (2 * t)) / std::sqrt(2 * M_PI * t);
    };
    double expect = (p(0.5, 0.3) - p(0.5, 1.9)) / 2.0;
    CHECK(k.density(0.5, 0.8, 1.1) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(k.density(0.5, -0.2, 1.1) == 0.0);
    // vanishes at the killing level
    CHECK(k.density(0.5, 0.0, 1.1) == doctest::Approx(0.0));
}

TEST_CASE("killed kernel semigroup property") {
    DiffusionSpec spec = make_brownian_drift(0.5);
    KilledKernel k(spec, 0.0, true);
    const Grid& g = k.domain();
    double z = 0.7, x = 1.2, s = 0.25, u = 0.25;
    ArrayXd integrand(g.size());
    for (int j = 0; j <= g.n; ++j) {
        double w = g.point(j);
        integrand[j] =
            k.density(s, z, w) * k.density(u, w, x) * spec.m_prime(w);
    }
    CHECK(simpson(g, integrand) ==
          doctest::Approx(k.density(s + u, z, x)).epsilon(1e-8));
}

TEST_CASE("finite-volume stepping matches the image formula") {
    DiffusionSpec generic = generic_brownian(0.0);
    DiffusionSpec preset = make_brownian();
    KilledKernel kg(generic, 0.0, true, 800);
    KilledKernel kp(preset, 0.0, true);
    CHECK_FALSE(kg.closed_form());
    double t = 0.5;
    for (double z : {0.4, 0.8, 1.5}) {
        double a = kg.density(t, z, 1.1);
        double b = kp.density(t, z, 1.1);
        CHECK(a == doctest::Approx(b).epsilon(5e-3));
    }
    // discrete self-adjointness holds to solver precision
    CHECK(kg.density(t, 0.9, 1.5) ==
          doctest::Approx(kg.density(t, 1.5, 0.9)).epsilon(1e-9));
}

TEST_CASE("killed resolvent density closed form") {
    DiffusionSpec spec = make_brownian();
    double alpha = 1.0, lam = std::sqrt(2.0), y = 0.0;
    EigenPair pair = solve_eigenfunctions(spec, alpha);
    for (double x : {0.3, 1.3}) {
        for (double z : {0.8, 2.0}) {
            double expect = (std::exp(-lam * std::abs(x - z)) -
                             std::exp(-lam * (x + z - 2 * y))) /
                            (2 * lam);
            CHECK(killed_resolvent_density(pair, y, x, z) ==
                  doctest::Approx(expect).epsilon(1e-8));
        }
    }
    CHECK(killed_resolvent_density(pair, y, 1.0, -1.0) == 0.0);
}

TEST_CASE("killed resolvent is the laplace transform of the killed kernel") {
    DiffusionSpec spec = make_brownian_drift(0.5);
    double alpha = 1.0, y = 0.0, z = 0.8, x = 1.3;
    EigenPair pair = solve_eigenfunctions(spec, alpha);
    KilledKernel k(spec, y, true);
    TailIntegral lt = improper_integral(
        [&](double t) { return std::exp(-alpha * t) * k.density(t, z, x); },
        1e-12, +1.0, 1e-12);
    CHECK(lt.converged);
    CHECK(lt.value ==
          doctest::Approx(killed_resolvent_density(pair, y, x, z)).epsilon(1e-7));
}

TEST_CASE("splitting at the hitting time reassembles the resolvent") {
    DiffusionSpec spec = make_brownian_drift(0.5);
    double alpha = 1.0, y = 0.2;
    EigenPair pair = solve_eigenfunctions(spec, alpha);
    for (double x : {0.8, 1.6}) {
        for (double xi : {-1.0, 0.5, 1.2}) {
            double whole = resolvent_density(pair, x, xi);
            double split = killed_resolvent_density(pair, y, x, xi) +
                           hitting_laplace(pair, x, y) *
                               resolvent_density(pair, y, xi);
            CHECK(whole == doctest::Approx(split).epsilon(1e-10));
        }
    }
}

TEST_CASE("entrance law: direct and propagated routes agree") {
    SUBCASE("preset image kernel") {
        for (double mu : {0.0, 0.5}) {
            DiffusionSpec spec =
                mu == 0.0 ? make_brownian() : make_brownian_drift(mu);
            KilledKernel k(spec, 0.0, true);
            LaplaceCache cache(spec);
            for (double t : {0.5, 1.0}) {
                for (double x : {0.3, 1.0}) {
                    double direct = entrance_density(spec, 0.0, t, x);
                    double prop = entrance_density_propagated(spec, cache, k,
                                                              0.0, t, x);
                    CHECK(prop == doctest::Approx(direct).epsilon(1e-6));
                }
            }
        }
    }
    SUBCASE("generic stepping kernel") {
        DiffusionSpec generic = generic_brownian(0.0);
        DiffusionSpec preset = make_brownian();
        KilledKernel k(generic, 0.0, true, 800);
        LaplaceCache cache(generic);
        double direct = entrance_density(preset, 0.0, 1.0, 0.5);
        double prop =
            entrance_density_propagated(generic, cache, k, 0.0, 1.0, 0.5);
        CHECK(prop == doctest::Approx(direct).epsilon(5e-3));
    }
}

TEST_CASE("inverse gaussian sampler matches its law") {
    double mean = 2.0, shape = 1.0;
    auto cdf = [&](double x) {
        if (x <= 0.0) return 0.0;
        double a = std::sqrt(shape / x);
        return normal_cdf(a * (x / mean - 1.0)) +
               std::exp(2.0 * shape / mean) * normal_cdf(-a * (x / mean + 1.0));
    };
    Rng rng(42, 0);
    std::vector<double> sample;
    sample.reserve(10000);
    for (int i = 0; i < 10000; ++i)
        sample.push_back(sample_inverse_gaussian(rng, mean, shape));
    GofReport rep = ks_test(sample, cdf, "inverse-gaussian");
    CHECK(rep.pass(0.01));
}
