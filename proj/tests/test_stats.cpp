#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "excursus/rng.hpp"
#include "excursus/stats.hpp"

#include <cmath>
#include <vector>

using namespace excursus;

TEST_CASE("normal cdf") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-9));
    CHECK(normal_cdf(-1.0) + normal_cdf(1.0) == doctest::Approx(1.0));
}

TEST_CASE("regularized upper incomplete gamma") {
    CHECK(gammq(0.5, 1.0) == doctest::Approx(0.15729920705028513).epsilon(1e-10));
    CHECK(gammq(1.0, 2.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
    CHECK(gammq(1.5, 1.0) == doctest::Approx(0.5724067044708798).epsilon(1e-10));
    CHECK(gammq(3.0, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("kolmogorov survival function") {
    CHECK(kolmogorov_sf(1.0) == doctest::Approx(0.26999967167735456).epsilon(1e-8));
    CHECK(kolmogorov_sf(0.8) == doctest::Approx(0.5441424115741981).epsilon(1e-8));
    CHECK(kolmogorov_sf(2.0) ==
          doctest::Approx(0.0006709252557796953).epsilon(1e-6));
    // branch continuity around the series switch
    CHECK(std::abs(kolmogorov_sf(1.18 - 1e-9) - kolmogorov_sf(1.18 + 1e-9)) <
          1e-6);
    CHECK(kolmogorov_sf(0.0) == doctest::Approx(1.0));
}

TEST_CASE("chi-square statistic and p-value") {
    std::vector<double> obs = {30, 20, 25, 25};
    std::vector<double> exp = {25, 25, 25, 25};
    GofReport rep = chi2_test(obs, exp);
    CHECK(rep.statistic == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(rep.p_value == doctest::Approx(0.5724067044708798).epsilon(1e-8));
    CHECK(rep.pass(0.05));
}

TEST_CASE("one-sample KS statistic on a tiny deterministic sample") {
    std::vector<double> sample = {0.25, 0.75};
    GofReport rep = ks_test(sample, [](double x) { return x; });
    CHECK(rep.statistic == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(rep.n_effective == doctest::Approx(2.0));
}

TEST_CASE("two-sample KS statistic on interleaved samples") {
    GofReport rep = ks2_test({1.0, 3.0}, {2.0, 4.0});
    CHECK(rep.statistic == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("KS null calibration: uniform sample stays inside the 99% band") {
    Rng rng(7, 0);
    std::vector<double> sample;
    sample.reserve(10000);
    for (int i = 0; i < 10000; ++i) sample.push_back(rng.uniform());
    GofReport rep = ks_test(sample, [](double x) { return x; });
    CHECK(rep.statistic < 0.0163);
    CHECK(rep.pass(0.01));
}

TEST_CASE("KS rejects a wrong law") {
    Rng rng(7, 1);
    std::vector<double> sample;
    for (int i = 0; i < 2000; ++i) sample.push_back(rng.uniform() * 0.9);
    GofReport rep = ks_test(sample, [](double x) { return x; });
    CHECK_FALSE(rep.pass(0.01));
}

TEST_CASE("chi-square null calibration over repeated trials") {
    // 200 independent 4-cell multinomials; count p < 0.05 rejections.
    int rejections = 0;
    for (int rep = 0; rep < 200; ++rep) {
        Rng rng(11, rep);
        std::vector<double> obs(4, 0.0);
        for (int i = 0; i < 400; ++i)
            obs[static_cast<int>(rng.uniform() * 4.0)] += 1.0;
        std::vector<double> exp(4, 100.0);
        if (!chi2_test(obs, exp).pass(0.05)) ++rejections;
    }
    // Binomial(200, 0.05): mean 10, sd ~3.1
    CHECK(rejections <= 25);
}

TEST_CASE("weighted empirical law") {
    EmpiricalLaw law;
    law.add(0.0, 1.0);
    law.add(1.0, 3.0);
    CHECK(law.total_weight() == doctest::Approx(4.0));
    CHECK(law.mean() == doctest::Approx(0.75));
    CHECK(law.effective_n() == doctest::Approx(16.0 / 10.0));
    CHECK(law.cdf_at(0.5) == doctest::Approx(0.25));
    CHECK(law.cdf_at(1.5) == doctest::Approx(1.0));
}

TEST_CASE("weighted KS with equal weights matches plain KS") {
    Rng rng(3, 5);
    EmpiricalLaw law;
    std::vector<double> plain;
    for (int i = 0; i < 500; ++i) {
        double x = rng.uniform();
        law.add(x);
        plain.push_back(x);
    }
    GofReport a = law.ks([](double x) { return x; });
    GofReport b = ks_test(plain, [](double x) { return x; });
    CHECK(a.statistic == doctest::Approx(b.statistic).epsilon(1e-12));
    CHECK(a.p_value == doctest::Approx(b.p_value).epsilon(1e-12));
}
