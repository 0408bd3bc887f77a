#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include <excursus/diffusion.hpp>
#include <excursus/pathsim.hpp>
#include <excursus/rng.hpp>
#include <excursus/stats.hpp>

using namespace excursus;

namespace {

Path make_trace(std::vector<double> v, double dt) {
    Path p;
    p.dt = dt;
    p.lifetime = dt * (v.size() - 1);
    p.values = std::move(v);
    return p;
}

DiffusionSpec line_spec(double slope) {
    DiffusionSpec spec;
    spec.drift = [slope](double) { return slope; };
    spec.sigma = [](double) { return 0.0; };
    spec.scale = [](double x) { return x; };
    spec.window = Grid(-40.0, 40.0, 100);
    return spec;
}

} // namespace

TEST_CASE("deterministic line when sigma vanishes") {
    DiffusionSpec spec = line_spec(-1.0);
    Rng rng(9, 0);
    Path p = sample_path(spec, 0.0, 1e-3, 1.0, rng);
    REQUIRE(p.values.size() == 1001);
    CHECK(p.lifetime == doctest::Approx(1.0));
    CHECK(!p.absorbed);
    CHECK(!p.killed);
    CHECK(!p.left_window);
    for (int i = 0; i <= 1000; i += 100)
        CHECK(p.values[i] == doctest::Approx(-i * 1e-3).epsilon(1e-10));
}

TEST_CASE("running minimum on hand traces") {
    DiffusionSpec bm = make_brownian();

    Path p = make_trace({0.0, -1.0, -0.5, -2.0}, 1.0);
    MinFunctional mf = running_minimum(bm, p);
    CHECK(mf.H == std::vector<double>{0.0, -1.0, -1.0, -2.0});
    CHECK(mf.rho_index == 3);
    CHECK(mf.rho == doctest::Approx(3.0));
    CHECK(mf.C[0] == 0.0);
    CHECK(mf.C[1] == doctest::Approx(1.0));
    CHECK(mf.C[2] == doctest::Approx(1.0));
    CHECK(mf.C[3] == doctest::Approx(2.0));

    Path up = make_trace({0.0, 0.5, 1.0, 2.0}, 1.0);
    MinFunctional mu = running_minimum(bm, up);
    for (double h : mu.H) CHECK(h == 0.0);
    for (double c : mu.C) CHECK(c == 0.0);
    CHECK(mu.rho == 0.0);
}

TEST_CASE("excursion extraction on hand traces") {
    Path p = make_trace({0.0, 1.0, 0.5, -1.0}, 1.0);
    auto recs = extract_excursions(p, 1.0);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].u == 0.0);
    CHECK(recs[0].level == 0.0);
    CHECK(recs[0].duration == doctest::Approx(3.0));
    REQUIRE(recs[0].fragment.values.size() == 4);
    CHECK(recs[0].fragment.values[1] > recs[0].level);
    CHECK(recs[0].fragment.values[2] > recs[0].level);

    Path down = make_trace({0.0, -1.0, -2.0, -3.0}, 1.0);
    CHECK(extract_excursions(down, 1.0).empty());

    CHECK_THROWS_AS(extract_excursions(p, 0.5), std::invalid_argument);
}

TEST_CASE("sub-threshold excursions are dropped") {
    // One short gap (1 interior sample) and one long one.
    Path p = make_trace({0.0, 1.0, -1.0, 2.0, 3.0, 1.0, -2.0}, 1.0);
    auto all = extract_excursions(p, 1.0);
    REQUIRE(all.size() == 2);
    CHECK(all[0].u == 0.0);
    CHECK(all[0].duration == doctest::Approx(2.0));
    CHECK(all[1].u == doctest::Approx(2.0));
    CHECK(all[1].level == doctest::Approx(-1.0));
    CHECK(all[1].duration == doctest::Approx(4.0));
    auto longonly = extract_excursions(p, 3.0);
    REQUIRE(longonly.size() == 1);
    CHECK(longonly[0].u == doctest::Approx(2.0));
    // Levels strictly decrease across records.
    CHECK(all[1].level < all[0].level);
}

TEST_CASE("trailing open excursion is kept with truncated duration") {
    Path p = make_trace({0.0, -1.0, 1.0, 2.0, 1.5}, 1.0);
    auto recs = extract_excursions(p, 1.0);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].u == doctest::Approx(1.0));
    CHECK(recs[0].level == doctest::Approx(-1.0));
    CHECK(recs[0].duration == doctest::Approx(3.0));
}

TEST_CASE("sample mean and reproducibility for standard brownian motion") {
    DiffusionSpec bm = make_brownian();
    int n = 20000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        Rng rng(123, i);
        Path p = sample_path(bm, 0.0, 1e-3, 1.0, rng);
        REQUIRE(p.values.size() == 1001);
        double xT = p.values.back();
        sum += xT;
        sumsq += xT * xT;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 3.0 / std::sqrt(double(n)));
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));

    Rng a(123, 7), b(123, 7);
    Path pa = sample_path(bm, 0.0, 1e-3, 1.0, a);
    Path pb = sample_path(bm, 0.0, 1e-3, 1.0, b);
    CHECK(pa.values == pb.values);
}

TEST_CASE("constant kill rate thins survival exponentially") {
    double beta = 0.7;
    DiffusionSpec bm = make_brownian(-8.0, 8.0, 2000, beta);
    int n = 20000, survived = 0;
    for (int i = 0; i < n; ++i) {
        Rng rng(321, i);
        Path p = sample_path(bm, 0.0, 1e-3, 1.0, rng);
        if (!p.killed) ++survived;
        if (p.killed) {
            CHECK(p.lifetime < 1.0);
            CHECK(p.values.size() ==
                  size_t(std::ceil(p.lifetime / 1e-3)) + 1);
        }
    }
    double phat = double(survived) / n;
    double target = std::exp(-beta);
    double se = std::sqrt(target * (1.0 - target) / n);
    CHECK(std::abs(phat - target) < 3.0 * se);
}

TEST_CASE("absorption at a declared lower endpoint") {
    DiffusionSpec spec = build_spec_sde(
        [](double) { return 0.0; }, [](double) { return 1.0; }, {},
        Interval{0.0, std::numeric_limits<double>::infinity(), true, false},
        Grid(0.0, 8.0, 1000), 1.0);
    int n = 4000, absorbed = 0;
    for (int i = 0; i < n; ++i) {
        Rng rng(55, i);
        Path p = sample_path(spec, 1.0, 1e-3, 1.0, rng);
        if (p.absorbed) {
            ++absorbed;
            CHECK(p.values.back() == 0.0);
            CHECK(p.lifetime <= 1.0);
        }
    }
    // P(T_1 <= 1) for |level - start| = 1: 2 (1 - Phi(1)).
    double target = 2.0 * (1.0 - normal_cdf(1.0));
    double se = std::sqrt(target * (1.0 - target) / n);
    CHECK(std::abs(double(absorbed) / n - target) < 4.0 * se);
}

TEST_CASE("window exit truncates and flags") {
    DiffusionSpec spec = line_spec(2.0);
    Rng rng(1, 0);
    Path p = sample_path(spec, 39.9, 1e-2, 10.0, rng);
    CHECK(p.left_window);
    CHECK(p.lifetime < 10.0);
    CHECK(p.values.size() == size_t(std::lround(p.lifetime / 1e-2)) + 1);
    for (double v : p.values) CHECK(spec.window.contains(v));
}

TEST_CASE("concatenation consistency of minimum and excursion records") {
    DiffusionSpec bm = make_brownian();
    for (int i = 0; i < 300; ++i) {
        Rng rng(777, i);
        Path p = sample_path(bm, 0.0, 1e-2, 2.0, rng);
        MinFunctional mf = running_minimum(bm, p);
        auto recs = extract_excursions(p, 1e-2);
        // C is nondecreasing and H nonincreasing.
        for (size_t k = 1; k < mf.H.size(); ++k) {
            CHECK(mf.H[k] <= mf.H[k - 1]);
            CHECK(mf.C[k] >= mf.C[k - 1]);
        }
        // Every sample is either at the running minimum or covered by a
        // record (closed right end, since a trailing record ends on its
        // last sample); min samples are never strictly inside a record.
        for (size_t k = 0; k < p.values.size(); ++k) {
            double t = p.time_at(static_cast<int>(k));
            bool at_min = p.values[k] == mf.H[k];
            bool covered = false, strict_inside = false;
            for (size_t j = 0; j < recs.size(); ++j) {
                double end = recs[j].u + recs[j].duration;
                if (t > recs[j].u && t <= end + 1e-12) covered = true;
                if (t > recs[j].u + 1e-12 && t < end - 1e-12)
                    strict_inside = true;
            }
            if (!at_min) CHECK(covered);
            if (at_min) CHECK(!strict_inside);
        }
        // Records are disjoint (adjacent ones may share the closing
        // sample, up to roundoff in the time sums) and levels strictly
        // decrease.
        for (size_t j = 1; j < recs.size(); ++j) {
            CHECK(recs[j].u >=
                  recs[j - 1].u + recs[j - 1].duration - 1e-12);
            CHECK(recs[j].level < recs[j - 1].level);
        }
    }
}

TEST_CASE("discrete minimum laws with continuity corrections") {
    DiffusionSpec bm = make_brownian();
    double dt = 1e-3;
    int n = 10000;
    std::vector<double> mins, rhos;
    mins.reserve(n);
    rhos.reserve(n);
    for (int i = 0; i < n; ++i) {
        Rng rng(2024, i);
        Path p = sample_path(bm, 0.0, dt, 1.0, rng);
        MinFunctional mf = running_minimum(bm, p);
        // Discrete monitoring misses the within-step dip; the standard
        // 0.5826 sigma sqrt(dt) shift and a half-step on the argmin
        // restore the continuous laws to KS resolution at this n.
        mins.push_back(-mf.H.back() + 0.5826 * std::sqrt(dt));
        rhos.push_back(mf.rho + 0.5 * dt);
    }
    auto half_normal = [](double x) {
        return x <= 0.0 ? 0.0 : 2.0 * normal_cdf(x) - 1.0;
    };
    auto arcsine = [](double t) {
        if (t <= 0.0) return 0.0;
        if (t >= 1.0) return 1.0;
        return 2.0 / M_PI * std::asin(std::sqrt(t));
    };
    GofReport ks_min = ks_test(mins, half_normal, "minimum half-normal");
    GofReport ks_rho = ks_test(rhos, arcsine, "argmin arcsine");
    CHECK(ks_min.pass(0.01));
    CHECK(ks_rho.pass(0.01));
}

TEST_CASE("exact bridge-corrected triple needs no correction") {
    DiffusionSpec bm = make_brownian();
    double dt = 1e-3;
    int n = 10000;
    std::vector<double> mins, rhos;
    for (int i = 0; i < n; ++i) {
        Rng rng(4096, i);
        MinTriple t = sample_min_triple(bm, 0.0, dt, 1.0, rng);
        CHECK(t.minimum < 0.0);
        CHECK(t.argmin >= 0.0);
        CHECK(t.argmin <= 1.0);
        mins.push_back(-t.minimum);
        rhos.push_back(t.argmin);
    }
    auto half_normal = [](double x) {
        return x <= 0.0 ? 0.0 : 2.0 * normal_cdf(x) - 1.0;
    };
    auto arcsine = [](double t) {
        if (t <= 0.0) return 0.0;
        if (t >= 1.0) return 1.0;
        return 2.0 / M_PI * std::asin(std::sqrt(t));
    };
    CHECK(ks_test(mins, half_normal, "exact minimum").pass(0.01));
    CHECK(ks_test(rhos, arcsine, "exact argmin").pass(0.01));
}

TEST_CASE("bridge draw helpers match their closed forms") {
    Rng rng(5, 0);
    double var = 0.25;
    CHECK(bridge_cross_prob(1.0, 2.0, var) ==
          doctest::Approx(std::exp(-16.0)));
    CHECK(bridge_cross_prob(-0.1, 2.0, var) == 1.0);

    // Sampled minima sit below both endpoints and reproduce the crossing
    // probability of a fixed cap.
    int n = 40000, below = 0;
    for (int i = 0; i < n; ++i) {
        double m = bridge_min_sample(0.3, 0.5, var, rng);
        CHECK(m <= 0.3);
        if (m < 0.0) ++below;
    }
    double target = bridge_cross_prob(0.3, 0.5, var);
    double se = std::sqrt(target * (1.0 - target) / n);
    CHECK(std::abs(double(below) / n - target) < 4.0 * se);

    for (int i = 0; i < 1000; ++i) {
        double m = bridge_min_sample_below(0.3, 0.5, var, 0.0, rng);
        CHECK(m < 0.0);
        double M = bridge_max_sample(0.3, 0.5, var, rng);
        CHECK(M >= 0.5);
    }

    // Symmetric endpoints make the argmin symmetric about dt/2.
    double dt = 0.01;
    double asym = 0.0;
    int na = 20000;
    for (int i = 0; i < na; ++i) {
        double th = bridge_argmin_sample(0.05, 0.05, -0.02, dt, 1.0, rng);
        CHECK(th > 0.0);
        CHECK(th < dt);
        asym += (th > 0.5 * dt) ? 1.0 : -1.0;
    }
    CHECK(std::abs(asym / na) < 3.0 / std::sqrt(double(na)));

    for (int i = 0; i < 1000; ++i) {
        double tau = bridge_first_cross_sample(0.05, -0.01, dt, 1.0, rng);
        CHECK(tau > 0.0);
        CHECK(tau < dt);
    }
}

TEST_CASE("argmin draw agrees with the two-sided passage density") {
    // p(th) ~ th^{-3/2}(dt-th)^{-3/2} exp(-a^2/2th - b^2/2(dt-th)) for
    // sigma = 1; compare the sampler against the numerically normalized cdf.
    double a = 0.04, b = 0.07, dt = 0.01, m = 0.0;
    auto dens = [&](double th) {
        return std::pow(th, -1.5) * std::pow(dt - th, -1.5) *
               std::exp(-a * a / (2.0 * th) - b * b / (2.0 * (dt - th)));
    };
    int grid = 4000;
    std::vector<double> cdf(grid + 1, 0.0);
    double h = dt / grid;
    for (int i = 1; i <= grid; ++i) {
        double t1 = (i - 0.5) * h;
        cdf[i] = cdf[i - 1] + dens(t1) * h;
    }
    for (auto& cv : cdf) cv /= cdf[grid];
    auto cdf_fn = [&](double th) {
        if (th <= 0.0) return 0.0;
        if (th >= dt) return 1.0;
        double u = th / h;
        int i = static_cast<int>(u);
        double w = u - i;
        return cdf[i] * (1.0 - w) + cdf[i + 1] * w;
    };
    Rng rng(31, 0);
    std::vector<double> draws;
    for (int i = 0; i < 20000; ++i)
        draws.push_back(bridge_argmin_sample(a + m, b + m, m, dt, 1.0, rng));
    CHECK(ks_test(draws, cdf_fn, "argmin vs quadrature").pass(0.01));
}

TEST_CASE("first-crossing draw agrees with its conditional density") {
    double a = 0.05, b = 0.03, dt = 0.01;
    auto dens = [&](double s) {
        return std::pow(s, -1.5) * std::pow(dt - s, -0.5) *
               std::exp(-a * a / (2.0 * s) - b * b / (2.0 * (dt - s)));
    };
    int grid = 4000;
    std::vector<double> cdf(grid + 1, 0.0);
    double h = dt / grid;
    for (int i = 1; i <= grid; ++i)
        cdf[i] = cdf[i - 1] + dens((i - 0.5) * h) * h;
    for (auto& cv : cdf) cv /= cdf[grid];
    auto cdf_fn = [&](double s) {
        if (s <= 0.0) return 0.0;
        if (s >= dt) return 1.0;
        double u = s / h;
        int i = static_cast<int>(u);
        double w = u - i;
        return cdf[i] * (1.0 - w) + cdf[i + 1] * w;
    };
    Rng rng(77, 0);
    std::vector<double> draws;
    for (int i = 0; i < 20000; ++i)
        draws.push_back(bridge_first_cross_sample(a, b, dt, 1.0, rng));
    CHECK(ks_test(draws, cdf_fn, "crossing vs quadrature").pass(0.01));
}
