#include "excursus/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "excursus/decomp.hpp"
#include "excursus/densities.hpp"
#include "excursus/diffusion.hpp"
#include "excursus/eigenfunctions.hpp"
#include "excursus/excursion_process.hpp"
#include "excursus/parallel.hpp"
#include "excursus/pathsim.hpp"
#include "excursus/vervaat.hpp"

namespace excursus {

namespace {

using nlohmann::json;

std::string strf(const char* fmt, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    return std::string(buf);
}

long scaled_n(long n, double scale, long floor_n) {
    long m = static_cast<long>(std::llround(static_cast<double>(n) / scale));
    return std::max(m, floor_n);
}

std::string join(const std::vector<std::string>& v, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += v[i];
    }
    return out;
}

// Every check draws from its own seed block, so a manifest is reproducible
// check by check regardless of which menu subset runs.
struct CheckContext {
    const DiffusionSpec* spec = nullptr; // null for suite criteria
    double scale = 1.0;
    std::uint64_t seed = 0;
    int threads = 0;
};

bool unkilled(const DiffusionSpec& s) {
    return s.kill_is_const && s.kill_const == 0.0;
}

// ---------------------------------------------------------------------------
// Analytic cores shared between the per-spec menu and the fixed suites.

double wronskian_worst(const DiffusionSpec& spec,
                       std::initializer_list<double> alphas) {
    double worst = 0.0;
    for (double a : alphas) {
        EigenPair p = solve_eigenfunctions(spec, a);
        worst = std::max(worst, p.wronskian_deviation());
    }
    return worst;
}

double symmetry_worst(const EigenPair& pair, double lo, double hi, int m) {
    double worst = 0.0;
    for (int i = 0; i <= m; ++i) {
        for (int j = 0; j <= m; ++j) {
            double x = lo + (hi - lo) * i / m;
            double y = lo + (hi - lo) * j / m;
            double a = resolvent_density(pair, x, y);
            double b = resolvent_density(pair, y, x);
            worst = std::max(worst, std::fabs(a - b) /
                                        std::max(1e-300, std::fabs(a)));
        }
    }
    return worst;
}

// u^a(x,z) = P^x e^{-aT_y} u^a(y,z) + int e^{-at} q^y(t;z,x) dt for x,z on
// the same side of y; the kernel side is the independent route.
double splitting_worst(const DiffusionSpec& spec) {
    double alpha = 1.0;
    double y = spec.x0;
    EigenPair pair = solve_eigenfunctions(spec, alpha);
    KilledKernel kernel(spec, y, true);
    double worst = 0.0;
    const double pts[2][2] = {{y + 0.4, y + 1.1}, {y + 1.3, y + 0.6}};
    for (const auto& p : pts) {
        double x = p[0], z = p[1];
        double lap = integrate(
            [&](double t) {
                if (t < 1e-12) return 0.0;
                return std::exp(-alpha * t) * kernel.density(t, z, x);
            },
            0.0, 16.0, 1e-10, 22);
        double split = hitting_laplace(pair, x, y) *
                           resolvent_density(pair, y, z) +
                       lap;
        double full = resolvent_density(pair, x, z);
        worst = std::max(worst, std::fabs(split - full) / full);
    }
    return worst;
}

double resolvent_oracle_worst(const DiffusionSpec& spec) {
    EigenPair pair = solve_eigenfunctions(spec, 1.0);
    double worst = 0.0;
    for (int i = 0; i <= 20; ++i) {
        for (int j = 0; j <= 20; ++j) {
            double x = -2.0 + 0.2 * i;
            double y = -2.0 + 0.2 * j;
            double ref = std::exp(-std::sqrt(2.0) * std::fabs(x - y)) /
                         (2.0 * std::sqrt(2.0));
            double got = resolvent_density(pair, x, y);
            worst = std::max(worst, std::fabs(got - ref) / ref);
        }
    }
    return worst;
}

// Constant-drift closed form for the hitting Laplace transform, killing
// folded into the rate.
double hitting_closed(double mu, double kill, double x, double y,
                      double alpha) {
    double a = alpha + kill;
    double s = std::sqrt(mu * mu + 2.0 * a);
    if (x > y) return std::exp(-(x - y) * (mu + s));
    return std::exp(-(y - x) * (s - mu));
}

struct PathProps {
    long paths = 0;
    long excursions = 0;
    long violations = 0;
};

PathProps path_properties(const DiffusionSpec& spec, long n, double horizon,
                          std::uint64_t seed) {
    PathProps pp;
    double dt = 1e-3;
    for (long i = 0; i < n; ++i) {
        Rng rng(seed, i);
        Path p = sample_path(spec, spec.x0, dt, horizon, rng);
        MinFunctional mf = running_minimum(spec, p);
        ++pp.paths;
        if (mf.C.empty() || mf.C.front() != 0.0) ++pp.violations;
        for (std::size_t k = 1; k < mf.H.size(); ++k) {
            if (mf.H[k] > mf.H[k - 1]) ++pp.violations;
            if (mf.C[k] < mf.C[k - 1] - 1e-12) ++pp.violations;
        }
        auto recs = extract_excursions(p, 4.0 * dt);
        double prev_end = 0.0;
        for (const auto& r : recs) {
            ++pp.excursions;
            if (r.u < prev_end - 1e-12) ++pp.violations;
            if (r.duration + 1e-12 < 4.0 * dt) ++pp.violations;
            if (r.u + r.duration > p.lifetime + 1e-9) ++pp.violations;
            prev_end = r.u + r.duration;
        }
    }
    return pp;
}

bool bridge_endpoints_exact(const DiffusionSpec& spec, std::uint64_t seed) {
    double y = spec.x0, ell = 0.5, endpoint = spec.x0 + 0.5;
    BridgeLaw hat{BridgeLaw::Kind::hat, y, ell, endpoint};
    BridgeLaw rev{BridgeLaw::Kind::reversed, y, ell, endpoint};
    Rng rng(seed, 0);
    for (int k = 0; k < 3; ++k) {
        Path a = sample_bridge(spec, hat, 2.5e-3, rng);
        Path b = sample_bridge(spec, rev, 2.5e-3, rng);
        if (a.values.front() != y || a.values.back() != endpoint) return false;
        if (b.values.front() != endpoint || b.values.back() != y) return false;
    }
    return true;
}

// Brownian excursion value at t = 1/2: density 16 x^2 e^{-2x^2}/sqrt(2 pi),
// integrated in closed form.
double excursion_mid_cdf(double x) {
    if (x <= 0.0) return 0.0;
    double f = 2.0 * normal_cdf(2.0 * x) - 1.0 -
               4.0 * x * std::exp(-2.0 * x * x) / std::sqrt(2.0 * M_PI);
    return std::min(1.0, std::max(0.0, f));
}

// ---------------------------------------------------------------------------
// Checks. Each fills passed/detail/reports; the runner stamps id and time.

CheckResult chk_wronskian(const CheckContext& ctx) {
    CheckResult res;
    double worst = wronskian_worst(*ctx.spec, {0.5, 1.0, 2.0});
    res.passed = worst <= 1e-6;
    res.detail = strf(
        "max relative wronskian spread %.2e over alpha in {0.5, 1, 2} "
        "(tol 1e-6)",
        worst);
    return res;
}

CheckResult chk_resolvent_symmetry(const CheckContext& ctx) {
    CheckResult res;
    const Grid& w = ctx.spec->window;
    double lo = w.lo + 0.25 * (w.hi - w.lo);
    double hi = w.lo + 0.75 * (w.hi - w.lo);
    EigenPair pair = solve_eigenfunctions(*ctx.spec, 1.0);
    double worst = symmetry_worst(pair, lo, hi, 6);
    res.passed = worst <= 1e-12;
    res.detail =
        strf("max relative asymmetry %.2e on a 7x7 grid (tol 1e-12)", worst);
    return res;
}

CheckResult chk_resolvent_oracle(const CheckContext& ctx) {
    CheckResult res;
    double worst = resolvent_oracle_worst(*ctx.spec);
    res.passed = worst <= 1e-4;
    res.detail = strf(
        "u^1(x,y) vs exp(-sqrt(2)|x-y|)/(2 sqrt(2)): max rel err %.2e on "
        "[-2,2]^2 (tol 1e-4)",
        worst);
    return res;
}

CheckResult chk_hitting_oracle(const CheckContext& ctx) {
    CheckResult res;
    const DiffusionSpec& spec = *ctx.spec;
    double mu = spec.brownian_mu, kill = spec.kill_const;
    double worst = 0.0;
    for (double alpha : {0.5, 1.0}) {
        EigenPair pair = solve_eigenfunctions(spec, alpha);
        const double pts[3][2] = {{1.0, 0.0}, {0.0, 1.0}, {0.7, -0.4}};
        for (const auto& p : pts) {
            double ref = hitting_closed(mu, kill, p[0], p[1], alpha);
            double got = hitting_laplace(pair, p[0], p[1]);
            worst = std::max(worst, std::fabs(got - ref) / ref);
        }
    }
    res.passed = worst <= 1e-4;
    res.detail = strf(
        "hitting Laplace vs constant-drift closed form: max rel err %.2e "
        "over 6 cases (tol 1e-4)",
        worst);
    return res;
}

CheckResult chk_splitting(const CheckContext& ctx) {
    CheckResult res;
    double worst = splitting_worst(*ctx.spec);
    res.passed = worst <= 1e-3;
    res.detail = strf(
        "resolvent = hitting part + killed-kernel Laplace: max rel err %.2e "
        "(tol 1e-3)",
        worst);
    return res;
}

CheckResult entrance_core(const DiffusionSpec& spec) {
    CheckResult res;
    bool preset = spec.brownian && unkilled(spec);
    double y = spec.x0;
    double worst = 0.0;
    int cases = 0;
    if (preset) {
        KilledKernel kernel(spec, y, true);
        LaplaceCache cache(spec);
        for (int it = 1; it <= 10; ++it) {
            for (int ix = 1; ix <= 10; ++ix) {
                double t = 0.1 * it;
                double x = y + 0.15 * ix;
                double direct = entrance_density(spec, y, t, x);
                double prop = entrance_density_propagated(spec, cache, kernel,
                                                          y, t, x);
                worst = std::max(worst, std::fabs(prop - direct) / direct);
                ++cases;
            }
        }
        res.passed = worst <= 1e-3;
        res.detail = strf(
            "direct vs half-time propagated entrance density: max rel err "
            "%.2e on a 10x10 (t,x) grid (tol 1e-3)",
            worst);
        return res;
    }
    KilledKernel kernel(spec, y, true, 800);
    LaplaceCache cache(spec);
    for (double t : {0.5, 1.0}) {
        for (double dx : {0.3, 0.7, 1.2}) {
            double x = y + dx;
            double direct = first_passage_density(spec, cache, t, x, y);
            double prop =
                entrance_density_propagated(spec, cache, kernel, y, t, x);
            worst = std::max(worst, std::fabs(prop - direct) / direct);
            ++cases;
        }
    }
    res.passed = worst <= 2.5e-2;
    res.detail = strf(
        "direct vs half-time propagated entrance density: max rel err %.2e "
        "over %d stepped-kernel cases (tol 2.5e-2)",
        worst, cases);
    return res;
}

CheckResult chk_entrance_law(const CheckContext& ctx) {
    return entrance_core(*ctx.spec);
}

// Minima harvested from plain paths (per-step bridge minima) mapped through
// r; independent of the inverse-cdf sampler that draw_gamma uses.
CheckResult chk_minimum_law(const CheckContext& ctx) {
    CheckResult res;
    const DiffusionSpec& spec = *ctx.spec;
    RuinFunction ruin = ruin_function(spec);
    long n = scaled_n(1500, ctx.scale, 150);
    std::vector<double> u(n);
    parallel_for(n, ctx.threads, [&](long i) {
        Rng rng(ctx.seed, static_cast<std::uint64_t>(i));
        MinTriple t = sample_min_triple(spec, spec.x0, 1e-3, 16.0, rng);
        u[i] = ruin.passage_prob(spec.x0, t.minimum);
    });
    auto cdf = [](double v) { return std::min(1.0, std::max(0.0, v)); };
    GofReport rep = ks_test(u, cdf, "minimum law");
    res.reports.push_back(rep);
    res.passed = rep.pass(0.01);
    res.detail = "r(x)/r(path minimum) vs U(0,1): " + rep.describe();
    return res;
}

CheckResult levy_core(const DiffusionSpec& spec, long base_n,
                      const CheckContext& ctx) {
    CheckResult res;
    LevyOptions opt;
    opt.dt = 1e-3;
    opt.threads = ctx.threads;
    LevyZ Z;
    if (spec.brownian && spec.brownian_mu != 0.0) {
        Z = LevyZ::exp_decay;
        opt.horizon = 16.0;
    } else {
        Z = LevyZ::before_horizon;
        opt.z_horizon = 1.0;
        opt.horizon = 6.0;
    }
    long n = scaled_n(base_n, ctx.scale, 300);
    LevyReport rep = verify_levy_system(spec, spec.x0, Z, LevyF::duration,
                                        0.01, n, ctx.seed, opt);
    res.passed = rep.pass(3.0);
    res.detail = rep.describe();
    return res;
}

CheckResult chk_levy(const CheckContext& ctx) {
    return levy_core(*ctx.spec, 2000, ctx);
}

CheckResult local_core(const DiffusionSpec& spec, long base_n,
                       const CheckContext& ctx) {
    CheckResult res;
    long n = scaled_n(base_n, ctx.scale, 2000);
    LocalDecompOptions opt;
    opt.dt = 1e-3;
    opt.pilot = static_cast<int>(scaled_n(4000, ctx.scale, 800));
    opt.conditional_paths = static_cast<int>(scaled_n(20000, ctx.scale, 3000));
    opt.conditional_target = static_cast<int>(scaled_n(900, ctx.scale, 150));
    Rng rng(ctx.seed, 0);
    LocalDecompReport rep = verify_local_decomposition(
        spec, spec.x0, 1.0, static_cast<int>(n), rng, opt);
    res.reports = rep.checks;
    res.passed = rep.pass(0.01);
    res.detail = rep.describe();
    return res;
}

CheckResult chk_local_decomp(const CheckContext& ctx) {
    return local_core(*ctx.spec, 10000, ctx);
}

CheckResult vervaat_forward_core(const CheckContext& ctx) {
    CheckResult res;
    long n = scaled_n(10000, ctx.scale, 400);
    int steps = 1000;
    Rng rng(ctx.seed, 0);
    std::vector<double> mids(n);
    for (long i = 0; i < n; ++i) {
        LoopPath b = sample_bridge01(steps, rng);
        LoopPath e = vervaat_forward(b);
        mids[i] = e.at(steps / 2);
    }
    GofReport rep = ks_test(mids, excursion_mid_cdf, "excursion midpoint");
    res.reports.push_back(rep);
    res.passed = rep.pass(0.01);
    res.detail = "transformed-bridge midpoint vs the excursion marginal: " +
                 rep.describe();
    return res;
}

CheckResult vervaat_roundtrip_core(const CheckContext& ctx) {
    CheckResult res;
    long n = scaled_n(10000, ctx.scale, 400);
    int steps = 1000;
    Rng rng(ctx.seed, 0);
    long mismatched = 0;
    std::vector<double> mids(n);
    for (long i = 0; i < n; ++i) {
        LoopPath e = sample_excursion01(steps, rng);
        int k = static_cast<int>(rng.uniform() * steps);
        LoopPath w = vervaat_inverse(e, static_cast<double>(k) / steps);
        mids[i] = w.at(steps / 2);
        LoopPath back = vervaat_forward(w);
        for (int j = 0; j <= steps; ++j) {
            if (back.at(j) != e.at(j)) {
                ++mismatched;
                break;
            }
        }
    }
    auto cdf = [](double x) { return normal_cdf(2.0 * x); };
    GofReport rep = ks_test(mids, cdf, "bridge midpoint");
    res.reports.push_back(rep);
    res.passed = mismatched == 0 && rep.pass(0.01);
    res.detail = strf(
        "%ld of %ld round trips deviate; inverse midpoint vs N(0,1/4): %s",
        mismatched, n, rep.describe().c_str());
    return res;
}

CheckResult chk_paths(const CheckContext& ctx) {
    CheckResult res;
    long n = scaled_n(32, ctx.scale, 6);
    PathProps pp = path_properties(*ctx.spec, n, 2.0, ctx.seed);
    res.passed = pp.violations == 0;
    res.detail = strf(
        "%ld paths, %ld excursions: %ld violations of minimum monotonicity, "
        "C monotonicity, disjointness, containment",
        pp.paths, pp.excursions, pp.violations);
    if (ctx.spec->brownian) {
        bool exact = bridge_endpoints_exact(*ctx.spec, ctx.seed + 1);
        res.passed = res.passed && exact;
        res.detail += exact ? "; bridge endpoints exact"
                            : "; bridge endpoints NOT exact";
    }
    return res;
}

// ---------------------------------------------------------------------------
// Suite criteria with pinned specs and parameters.

CheckResult crit_resolvent_oracle(const CheckContext& ctx) {
    (void)ctx;
    DiffusionSpec spec = make_brownian();
    CheckContext sub{&spec, 1.0, 0, 0};
    return chk_resolvent_oracle(sub);
}

CheckResult crit_hitting_laplace(const CheckContext& ctx) {
    CheckResult res;
    DiffusionSpec spec = make_brownian_drift(0.5);
    double mu = 0.5, alpha = 1.0, x = 1.0, y = 0.0;
    double closed = hitting_closed(mu, 0.0, x, y, alpha);
    double solver = hitting_laplace(spec, x, y, alpha);
    double rel = std::fabs(solver - closed) / closed;

    long n = scaled_n(100000, ctx.scale, 2000);
    double dt = 1e-3, horizon = 12.0;
    int steps = static_cast<int>(horizon / dt);
    double sdt = std::sqrt(dt);
    std::vector<double> vals(n, 0.0);
    parallel_for(n, ctx.threads, [&](long i) {
        Rng rng(ctx.seed, static_cast<std::uint64_t>(i));
        double z = x;
        for (int k = 0; k < steps; ++k) {
            double zn = z + mu * dt + sdt * rng.normal();
            bool crossed = zn <= y;
            if (!crossed) {
                double p = std::exp(-2.0 * (z - y) * (zn - y) / dt);
                crossed = rng.uniform() < p;
            }
            if (crossed) {
                double tau =
                    bridge_first_cross_sample(z - y, zn - y, dt, 1.0, rng);
                vals[i] = std::exp(-alpha * (k * dt + tau));
                break;
            }
            z = zn;
        }
    });
    Welford acc;
    for (long i = 0; i < n; ++i) acc.add(vals[i]);
    double se = acc.std_error();
    bool mc_ok = std::fabs(acc.mean - solver) <= 3.0 * se + 0.01 * solver;
    res.passed = rel <= 1e-4 && mc_ok;
    res.detail = strf(
        "solver %.6f vs closed form %.6f (rel %.2e, tol 1e-4); mc %.6f +- "
        "%.2e at n=%ld (gap %.2e, allowance %.2e)",
        solver, closed, rel, acc.mean, se, n, std::fabs(acc.mean - solver),
        3.0 * se + 0.01 * solver);
    return res;
}

CheckResult crit_entrance_law(const CheckContext& ctx) {
    (void)ctx;
    DiffusionSpec spec = make_brownian();
    return entrance_core(spec);
}

CheckResult crit_levy_system(const CheckContext& ctx) {
    DiffusionSpec spec = make_brownian_drift(0.5);
    return levy_core(spec, 100000, ctx);
}

CheckResult crit_williams_minimum(const CheckContext& ctx) {
    CheckResult res;
    DiffusionSpec spec = make_brownian_drift(0.5);
    RuinFunction ruin = ruin_function(spec);
    long n = scaled_n(10000, ctx.scale, 500);
    Rng rng(ctx.seed, 0);
    std::vector<double> vals(n);
    for (long i = 0; i < n; ++i)
        vals[i] = -sample_minimum(spec, ruin, 0.0, rng).first;
    auto cdf = [](double v) { return v <= 0.0 ? 0.0 : -std::expm1(-v); };
    GofReport rep = ks_test(vals, cdf, "depth of the minimum");
    res.reports.push_back(rep);
    res.passed = rep.pass(0.01);
    res.detail = "-gamma vs Exp(1): " + rep.describe();
    return res;
}

CheckResult crit_williams_laplace(const CheckContext& ctx) {
    CheckResult res;
    DiffusionSpec spec = make_brownian_drift(0.5);
    RuinFunction ruin = ruin_function(spec);
    EigenPair pair = solve_eigenfunctions(spec, 1.0);
    double x = 0.0;
    // P^x(e^{-rho}) = int g-ratio(x,y) (-d log r(y)); the descent Laplace
    // gains r(y)/r(x) against the plain hitting transform and the gamma
    // density carries r(x)/r(y), so the r factors cancel.
    double quad = integrate(
        [&](double y) {
            return hitting_laplace(pair, x, y) *
                   (-ruin.w_at(y) * spec.s_prime(y));
        },
        spec.window.lo, x, 1e-10, 24);

    long n = scaled_n(10000, ctx.scale, 500);
    WilliamsOptions opt;
    opt.dt = 1e-3;
    opt.post_horizon = 0.05;
    Rng rng(ctx.seed, 0);
    Welford acc;
    for (long i = 0; i < n; ++i) {
        WilliamsSample ws = williams_sample(spec, ruin, x, rng, opt);
        acc.add(std::exp(-ws.rho));
    }
    double se = acc.std_error();
    double z = (acc.mean - quad) / se;
    res.passed = std::isfinite(z) && std::fabs(z) <= 3.0;
    res.detail = strf(
        "quadrature P(e^{-rho}) = %.6f; mc %.6f +- %.2e (z=%.2f, n=%ld)",
        quad, acc.mean, se, z, n);
    return res;
}

CheckResult crit_local_decomp(const CheckContext& ctx) {
    DiffusionSpec spec = make_brownian();
    return local_core(spec, 100000, ctx);
}

CheckResult crit_property_suite(const CheckContext& ctx) {
    CheckResult res;
    std::vector<std::string> notes;
    bool ok = true;
    auto record = [&](bool good, const std::string& s) {
        ok = ok && good;
        notes.push_back(good ? s : "FAIL " + s);
    };

    DiffusionSpec bm = make_brownian();
    DiffusionSpec drift = make_brownian_drift(0.5);
    DiffusionSpec bes = make_bessel3();

    double dev_bm = wronskian_worst(bm, {1.0});
    double dev_dr = wronskian_worst(drift, {0.5, 1.0, 2.0});
    double dev_be = wronskian_worst(bes, {1.0});
    record(dev_bm <= 1e-10 && dev_dr <= 1e-6 && dev_be <= 1e-6,
           strf("wronskian spread %.1e/%.1e/%.1e", dev_bm, dev_dr, dev_be));

    EigenPair pb = solve_eigenfunctions(bm, 1.0);
    EigenPair pe = solve_eigenfunctions(bes, 1.0);
    double sym = std::max(symmetry_worst(pb, -2.0, 2.0, 4),
                          symmetry_worst(pe, 0.5, 4.0, 4));
    record(sym <= 1e-12, strf("resolvent asymmetry %.1e", sym));

    double split = std::max(splitting_worst(bm), splitting_worst(drift));
    record(split <= 1e-3, strf("splitting err %.1e", split));

    PathProps p1 = path_properties(bm, 10, 2.0, ctx.seed);
    PathProps p2 = path_properties(drift, 10, 2.0, ctx.seed + 1);
    record(p1.violations + p2.violations == 0,
           strf("%ld excursions over %ld paths, %ld violations",
                p1.excursions + p2.excursions, p1.paths + p2.paths,
                p1.violations + p2.violations));

    record(bridge_endpoints_exact(bm, ctx.seed + 2),
           "bridge endpoints exact");

    res.passed = ok;
    res.detail = join(notes, "; ");
    return res;
}

// ---------------------------------------------------------------------------
// Registries.

struct CheckDef {
    const char* id;
    std::uint64_t salt;
    bool (*applies)(const DiffusionSpec&);
    CheckResult (*run)(const CheckContext&);
};

bool ap_any(const DiffusionSpec&) { return true; }
bool ap_unkilled(const DiffusionSpec& s) { return unkilled(s); }
bool ap_preset(const DiffusionSpec& s) { return s.brownian; }
bool ap_std_brownian(const DiffusionSpec& s) {
    return s.brownian && s.brownian_mu == 0.0 && unkilled(s);
}
bool ap_drift_preset(const DiffusionSpec& s) {
    return s.brownian && s.brownian_mu > 0.0 && unkilled(s);
}
bool ap_unkilled_preset(const DiffusionSpec& s) {
    return s.brownian && unkilled(s);
}

const CheckDef kMenu[] = {
    {"wronskian", 11, ap_any, chk_wronskian},
    {"resolvent-symmetry", 12, ap_any, chk_resolvent_symmetry},
    {"resolvent-oracle", 13, ap_std_brownian, chk_resolvent_oracle},
    {"hitting-oracle", 14, ap_preset, chk_hitting_oracle},
    {"splitting", 15, ap_preset, chk_splitting},
    {"entrance-law", 16, ap_unkilled, chk_entrance_law},
    {"minimum-law", 17, ap_drift_preset, chk_minimum_law},
    {"levy", 18, ap_unkilled_preset, chk_levy},
    {"local-decomp", 19, ap_unkilled_preset, chk_local_decomp},
    {"vervaat-forward", 20, ap_any, vervaat_forward_core},
    {"vervaat-roundtrip", 21, ap_any, vervaat_roundtrip_core},
    {"paths", 22, ap_any, chk_paths},
};

const CheckDef kCriteria[] = {
    {"resolvent-oracle", 13, nullptr, crit_resolvent_oracle},
    {"hitting-laplace", 23, nullptr, crit_hitting_laplace},
    {"entrance-law", 16, nullptr, crit_entrance_law},
    {"levy-system", 18, nullptr, crit_levy_system},
    {"williams-minimum", 24, nullptr, crit_williams_minimum},
    {"williams-laplace", 25, nullptr, crit_williams_laplace},
    {"local-decomp", 19, nullptr, crit_local_decomp},
    {"vervaat-forward", 20, nullptr, vervaat_forward_core},
    {"vervaat-roundtrip", 21, nullptr, vervaat_roundtrip_core},
    {"property-suite", 26, nullptr, crit_property_suite},
};

CheckResult timed(const CheckDef& def, const CheckContext& ctx) {
    auto t0 = std::chrono::steady_clock::now();
    CheckResult res = def.run(ctx);
    res.id = def.id;
    res.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return res;
}

json report_json(const GofReport& r) {
    return json{{"name", r.name},
                {"statistic", r.statistic},
                {"p_value", r.p_value},
                {"n_effective", r.n_effective},
                {"passed", r.pass(0.01)}};
}

} // namespace

bool RunManifest::all_passed() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const CheckResult& c) { return c.passed; });
}

std::string RunManifest::to_json(int indent) const {
    json j;
    j["command"] = command;
    j["version"] = version;
    j["config"] = json{{"spec", config.spec_name},
                       {"menu", config.menu},
                       {"scale", config.scale},
                       {"seed", config.seed},
                       {"threads", config.threads}};
    j["wall_seconds"] = seconds;
    j["passed"] = all_passed();
    j["checks"] = json::array();
    for (const CheckResult& c : checks) {
        json jc{{"id", c.id},
                {"passed", c.passed},
                {"seconds", c.seconds},
                {"detail", c.detail},
                {"reports", json::array()}};
        for (const GofReport& r : c.reports)
            jc["reports"].push_back(report_json(r));
        j["checks"].push_back(std::move(jc));
    }
    return j.dump(indent);
}

std::string RunManifest::summary() const {
    std::vector<std::string> lines;
    for (const CheckResult& c : checks)
        lines.push_back(strf("%s  %-18s %s  (%.1f s)",
                             c.passed ? "PASS" : "FAIL", c.id.c_str(),
                             c.detail.c_str(), c.seconds));
    return join(lines, "\n");
}

std::vector<std::string> list_checks() {
    std::vector<std::string> ids;
    for (const CheckDef& d : kMenu) ids.push_back(d.id);
    return ids;
}

std::vector<std::string> suite_checks() {
    std::vector<std::string> ids;
    for (const CheckDef& d : kCriteria) ids.push_back(d.id);
    return ids;
}

RunManifest run_checks(const ExperimentConfig& config) {
    if (!(config.scale >= 1.0))
        throw std::invalid_argument("run_checks: scale must be >= 1");
    DiffusionSpec spec = parse_spec(config.spec_name);
    bool want_all = config.menu.empty() ||
                    (config.menu.size() == 1 && config.menu[0] == "all");
    std::vector<const CheckDef*> chosen;
    if (want_all) {
        for (const CheckDef& d : kMenu)
            if (d.applies(spec)) chosen.push_back(&d);
    } else {
        for (const std::string& id : config.menu) {
            const CheckDef* def = nullptr;
            for (const CheckDef& d : kMenu)
                if (id == d.id) def = &d;
            if (!def)
                throw std::invalid_argument(
                    "unknown check '" + id +
                    "' (available: " + join(list_checks(), ", ") + ")");
            if (!def->applies(spec))
                throw std::invalid_argument("check '" + id +
                                            "' does not apply to spec '" +
                                            config.spec_name + "'");
            if (std::find(chosen.begin(), chosen.end(), def) == chosen.end())
                chosen.push_back(def);
        }
    }
    RunManifest m;
    m.config = config;
    m.command = "verify " +
                (want_all ? std::string("all") : join(config.menu, ",")) +
                " --spec " + config.spec_name;
    auto t0 = std::chrono::steady_clock::now();
    for (const CheckDef* d : chosen) {
        CheckContext ctx{&spec, config.scale, config.seed + d->salt * 1000,
                         config.threads};
        m.checks.push_back(timed(*d, ctx));
    }
    m.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return m;
}

RunManifest run_suite(const std::string& name, std::uint64_t seed,
                      int threads,
                      const std::function<void(const CheckResult&)>& on_check) {
    double scale;
    if (name == "acceptance")
        scale = 1.0;
    else if (name == "smoke")
        scale = 10.0;
    else
        throw std::invalid_argument("unknown suite '" + name +
                                    "' (available: acceptance, smoke)");
    RunManifest m;
    m.command = "suite " + name;
    m.config.spec_name = "(pinned per check)";
    m.config.menu = suite_checks();
    m.config.scale = scale;
    m.config.seed = seed;
    m.config.threads = threads;
    auto t0 = std::chrono::steady_clock::now();
    for (const CheckDef& d : kCriteria) {
        CheckContext ctx{nullptr, scale, seed + d.salt * 1000, threads};
        m.checks.push_back(timed(d, ctx));
        if (on_check) on_check(m.checks.back());
    }
    m.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return m;
}

} // namespace excursus
