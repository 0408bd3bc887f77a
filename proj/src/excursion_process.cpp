#include "excursus/excursion_process.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "excursus/decomp.hpp"
#include "excursus/densities.hpp"
#include "excursus/eigenfunctions.hpp"
#include "excursus/grid.hpp"
#include "excursus/parallel.hpp"
#include "excursus/pathsim.hpp"
#include "excursus/stats.hpp"

namespace excursus {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Mass of the drift-nu Brownian entrance law older than t, per unit ds:
// (2 pi t)^{-1/2} exp(-nu^2 t / 2) + nu Phi(nu sqrt(t)). Valid for either
// sign of nu; decreases to max(nu, 0) as t grows.
double drift_excursion_mass(double nu, double t) {
    return std::exp(-0.5 * nu * nu * t) / std::sqrt(2.0 * kPi * t) +
           nu * normal_cdf(nu * std::sqrt(t));
}

// Rate of excursions from level y still alive at age eps, escapes included,
// per unit level dy (the scale factor cancels for the Brownian presets).
// Constant kill folds in as exp(-c eps).
double rate_per_dy_preset(const DiffusionSpec& spec, double eps) {
    return 2.0 * drift_excursion_mass(spec.brownian_mu, eps) *
           std::exp(-spec.kill_const * eps);
}

// n_eps(y) = integral of f(eps; z, y) m(dz) over z > y, per unit ds.
double intensity_generic(const DiffusionSpec& spec, LaplaceCache& cache,
                         double eps, double y) {
    double sig = spec.sig(y);
    double zhi = std::min(spec.window.hi,
                          y + 12.0 * sig * std::sqrt(eps) +
                              8.0 * std::abs(spec.b(y)) * eps);
    if (zhi <= y)
        throw std::runtime_error(
            "excursion intensity: window too small for the entrance "
            "quadrature");
    auto f = [&](double z) {
        return first_passage_density(spec, cache, eps, z, y) * spec.m_prime(z);
    };
    // The per-term tolerance stays above the noise floor of the numeric
    // passage density so the subdivision terminates.
    double root = sig * std::sqrt(eps);
    double val = 0.0, lo = y;
    for (double split : {y + root / 3.0, y + root, y + 3.0 * root, zhi}) {
        double hi = std::min(split, zhi);
        if (hi > lo) val += integrate(f, lo, hi, 1e-7, 18);
        lo = hi;
    }
    if (!std::isfinite(val) || val <= 0.0)
        throw std::runtime_error("excursion intensity: quadrature failed");
    return val;
}

// Escape rate per unit ds(y): -r^+(y)/r(y). Zero without a ruin function
// (recurrent mode behind a level floor).
double escape_per_ds(const RuinFunction* ruin, double y) {
    return ruin ? -ruin->w_at(y) : 0.0;
}

// Entrance law at age eps from level y, tabulated for inverse-CDF sampling.
// vals[0] = 0: the passage density vanishes at z = y.
struct EntranceTable {
    std::vector<double> nodes;
    std::vector<double> vals;
    std::vector<double> cum;

    double draw(Rng& rng) const {
        double target = rng.uniform() * cum.back();
        auto it = std::upper_bound(cum.begin(), cum.end(), target);
        std::size_t j = std::min<std::size_t>(cum.size() - 2,
                                              std::size_t(it - cum.begin()) - 1);
        double h = nodes[j + 1] - nodes[j];
        double a = vals[j], b = vals[j + 1];
        double area = target - cum[j];
        double u;
        if (std::abs(b - a) * h < 1e-12 * (a + b) * h + 1e-300) {
            u = a > 0.0 ? area / a : 0.5 * h;
        } else {
            double disc = a * a + 2.0 * (b - a) * area / h;
            u = h * (std::sqrt(std::max(disc, 0.0)) - a) / (b - a);
        }
        return nodes[j] + std::min(std::max(u, 0.0), h);
    }
};

EntranceTable build_entrance_table(const DiffusionSpec& spec,
                                   LaplaceCache* cache, double eps, double y,
                                   int n_nodes) {
    EntranceTable t;
    double sig = spec.sig(y);
    double zhi = std::min(spec.window.hi,
                          y + 12.0 * sig * std::sqrt(eps) +
                              8.0 * std::abs(spec.b(y)) * eps);
    int n = std::max(16, n_nodes);
    t.nodes.resize(n + 1);
    t.vals.resize(n + 1);
    for (int j = 0; j <= n; ++j)
        t.nodes[j] = y + (zhi - y) * double(j) / n;
    t.vals[0] = 0.0;
    for (int j = 1; j <= n; ++j) {
        double z = t.nodes[j];
        double f;
        if (spec.brownian) {
            double d = z - y, mu = spec.brownian_mu;
            f = d / std::sqrt(2.0 * kPi * eps * eps * eps) *
                std::exp(-0.5 * (d - mu * eps) * (d - mu * eps) / eps -
                         spec.kill_const * eps);
        } else {
            f = first_passage_density(spec, *cache, eps, z, y);
        }
        t.vals[j] = std::max(f * spec.m_prime(z), 0.0);
    }
    t.cum.resize(n + 1);
    t.cum[0] = 0.0;
    for (int j = 1; j <= n; ++j)
        t.cum[j] = t.cum[j - 1] + 0.5 * (t.vals[j - 1] + t.vals[j]) *
                                      (t.nodes[j] - t.nodes[j - 1]);
    if (!(t.cum.back() > 0.0))
        throw std::runtime_error(
            "sample_excursion_process: degenerate entrance table");
    return t;
}

// Continue an excursion from its age-eps state z until it returns to y,
// leaves the window, or hits the time cap. The fragment starts at z and its
// lifetime counts from age eps; the closing sample equals y exactly.
Path continue_excursion(const DiffusionSpec& spec, double y, double z,
                        double dt, double time_cap, Rng& rng) {
    Path p;
    p.t0 = 0.0;
    p.dt = dt;
    p.values.push_back(z);
    double a = z;
    long max_steps = std::max<long>(1, std::lround(time_cap / dt));
    for (long i = 0; i < max_steps; ++i) {
        double sig = spec.sig(a);
        double var = sig * sig * dt;
        double bn = a + spec.b(a) * dt + std::sqrt(var) * rng.normal();
        bool crossed = bn <= y;
        double aa = a - y, bb = bn - y;
        if (!crossed && 2.0 * aa * bb <= 80.0 * var)
            crossed = rng.uniform() < bridge_cross_prob(aa, bb, var);
        if (crossed) {
            double tau = aa <= 0.0 ? 0.0
                                   : bridge_first_cross_sample(aa, bb, dt,
                                                               sig * sig, rng);
            p.values.push_back(y);
            p.lifetime = double(i) * dt + tau;
            p.absorbed = true;
            return p;
        }
        if (bn >= spec.window.hi) {
            p.values.push_back(bn);
            p.lifetime = double(i + 1) * dt;
            p.left_window = true;
            return p;
        }
        p.values.push_back(bn);
        a = bn;
    }
    p.lifetime = double(max_steps) * dt;
    return p;
}

std::vector<LevelPoint> sample_excursion_process_impl(
    const DiffusionSpec& spec, const RuinFunction* ruin, double x, double eps,
    Rng& rng, const ExcursionProcessOptions& opt) {
    if (eps < opt.dt)
        throw std::invalid_argument(
            "sample_excursion_process: eps must be at least dt");
    if (!(x > spec.window.lo && x < spec.window.hi))
        throw std::invalid_argument(
            "sample_excursion_process: x outside the window");
    bool killed = spec.kill_is_const
                      ? spec.kill_const > 0.0
                      : spec.kill_tab.size() > 0 && spec.kill_tab.maxCoeff() > 0.0;
    if (killed)
        throw std::invalid_argument(
            "sample_excursion_process: killing is not supported; a killed "
            "excursion can escape without ever becoming eps-observable");
    double floor = spec.window.lo;
    if (std::isfinite(opt.y_min)) floor = std::max(floor, opt.y_min);
    if (!(x > floor))
        throw std::invalid_argument(
            "sample_excursion_process: x must sit above the level floor");

    std::unique_ptr<LaplaceCache> cache;
    if (!spec.brownian) cache = std::make_unique<LaplaceCache>(spec);

    // Rate of eps-observable excursion marks per unit level.
    auto rate_at = [&](double y) {
        return intensity_generic(spec, *cache, eps, y) * spec.s_prime(y);
    };

    const double delta0 = (spec.window.hi - spec.window.lo) / 32.0;
    std::vector<LevelPoint> out;
    double ycur = x;
    const long mark_cap = 200000;
    long marks = 0;

    while (ycur > floor + 1e-12) {
        // One dominated thinning band below the current level. The band
        // shrinks toward a finite lower endpoint where rates blow up.
        double band_lo = std::max(floor, ycur - delta0);
        if (std::isfinite(spec.interval.lower))
            band_lo =
                std::max(band_lo, ycur - 0.5 * (ycur - spec.interval.lower));
        bool preset_const = spec.brownian;
        double lambda_bar;
        if (preset_const) {
            lambda_bar = rate_per_dy_preset(spec, eps);
        } else {
            lambda_bar = 0.0;
            for (int k = 0; k <= 8; ++k) {
                double yk = band_lo + (ycur - band_lo) * double(k) / 8.0;
                lambda_bar = std::max(lambda_bar, rate_at(yk));
            }
            lambda_bar *= 1.3;
        }

        bool escaped_here = false;
        double y = ycur;
        while (true) {
            y -= rng.exponential(lambda_bar);
            if (y <= band_lo + 1e-15) {
                y = band_lo;
                break;
            }
            double lam = preset_const ? lambda_bar : rate_at(y);
            if (lam > lambda_bar * (1.0 + 1e-9))
                throw std::runtime_error(
                    "sample_excursion_process: dominating rate violated");
            if (rng.uniform() >= lam / lambda_bar) continue;
            if (++marks > mark_cap)
                throw std::runtime_error(
                    "sample_excursion_process: mark budget exhausted");
            double esc = escape_per_ds(ruin, y) * spec.s_prime(y);
            if (rng.uniform() < std::min(esc / lam, 1.0)) {
                LevelPoint pt;
                pt.y = y;
                pt.escaped = true;
                pt.excursion = sample_conditioned_up(
                    spec, *ruin, y, opt.escape_horizon, opt.dt, rng);
                out.push_back(std::move(pt));
                escaped_here = true;
                break;
            }
            // Returning mark: entrance state at age eps, then continue until
            // the excursion closes at y. A truncated continuation resamples
            // the mark as a whole, entrance state included.
            EntranceTable table =
                build_entrance_table(spec, cache.get(), eps, y, opt.entrance_n);
            Path frag;
            bool closed = false;
            for (int tries = 0; tries < 256 && !closed; ++tries) {
                double z = std::min(table.draw(rng), spec.window.hi - 1e-9);
                frag = continue_excursion(spec, y, std::max(z, y + 1e-12),
                                          opt.dt, opt.time_cap, rng);
                closed = frag.absorbed;
            }
            if (!closed)
                throw std::runtime_error(
                    "sample_excursion_process: excursion continuation kept "
                    "leaving the window or exceeding the time cap");
            LevelPoint pt;
            pt.y = y;
            pt.excursion = std::move(frag);
            out.push_back(std::move(pt));
        }
        if (escaped_here) break;
        ycur = y;
    }
    return out;
}

}  // namespace

std::vector<LevelPoint> sample_excursion_process(
    const DiffusionSpec& spec, const RuinFunction& ruin, double x, double eps,
    Rng& rng, const ExcursionProcessOptions& opt) {
    return sample_excursion_process_impl(spec, &ruin, x, eps, rng, opt);
}

std::vector<LevelPoint> sample_excursion_process(
    const DiffusionSpec& spec, double x, double eps, Rng& rng,
    const ExcursionProcessOptions& opt) {
    try {
        RuinFunction ruin = ruin_function(spec);
        return sample_excursion_process_impl(spec, &ruin, x, eps, rng, opt);
    } catch (const std::domain_error&) {
        if (!std::isfinite(opt.y_min)) throw;
        return sample_excursion_process_impl(spec, nullptr, x, eps, rng, opt);
    }
}

namespace {

// ---- Verification, analytic side. ----

// P(T <= t) for the first passage of a falling distance d > 0 by a Brownian
// motion with drift mu toward the barrier.
double passage_cdf_brownian(double mu, double d, double t) {
    if (d <= 0.0) return 1.0;
    if (t <= 0.0) return 0.0;
    double rt = std::sqrt(t);
    double val = normal_cdf((-d + mu * t) / rt);
    double e = 2.0 * mu * d;
    if (e < 700.0) val += std::exp(e) * normal_cdf((-d - mu * t) / rt);
    return std::min(std::max(val, 0.0), 1.0);
}

struct RhsContext {
    const DiffusionSpec* spec;
    LevyZ Z;
    LevyF F;
    double eps;
    LevyOptions opt;
    double x;
    bool killed = false;
    std::unique_ptr<LaplaceCache> cache;
    std::unique_ptr<EigenPair> pair_z;  // Z = exp_decay, generic route
    std::unique_ptr<EigenPair> pair_f;  // F = laplace_duration, generic route
    std::unique_ptr<EigenPair> pair_h;  // F = height with killing
};

// Psi(y) = E^x[Z at the first passage of y], killed paths contributing zero.
double psi_z(const RhsContext& ctx, double y) {
    const DiffusionSpec& spec = *ctx.spec;
    double x = ctx.x;
    if (y >= x) return 1.0;
    if (ctx.Z == LevyZ::exp_decay) {
        if (spec.brownian) {
            double mu = spec.brownian_mu, a = 1.0 + spec.kill_const;
            double lam = mu + std::sqrt(mu * mu + 2.0 * a);
            return std::exp(-lam * (x - y));
        }
        return std::exp(ctx.pair_z->log_g2_at(x) - ctx.pair_z->log_g2_at(y));
    }
    double T = ctx.opt.z_horizon;
    if (spec.brownian) {
        double mu = spec.brownian_mu, d = x - y, c = spec.kill_const;
        if (c == 0.0 && mu >= 0.0) return passage_cdf_brownian(-mu, d, T);
        auto dens = [&](double w) {
            double t = w * w;
            if (t <= 0.0) return 0.0;
            double f = d / std::sqrt(2.0 * kPi * t * t * t) *
                       std::exp(-0.5 * (d + mu * t) * (d + mu * t) / t - c * t);
            return 2.0 * w * f;
        };
        double hi = std::sqrt(T), lo = 0.0, val = 0.0;
        for (double split : {d / 3.0, d, 3.0 * d, hi}) {
            double s = std::min(split, hi);
            if (s > lo) val += integrate(dens, lo, s, 1e-10);
            lo = s;
        }
        return val;
    }
    auto dens = [&](double w) {
        double t = w * w;
        if (t <= 0.0) return 0.0;
        return 2.0 * w * first_passage_density(spec, *ctx.cache, t, x, y);
    };
    double d = (x - y) / std::max(spec.sig(0.5 * (x + y)), 1e-12);
    double hi = std::sqrt(T), lo = 0.0, val = 0.0;
    for (double split : {d / 3.0, d, 3.0 * d, hi}) {
        double s = std::min(split, hi);
        if (s > lo) val += integrate(dens, lo, s, 1e-7, 18);
        lo = s;
    }
    return val;
}

// n_y(F) per unit level dy for the supported excursion functionals.
double nf_level(const RhsContext& ctx, double y) {
    const DiffusionSpec& spec = *ctx.spec;
    double eps = ctx.eps;
    switch (ctx.F) {
        case LevyF::zero:
            return 0.0;
        case LevyF::duration: {
            if (spec.brownian) return rate_per_dy_preset(spec, eps);
            return intensity_generic(spec, *ctx.cache, eps, y) *
                   spec.s_prime(y);
        }
        case LevyF::laplace_duration: {
            // n_y(exp(-alpha zeta); zeta > eps), zeta ending at the return
            // or at the kill. Returning mass: the eps and alpha exponents
            // cancel against the entrance law, leaving 2 K_nu(eps) with
            // nu = mu - lambda_{alpha+c}. Kill-interrupted mass: the kill
            // time is exponential and independent, weight c / (alpha + c).
            if (spec.brownian) {
                double mu = spec.brownian_mu, c = spec.kill_const;
                double a = ctx.opt.alpha + c;
                double lam = mu + std::sqrt(mu * mu + 2.0 * a);
                double ret = 2.0 * drift_excursion_mass(mu - lam, eps);
                if (c == 0.0) return ret;
                return (ctx.opt.alpha / a) * ret +
                       (c / a) * 2.0 * drift_excursion_mass(mu, eps) *
                           std::exp(-a * eps);
            }
            double sig = spec.sig(y);
            double zhi = std::min(spec.window.hi,
                                  y + 12.0 * sig * std::sqrt(eps) +
                                      8.0 * std::abs(spec.b(y)) * eps);
            auto f = [&](double z) {
                double lap = std::exp(ctx.pair_f->log_g2_at(z) -
                                      ctx.pair_f->log_g2_at(y));
                return first_passage_density(spec, *ctx.cache, eps, z, y) *
                       spec.m_prime(z) * lap;
            };
            double root = sig * std::sqrt(eps);
            double val = 0.0, lo = y;
            for (double split :
                 {y + root / 3.0, y + root, y + 3.0 * root, zhi}) {
                double hi = std::min(split, zhi);
                if (hi > lo) val += integrate(f, lo, hi, 1e-7, 18);
                lo = hi;
            }
            return std::exp(-ctx.opt.alpha * eps) * val * spec.s_prime(y);
        }
        case LevyF::height: {
            // n_y(sup > y + h) = u^+(y) for the killed-harmonic u with
            // u(y) = 0, u(y + h) = 1.
            double h = ctx.opt.h;
            if (!ctx.killed) {
                double ds = spec.s(y + h) - spec.s(y);
                return spec.s_prime(y) / ds;
            }
            const EigenPair& p = *ctx.pair_h;
            double base = p.log_g1_at(y) + p.log_g2_at(y);
            double d = std::exp(p.log_g1_at(y + h) + p.log_g2_at(y) - base) -
                       std::exp(p.log_g2_at(y + h) + p.log_g1_at(y) - base);
            return p.wronskian * std::exp(-base) / d * spec.s_prime(y);
        }
    }
    return 0.0;
}

double levy_rhs(const RhsContext& ctx) {
    if (ctx.F == LevyF::zero) return 0.0;
    auto g = [&](double y) { return psi_z(ctx, y) * nf_level(ctx, y); };
    double tol = ctx.spec->brownian ? 1e-10 : 1e-6;
    int depth = ctx.spec->brownian ? 24 : 16;
    double lo = ctx.spec->window.lo, x = ctx.x;
    double val = 0.0, a = lo;
    for (double split : {x - 4.0, x - 1.0, x - 0.25, x}) {
        double b = std::min(std::max(split, lo), x);
        if (b > a) val += integrate(g, a, b, tol, depth);
        a = b;
    }
    return val;
}

// ---- Verification, sampling side. ----

struct TrackerResult {
    double sum = 0.0;
    bool unresolved = false;
    bool strayed = false;
};

// One path of the running-minimum excursion sum S = sum_i Z(u_i) F(e_i),
// u_i the first passage of level y_i. The skeleton is Euler; the step
// minimum, its argmin, the closing time, and (for the height functional)
// the step maxima are refined by exact bridge draws, so the Brownian
// presets carry no step-size bias. A path that reaches the window top is
// resolved as an upward escape: the open excursion never returns.
TrackerResult levy_lhs_one_path(const DiffusionSpec& spec, double x,
                                LevyZ Zkind, LevyF Fkind, double eps,
                                const LevyOptions& opt, Rng& rng) {
    TrackerResult res;
    if (Fkind == LevyF::zero) return res;
    double dt = opt.dt;
    double horizon = Zkind == LevyZ::exp_decay
                         ? opt.horizon
                         : opt.z_horizon + eps + 2.0 * dt;
    long n_steps = std::max<long>(1, std::lround(horizon / dt));
    bool has_kill = !(spec.kill_is_const && spec.kill_const == 0.0);
    double kill_budget =
        has_kill ? rng.exponential() : std::numeric_limits<double>::infinity();

    auto z_val = [&](double u) {
        if (Zkind == LevyZ::exp_decay) return std::exp(-u);
        return u < opt.z_horizon ? 1.0 : 0.0;
    };
    auto f_val = [&](double zeta, double hmax, double y) {
        switch (Fkind) {
            case LevyF::duration:
                return zeta > eps ? 1.0 : 0.0;
            case LevyF::laplace_duration:
                return zeta > eps ? std::exp(-opt.alpha * zeta) : 0.0;
            case LevyF::height:
                return hmax > y + opt.h ? 1.0 : 0.0;
            case LevyF::zero:
                return 0.0;
        }
        return 0.0;
    };
    // The value of an excursion that never returns: infinite lifetime.
    auto f_escape = [&](double hmax, double y) {
        switch (Fkind) {
            case LevyF::duration:
                return 1.0;
            case LevyF::laplace_duration:
                return 0.0;
            case LevyF::height:
                return hmax > y + opt.h ? 1.0 : 0.0;
            case LevyF::zero:
                return 0.0;
        }
        return 0.0;
    };

    double a = x;
    double y = x;        // running minimum
    double u_cur = 0.0;  // first-passage time of y, start of the open excursion
    double hmax = x;
    bool open = false;
    bool killed_now = false;
    bool done = false;
    double t_end = 0.0;

    for (long i = 0; i < n_steps && !done; ++i) {
        double t = double(i) * dt;
        double sig = spec.sig(a);
        double var0 = sig * sig * dt;
        double bn = a + spec.b(a) * dt + std::sqrt(var0) * rng.normal();
        double step_len = dt;
        double bval = bn;
        if (has_kill) {
            double rate = spec.c(a);
            double consume = rate * dt;
            if (consume >= kill_budget) {
                double kt = kill_budget / std::max(rate, 1e-300);
                step_len = std::min(kt, dt);
                double frac = step_len / dt;
                double mean = a + frac * (bn - a);
                double bv = var0 * frac * (1.0 - frac);
                bval = mean + std::sqrt(std::max(bv, 0.0)) * rng.normal();
                killed_now = true;
            } else {
                kill_budget -= consume;
            }
        }
        double var = sig * sig * step_len;

        double mstep = bridge_min_sample(a, bval, var, rng);
        if (mstep < y) {
            if (open) {
                double tau = bridge_first_cross_sample(a - y, bval - y,
                                                       step_len, sig * sig,
                                                       rng);
                double zeta = (t + tau) - u_cur;
                res.sum += z_val(u_cur) * f_val(zeta, hmax, y);
            }
            if (killed_now) {
                open = false;
                done = true;
            } else {
                double theta = bridge_argmin_sample(a, bval, mstep, step_len,
                                                    sig * sig, rng);
                y = mstep;
                u_cur = t + theta;
                hmax = bval;
                open = bval > y;
            }
        } else {
            if (Fkind == LevyF::height && open)
                hmax = std::max(hmax, bridge_max_sample(a, bval, var, rng));
            else
                hmax = std::max(hmax, bval);
            if (killed_now) {
                if (open) {
                    double zeta = (t + step_len) - u_cur;
                    res.sum += z_val(u_cur) * f_val(zeta, hmax, y);
                }
                open = false;
                done = true;
            }
        }
        a = bval;
        t_end = t + step_len;
        if (!done && bval >= spec.window.hi) {
            // Escape through the top of the computational box; the return
            // probability from there is negligible.
            if (open) res.sum += z_val(u_cur) * f_escape(hmax, y);
            res.strayed = true;
            open = false;
            done = true;
        }
        if (!done && bval <= spec.window.lo) {
            // The analytic side integrates levels down to the window bottom
            // only; stop and flag.
            if (open) res.unresolved = true;
            res.strayed = true;
            open = false;
            done = true;
        }
    }
    if (!open) return res;

    // Trailing excursion still open at the horizon.
    double u = u_cur, t = t_end;
    double zeta_obs = t - u;
    if (Fkind == LevyF::duration) {
        // The horizon case pads the horizon by eps + 2 dt, so zeta > eps is
        // already decided; the exp_decay tail carries weight exp(-horizon).
        res.sum += z_val(u) * (zeta_obs > eps ? 1.0 : 0.0);
        return res;
    }
    if (Zkind == LevyZ::exp_decay) {
        // The height indicator is usually decided already; anything else
        // left open here carries weight exp(-horizon).
        if (Fkind == LevyF::height && hmax > y + opt.h) {
            res.sum += z_val(u);
            return res;
        }
        res.unresolved = true;
        return res;
    }
    if (z_val(u) == 0.0) return res;
    // Keep stepping until the excursion closes or a cap is reached.
    double cap = Fkind == LevyF::laplace_duration ? 17.0 / opt.alpha : 200.0;
    long extra = std::max<long>(1, std::lround(cap / dt));
    for (long k = 0; k < extra; ++k) {
        double sig = spec.sig(a);
        double var0 = sig * sig * dt;
        double bn = a + spec.b(a) * dt + std::sqrt(var0) * rng.normal();
        double step_len = dt, bval = bn;
        if (has_kill) {
            double rate = spec.c(a);
            double consume = rate * dt;
            if (consume >= kill_budget) {
                double kt = kill_budget / std::max(rate, 1e-300);
                step_len = std::min(kt, dt);
                double frac = step_len / dt;
                double mean = a + frac * (bn - a);
                double bv = var0 * frac * (1.0 - frac);
                bval = mean + std::sqrt(std::max(bv, 0.0)) * rng.normal();
                killed_now = true;
            } else {
                kill_budget -= consume;
            }
        }
        double var = sig * sig * step_len;
        bool crossed = bval <= y;
        double aa = a - y, bb = bval - y;
        if (!crossed && !killed_now && 2.0 * aa * bb <= 80.0 * var)
            crossed = rng.uniform() < bridge_cross_prob(aa, bb, var);
        if (crossed && !killed_now) {
            double tau =
                bridge_first_cross_sample(aa, bb, step_len, sig * sig, rng);
            res.sum += z_val(u) * f_val((t + tau) - u, hmax, y);
            return res;
        }
        if (Fkind == LevyF::height)
            hmax = std::max(hmax, bridge_max_sample(a, bval, var, rng));
        if (killed_now) {
            res.sum += z_val(u) * f_val((t + step_len) - u, hmax, y);
            return res;
        }
        if (Fkind == LevyF::height && hmax > y + opt.h) {
            res.sum += z_val(u);
            return res;
        }
        a = bval;
        t += step_len;
        if (bval >= spec.window.hi) {
            res.sum += z_val(u) * f_escape(hmax, y);
            res.strayed = true;
            return res;
        }
    }
    res.unresolved = true;
    if (Fkind == LevyF::laplace_duration)
        res.sum += z_val(u) * std::exp(-opt.alpha * (t - u));
    return res;
}

}  // namespace

bool LevyReport::pass(double z_limit) const {
    return std::isfinite(z_score) && std::abs(z_score) <= z_limit;
}

std::string LevyReport::describe() const {
    std::ostringstream os;
    os << "levy: lhs=" << lhs << " rhs=" << rhs << " se=" << se_lhs
       << " z=" << z_score << " n=" << n;
    if (!note.empty()) os << " (" << note << ")";
    return os.str();
}

LevyReport verify_levy_system(const DiffusionSpec& spec, double x, LevyZ Z,
                              LevyF F, double eps, long n_paths,
                              std::uint64_t seed, const LevyOptions& opt) {
    if (eps < opt.dt)
        throw std::invalid_argument("verify_levy_system: eps below dt");
    if (!(x > spec.window.lo && x < spec.window.hi))
        throw std::invalid_argument("verify_levy_system: x outside window");
    if (n_paths < 1)
        throw std::invalid_argument("verify_levy_system: n_paths < 1");
    bool killed = spec.kill_is_const
                      ? spec.kill_const > 0.0
                      : spec.kill_tab.size() > 0 && spec.kill_tab.maxCoeff() > 0.0;
    if (F == LevyF::laplace_duration && killed && !spec.brownian)
        throw std::invalid_argument(
            "verify_levy_system: laplace_duration with killing needs a "
            "Brownian preset");

    RhsContext ctx;
    ctx.spec = &spec;
    ctx.Z = Z;
    ctx.F = F;
    ctx.eps = eps;
    ctx.opt = opt;
    ctx.x = x;
    ctx.killed = killed;
    if (!spec.brownian && F != LevyF::zero) {
        // The eigenproblem absorbs the spec's own killing, so the shifts
        // below add only the mark decay rates.
        ctx.cache = std::make_unique<LaplaceCache>(spec);
        if (Z == LevyZ::exp_decay)
            ctx.pair_z = std::make_unique<EigenPair>(
                solve_eigenfunctions(spec, 1.0));
        if (F == LevyF::laplace_duration)
            ctx.pair_f = std::make_unique<EigenPair>(
                solve_eigenfunctions(spec, opt.alpha));
    }
    if (F == LevyF::height && killed)
        ctx.pair_h = std::make_unique<EigenPair>(
            solve_eigenfunctions(spec, 0.0));
    double rhs = levy_rhs(ctx);

    int threads = resolve_threads(opt.threads);
    std::vector<double> sums(n_paths, 0.0);
    std::vector<std::uint8_t> unresolved(n_paths, 0), strayed(n_paths, 0);
    parallel_for(n_paths, threads, [&](long i) {
        Rng rng(seed, static_cast<std::uint64_t>(i));
        TrackerResult r = levy_lhs_one_path(spec, x, Z, F, eps, opt, rng);
        sums[i] = r.sum;
        unresolved[i] = r.unresolved ? 1 : 0;
        strayed[i] = r.strayed ? 1 : 0;
    });
    Welford w;
    long n_unres = 0, n_stray = 0;
    for (long i = 0; i < n_paths; ++i) {
        w.add(sums[i]);
        n_unres += unresolved[i];
        n_stray += strayed[i];
    }

    LevyReport rep;
    rep.lhs = w.mean;
    rep.rhs = rhs;
    rep.se_lhs = w.std_error();
    rep.se_rhs = 0.0;
    rep.n = n_paths;
    if (rep.lhs == rep.rhs) {
        rep.z_score = 0.0;
    } else {
        double se = rep.se_lhs > 0.0 ? rep.se_lhs
                                     : std::numeric_limits<double>::infinity();
        rep.z_score = (rep.lhs - rep.rhs) / se;
    }
    std::ostringstream note;
    if (n_unres > 0) note << "unresolved tails=" << n_unres;
    if (n_stray > 0) (n_unres > 0 ? note << ", " : note) << "window exits="
                                                         << n_stray;
    rep.note = note.str();
    return rep;
}

}  // namespace excursus
