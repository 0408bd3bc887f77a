#include "excursus/pathsim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "excursus/densities.hpp"

namespace excursus {

double Path::value_at(double t) const {
    if (values.empty()) return 0.0;
    if (t <= t0) return values.front();
    if (t >= lifetime) return values.back();
    double u = (t - t0) / dt;
    int i = static_cast<int>(u);
    int last = static_cast<int>(values.size()) - 1;
    if (i >= last) return values.back();
    // The closing sample can sit off-grid at `lifetime`.
    double tl = t0 + i * dt;
    double tr = (i + 1 == last) ? time_at(last) : tl + dt;
    double w = (t - tl) / (tr - tl);
    return values[i] + w * (values[i + 1] - values[i]);
}

double bridge_cross_prob(double a, double b, double var) {
    if (a <= 0.0 || b <= 0.0) return 1.0;
    if (var <= 0.0) return 0.0;
    return std::exp(-2.0 * a * b / var);
}

namespace {

// Inverse CDF of the bridge minimum: P(min <= m) = exp(-2(x0-m)(x1-m)/var).
double min_from_quantile(double x0, double x1, double var, double u) {
    double q = -0.5 * var * std::log(u);
    double d = x0 - x1;
    return 0.5 * ((x0 + x1) - std::sqrt(d * d + 4.0 * q));
}

} // namespace

double bridge_min_sample(double x0, double x1, double var, Rng& rng) {
    if (var <= 0.0) return std::min(x0, x1);
    return min_from_quantile(x0, x1, var, rng.uniform());
}

double bridge_min_sample_below(double x0, double x1, double var, double cap,
                               Rng& rng) {
    if (var <= 0.0) return std::min(x0, x1);
    double p = 1.0;
    if (cap < x0 && cap < x1)
        p = std::exp(-2.0 * (x0 - cap) * (x1 - cap) / var);
    return min_from_quantile(x0, x1, var, rng.uniform() * p);
}

double bridge_max_sample(double x0, double x1, double var, Rng& rng) {
    if (var <= 0.0) return std::max(x0, x1);
    double q = -0.5 * var * std::log(rng.uniform());
    double d = x0 - x1;
    return 0.5 * ((x0 + x1) + std::sqrt(d * d + 4.0 * q));
}

// Given the step minimum m, the attainment time has density
// p(th) ~ th^{-3/2} (dt-th)^{-3/2} exp(-a^2/(2 s2 th) - b^2/(2 s2 (dt-th)))
// with a = x0-m, b = x1-m. In y = (dt-th)/th this is a two-component
// mixture of an inverse-Gaussian and a reciprocal inverse-Gaussian, with
// weight a/(a+b) on the first, so the draw is exact.
double bridge_argmin_sample(double x0, double x1, double m, double dt,
                            double sigma2, Rng& rng) {
    double a = x0 - m, b = x1 - m;
    if (!(a > 0.0) && !(b > 0.0)) return 0.5 * dt;
    if (!(a > 0.0)) return 0.0;
    if (!(b > 0.0)) return dt;
    double v = sigma2 * dt;
    double y;
    if (rng.uniform() * (a + b) < a)
        y = sample_inverse_gaussian(rng, b / a, b * b / v);
    else
        y = 1.0 / sample_inverse_gaussian(rng, a / b, a * a / v);
    return dt / (1.0 + y);
}

// First crossing of 0 by a step from a > 0 to b, conditioned to cross:
// h(s) ~ s^{-3/2} (dt-s)^{-1/2} exp(-a^2/(2 s2 s) - b^2/(2 s2 (dt-s))).
// In y = (dt-s)/s the law is reciprocal inverse-Gaussian (a chi-square
// tail when b = 0), so this draw is exact as well.
double bridge_first_cross_sample(double a, double b, double dt, double sigma2,
                                 Rng& rng) {
    if (!(a > 0.0)) return 0.0;
    double v = sigma2 * dt;
    double y;
    if (b * b > 1e-300 * v) {
        double ab = std::abs(b);
        y = 1.0 / sample_inverse_gaussian(rng, a / ab, a * a / v);
    } else {
        double z = rng.normal();
        y = v * z * z / (a * a);
    }
    return dt / (1.0 + y);
}

namespace {

struct Barrier {
    bool lower_active = false;
    double lower = 0.0;
    bool upper_active = false;
    double upper = 0.0;
};

Barrier barriers_of(const DiffusionSpec& spec) {
    Barrier b;
    if (spec.interval.lower_absorbing && std::isfinite(spec.interval.lower)) {
        b.lower_active = true;
        b.lower = spec.interval.lower;
    }
    if (spec.interval.upper_absorbing && std::isfinite(spec.interval.upper)) {
        b.upper_active = true;
        b.upper = spec.interval.upper;
    }
    return b;
}

} // namespace

Path sample_path(const DiffusionSpec& spec, double x0, double dt,
                 double horizon, Rng& rng) {
    if (!(dt > 0.0) || !(horizon > 0.0))
        throw std::invalid_argument("sample_path: dt and horizon must be positive");
    Path p;
    p.t0 = 0.0;
    p.dt = dt;
    p.lifetime = horizon;
    int n = static_cast<int>(std::ceil(horizon / dt - 1e-9));
    p.values.reserve(n + 2);
    p.values.push_back(x0);

    Barrier bar = barriers_of(spec);
    bool has_kill = static_cast<bool>(spec.kill) &&
                    !(spec.kill_is_const && spec.kill_const == 0.0);
    double kill_budget = has_kill ? rng.exponential(1.0) : 0.0;
    double kill_acc = 0.0;

    double x = x0;
    for (int k = 0; k < n; ++k) {
        double t = k * dt;
        double h = std::min(dt, horizon - t);
        double sg = spec.sig(x);
        double xn = x + spec.b(x) * h + sg * std::sqrt(h) * rng.normal();

        double t_kill = std::numeric_limits<double>::infinity();
        if (has_kill) {
            double rate = spec.c(x);
            if (rate > 0.0 && kill_acc + rate * h >= kill_budget)
                t_kill = t + (kill_budget - kill_acc) / rate;
            kill_acc += rate * h;
        }

        double t_abs = std::numeric_limits<double>::infinity();
        double abs_level = 0.0;
        double var = sg * sg * h;
        // A bridge-crossing probability below exp(-80) can never beat a
        // uniform draw, so those steps skip the test entirely.
        if (bar.lower_active && x > bar.lower) {
            double a = x - bar.lower, b2 = xn - bar.lower;
            if (xn <= bar.lower) {
                t_abs = t + h * (x - bar.lower) / (x - xn);
                abs_level = bar.lower;
            } else if (2.0 * a * b2 < 80.0 * var &&
                       rng.uniform() < bridge_cross_prob(a, b2, var)) {
                t_abs = t + 0.5 * h;
                abs_level = bar.lower;
            }
        }
        if (bar.upper_active && x < bar.upper &&
            !(t_abs < std::numeric_limits<double>::infinity())) {
            double a = bar.upper - x, b2 = bar.upper - xn;
            if (xn >= bar.upper) {
                t_abs = t + h * (bar.upper - x) / (xn - x);
                abs_level = bar.upper;
            } else if (2.0 * a * b2 < 80.0 * var &&
                       rng.uniform() < bridge_cross_prob(a, b2, var)) {
                t_abs = t + 0.5 * h;
                abs_level = bar.upper;
            }
        }

        if (t_kill < t_abs && t_kill <= t + h) {
            double w = (t_kill - t) / h;
            p.values.push_back(x + w * (xn - x));
            p.lifetime = t_kill;
            p.killed = true;
            return p;
        }
        if (t_abs <= t + h) {
            p.values.push_back(abs_level);
            p.lifetime = t_abs;
            p.absorbed = true;
            return p;
        }
        if (!spec.window.contains(xn)) {
            p.lifetime = t;
            p.left_window = true;
            return p;
        }
        p.values.push_back(xn);
        x = xn;
    }
    return p;
}

MinFunctional running_minimum(const DiffusionSpec& spec, const Path& path) {
    MinFunctional out;
    size_t n = path.values.size();
    out.H.resize(n);
    out.C.resize(n);
    if (n == 0) return out;
    double h = path.values[0];
    double s0 = spec.s(h);
    for (size_t i = 0; i < n; ++i) {
        if (path.values[i] < h) h = path.values[i];
        out.H[i] = h;
        out.C[i] = (i == 0) ? 0.0 : s0 - spec.s(h);
    }
    double hmin = out.H.back();
    for (size_t i = 0; i < n; ++i) {
        if (path.values[i] == hmin) {
            out.rho_index = static_cast<int>(i);
            break;
        }
    }
    out.rho = path.time_at(out.rho_index);
    return out;
}

std::vector<ExcursionRecord> extract_excursions(const Path& path,
                                                double min_duration) {
    if (min_duration < path.dt)
        throw std::invalid_argument(
            "extract_excursions: min_duration must be at least dt");
    std::vector<ExcursionRecord> out;
    size_t n = path.values.size();
    if (n < 2) return out;

    // Exact running-minimum tracker; indices where the path sits at its
    // minimum split the path, and each maximal gap is one excursion.
    std::vector<double> H(n);
    double h = path.values[0];
    for (size_t i = 0; i < n; ++i) {
        if (path.values[i] < h) h = path.values[i];
        H[i] = h;
    }

    size_t last_at_min = 0;
    for (size_t i = 1; i <= n; ++i) {
        bool at_min = i < n && path.values[i] == H[i];
        if (!at_min && i < n) continue;
        if (i > last_at_min + 1) {
            size_t close = i < n ? i : n - 1;
            ExcursionRecord rec;
            rec.u = path.time_at(static_cast<int>(last_at_min));
            rec.level = path.values[last_at_min];
            rec.duration =
                path.time_at(static_cast<int>(close)) - rec.u;
            rec.fragment.t0 = rec.u;
            rec.fragment.dt = path.dt;
            rec.fragment.lifetime = rec.u + rec.duration;
            rec.fragment.values.assign(path.values.begin() + last_at_min,
                                       path.values.begin() + close + 1);
            if (rec.duration >= min_duration) out.push_back(std::move(rec));
        }
        last_at_min = i;
    }
    return out;
}

MinTriple sample_min_triple(const DiffusionSpec& spec, double x0, double dt,
                            double horizon, Rng& rng) {
    int n = static_cast<int>(std::ceil(horizon / dt - 1e-9));
    double x = x0;
    double best_m = x0;
    int best_k = -1;
    double best_l = x0, best_r = x0, best_h = dt;
    for (int k = 0; k < n; ++k) {
        double h = std::min(dt, horizon - k * dt);
        double sg = spec.sig(x);
        double xn = x + spec.b(x) * h + sg * std::sqrt(h) * rng.normal();
        double m = bridge_min_sample(x, xn, sg * sg * h, rng);
        if (m < best_m) {
            best_m = m;
            best_k = k;
            best_l = x;
            best_r = xn;
            best_h = h;
        }
        x = xn;
    }
    MinTriple out;
    out.minimum = best_m;
    out.endpoint = x;
    if (best_k < 0) {
        out.argmin = 0.0;
        return out;
    }
    double sg = spec.sig(best_l);
    double th = bridge_argmin_sample(best_l, best_r, best_m, best_h, sg * sg,
                                     rng);
    out.argmin = best_k * dt + th;
    return out;
}

} // namespace excursus
