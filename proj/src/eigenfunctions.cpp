#include "excursus/eigenfunctions.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace excursus {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// State y = (phi, w) with phi = log g and w = (dg/ds)/g:
//   phi' = w s'(x)
//   w'   = (alpha + c(x)) m'(x) - w^2 s'(x)
struct RiccatiOde {
    const DiffusionSpec& spec;
    double alpha;

    void deriv(double x, double w, double& dphi, double& dw) const {
        double sp = spec.s_prime(x);
        dphi = w * sp;
        dw = (alpha + spec.c(x)) * spec.m_prime(x) - w * w * sp;
    }
};

void rk4_cell(const RiccatiOde& ode, double x, double h, int substeps,
              double& phi, double& w) {
    double hs = h / substeps;
    for (int k = 0; k < substeps; ++k) {
        double xs = x + k * hs;
        double k1p, k1w, k2p, k2w, k3p, k3w, k4p, k4w;
        ode.deriv(xs, w, k1p, k1w);
        ode.deriv(xs + hs / 2, w + hs / 2 * k1w, k2p, k2w);
        ode.deriv(xs + hs / 2, w + hs / 2 * k2w, k3p, k3w);
        ode.deriv(xs + hs, w + hs * k3w, k4p, k4w);
        phi += hs / 6 * (k1p + 2 * k2p + 2 * k3p + k4p);
        w += hs / 6 * (k1w + 2 * k2w + 2 * k3w + k4w);
    }
}

// One grid cell, re-integrated with doubling substep counts until the cell
// endpoint settles. Dirichlet data decay like 1/(s - s(edge)) and entrance
// edges can have coefficients varying by orders of magnitude across a cell,
// so no fixed count works everywhere.
void rk4_cell_adaptive(const RiccatiOde& ode, double x, double h,
                       double& phi, double& w) {
    double phi_prev = 0.0, w_prev = 0.0;
    bool have_prev = false;
    for (int n = 2;; n *= 2) {
        double p = phi, v = w;
        rk4_cell(ode, x, h, n, p, v);
        if (have_prev) {
            bool settled =
                std::abs(p - phi_prev) <= 1e-11 * std::max(1.0, std::abs(p)) &&
                std::abs(v - w_prev) <= 1e-11 * std::max(1.0, std::abs(v));
            if (settled || n >= 2048) {
                phi = p;
                w = v;
                return;
            }
        }
        phi_prev = p;
        w_prev = v;
        have_prev = true;
    }
}

double wkb_w(const DiffusionSpec& spec, double alpha, double x, int sign) {
    double q = (alpha + spec.c(x)) * spec.m_prime(x) / spec.s_prime(x);
    return sign * std::sqrt(std::max(0.0, q));
}

bool edge_is_absorbing(const DiffusionSpec& spec, bool lower) {
    const Interval& iv = spec.interval;
    double edge = lower ? spec.window.lo : spec.window.hi;
    double bd = lower ? iv.lower : iv.upper;
    bool declared = lower ? iv.lower_absorbing : iv.upper_absorbing;
    return declared && std::isfinite(bd) &&
           std::abs(bd - edge) <= 1e-9 * (1.0 + std::abs(edge));
}

} // namespace

EigenPair solve_eigenfunctions(const DiffusionSpec& spec, double alpha) {
    if (!(alpha > 0.0))
        throw std::invalid_argument("solve_eigenfunctions: alpha must be > 0");
    const Grid& g = spec.window;
    int N = g.size();
    double h = g.h();

    EigenPair out;
    out.alpha = alpha;
    out.grid = g;
    out.s_vals = spec.s_tab;
    out.s_derivs = spec.s_deriv_tab;
    out.lower_dirichlet = edge_is_absorbing(spec, true);
    out.upper_dirichlet = edge_is_absorbing(spec, false);
    out.log_g1.resize(N);
    out.log_g2.resize(N);
    out.w1.resize(N);
    out.w2.resize(N);
    out.dlog_g1.resize(N);
    out.dlog_g2.resize(N);

    RiccatiOde ode{spec, alpha};

    // g1: increasing solution, integrated upward so it is the attracting one.
    {
        int start = 0;
        double phi, w;
        if (out.lower_dirichlet) {
            if (g.cell(spec.x0) < 2)
                throw std::invalid_argument(
                    "solve_eigenfunctions: anchor too close to absorbing edge");
            double ds = out.s_vals[1] - out.s_vals[0];
            out.log_g1[0] = -kInf;
            out.w1[0] = kInf;
            out.dlog_g1[0] = kInf;
            phi = std::log(ds);
            w = 1.0 / ds;
            start = 1;
        } else {
            phi = 0.0;
            w = wkb_w(spec, alpha, g.lo, +1);
        }
        out.log_g1[start] = phi;
        out.w1[start] = w;
        for (int i = start; i < N - 1; ++i) {
            rk4_cell_adaptive(ode, g.point(i), h, phi, w);
            out.log_g1[i + 1] = phi;
            out.w1[i + 1] = w;
        }
        for (int i = start; i < N; ++i)
            out.dlog_g1[i] = out.w1[i] * spec.s_prime(g.point(i));
    }

    // g2: decreasing solution, integrated downward.
    {
        int start = N - 1;
        double phi, w;
        if (out.upper_dirichlet) {
            if (g.cell(spec.x0) > g.n - 2)
                throw std::invalid_argument(
                    "solve_eigenfunctions: anchor too close to absorbing edge");
            double ds = out.s_vals[N - 1] - out.s_vals[N - 2];
            out.log_g2[N - 1] = -kInf;
            out.w2[N - 1] = -kInf;
            out.dlog_g2[N - 1] = -kInf;
            phi = std::log(ds);
            w = -1.0 / ds;
            start = N - 2;
        } else {
            phi = 0.0;
            w = wkb_w(spec, alpha, g.hi, -1);
        }
        out.log_g2[start] = phi;
        out.w2[start] = w;
        for (int i = start; i > 0; --i) {
            rk4_cell_adaptive(ode, g.point(i), -h, phi, w);
            out.log_g2[i - 1] = phi;
            out.w2[i - 1] = w;
        }
        for (int i = start; i >= 0; --i)
            out.dlog_g2[i] = out.w2[i] * spec.s_prime(g.point(i));
    }

    // Anchor both at x0: g(x0) = 1.
    {
        double a1 = hermite_eval(g, out.log_g1, out.dlog_g1, spec.x0);
        double a2 = hermite_eval(g, out.log_g2, out.dlog_g2, spec.x0);
        out.log_g1 -= a1;
        out.log_g2 -= a2;
    }

    // Wronskian diagnostic over nodes where both logs are finite.
    {
        int i0 = out.lower_dirichlet ? 1 : 0;
        int i1 = out.upper_dirichlet ? N - 2 : N - 1;
        out.wronskian_tab.resize(i1 - i0 + 1);
        for (int i = i0; i <= i1; ++i)
            out.wronskian_tab[i - i0] =
                std::exp(out.log_g1[i] + out.log_g2[i]) * (out.w1[i] - out.w2[i]);
        int ja = g.cell(spec.x0) - i0;
        ja = std::min<int>(std::max(0, ja), out.wronskian_tab.size() - 1);
        out.wronskian = out.wronskian_tab[ja];
    }
    return out;
}

double EigenPair::log_g1_at(double x) const {
    if (lower_dirichlet && x <= grid.point(1)) {
        double sx = hermite_eval(grid, s_vals, s_derivs, x);
        double gap = sx - s_vals[0];
        if (gap <= 0.0) return -kInf;
        return std::log(gap / (s_vals[1] - s_vals[0])) + log_g1[1];
    }
    return hermite_eval(grid, log_g1, dlog_g1, x);
}

double EigenPair::log_g2_at(double x) const {
    int N = grid.size();
    if (upper_dirichlet && x >= grid.point(grid.n - 1)) {
        double sx = hermite_eval(grid, s_vals, s_derivs, x);
        double gap = s_vals[N - 1] - sx;
        if (gap <= 0.0) return -kInf;
        return std::log(gap / (s_vals[N - 1] - s_vals[N - 2])) + log_g2[N - 2];
    }
    return hermite_eval(grid, log_g2, dlog_g2, x);
}

double EigenPair::w1_at(double x) const {
    if (lower_dirichlet && x <= grid.point(1)) {
        double gap = hermite_eval(grid, s_vals, s_derivs, x) - s_vals[0];
        return gap > 0.0 ? 1.0 / gap : kInf;
    }
    return linear_eval(grid, w1, x);
}

double EigenPair::w2_at(double x) const {
    int N = grid.size();
    if (upper_dirichlet && x >= grid.point(grid.n - 1)) {
        double gap = s_vals[N - 1] - hermite_eval(grid, s_vals, s_derivs, x);
        return gap > 0.0 ? -1.0 / gap : -kInf;
    }
    return linear_eval(grid, w2, x);
}

double EigenPair::wronskian_deviation() const {
    double ref = std::abs(wronskian);
    if (!(ref > 0.0)) return kInf;
    return (wronskian_tab - wronskian).abs().maxCoeff() / ref;
}

double resolvent_density(const EigenPair& pair, double x, double y) {
    double a = std::min(x, y), b = std::max(x, y);
    return std::exp(pair.log_g1_at(a) + pair.log_g2_at(b)) / pair.wronskian;
}

ArrayXd resolvent_apply(const DiffusionSpec& spec, const EigenPair& pair,
                        const Real1D& f) {
    const Grid& g = pair.grid;
    int N = g.size();
    double h = g.h();
    ArrayXd fm(N);
    for (int i = 0; i < N; ++i) {
        double x = g.point(i);
        fm[i] = f(x) * spec.m_prime(x);
    }
    double A = pair.log_g1.maxCoeff();
    double B = pair.log_g2.maxCoeff();
    ArrayXd e1 = (pair.log_g1 - A).exp() * fm;
    ArrayXd e2 = (pair.log_g2 - B).exp() * fm;
    ArrayXd P(N), Q(N);
    P[0] = 0.0;
    for (int i = 1; i < N; ++i) P[i] = P[i - 1] + h / 2 * (e1[i - 1] + e1[i]);
    Q[N - 1] = 0.0;
    for (int i = N - 2; i >= 0; --i) Q[i] = Q[i + 1] + h / 2 * (e2[i] + e2[i + 1]);
    double lw = std::log(pair.wronskian);
    ArrayXd out(N);
    for (int j = 0; j < N; ++j) {
        double t1 = P[j] > 0.0
                        ? std::exp(pair.log_g2[j] + A + std::log(P[j]) - lw)
                        : 0.0;
        double t2 = Q[j] > 0.0
                        ? std::exp(pair.log_g1[j] + B + std::log(Q[j]) - lw)
                        : 0.0;
        out[j] = t1 + t2;
    }
    return out;
}

double hitting_laplace(const EigenPair& pair, double x, double y) {
    if (x <= y) return std::exp(pair.log_g1_at(x) - pair.log_g1_at(y));
    return std::exp(pair.log_g2_at(x) - pair.log_g2_at(y));
}

double hitting_laplace(const DiffusionSpec& spec, double x, double y,
                       double alpha) {
    EigenPair pair = solve_eigenfunctions(spec, alpha);
    return hitting_laplace(pair, x, y);
}

double excursion_resolvent(const DiffusionSpec& spec, const EigenPair& pair,
                           const Real1D& f, double y) {
    const Grid& g = pair.grid;
    if (!g.contains(y))
        throw std::invalid_argument("excursion_resolvent: y outside window");
    double ly1 = pair.log_g1_at(y);
    double ly2 = pair.log_g2_at(y);
    auto below = [&](double z) {
        return std::exp(pair.log_g1_at(z) - ly1) * f(z) * spec.m_prime(z);
    };
    auto above = [&](double z) {
        return std::exp(pair.log_g2_at(z) - ly2) * f(z) * spec.m_prime(z);
    };
    double lo_part = y > g.lo ? integrate(below, g.lo, y, 1e-10) : 0.0;
    double hi_part = y < g.hi ? integrate(above, y, g.hi, 1e-10) : 0.0;
    return lo_part + hi_part;
}

RuinFunction ruin_function(const DiffusionSpec& spec) {
    const Grid& g = spec.window;
    int N = g.size();
    double h = g.h();

    RuinFunction out;
    out.grid = g;
    out.s_vals = spec.s_tab;
    out.s_derivs = spec.s_deriv_tab;

    bool has_kill = spec.kill_tab.maxCoeff() > 0.0;
    if (!has_kill) {
        // Exact route: r = (s(B) - s(x)) / (s(B) - s(x0)). Finite s(B) is
        // exactly the upward-transience condition here.
        double tail = 0.0;
        const Interval& iv = spec.interval;
        if (std::isfinite(iv.upper) && iv.upper > g.hi + 1e-12) {
            TailIntegral ti = endpoint_integral(
                [&](double x) { return spec.s_prime(x); }, g.hi, iv.upper, 1e-12);
            if (!ti.converged)
                throw std::domain_error(
                    "ruin_function: scale diverges toward the upper boundary; "
                    "process is not upward transient");
            tail = ti.value;
        } else if (!std::isfinite(iv.upper)) {
            TailIntegral ti = improper_integral(
                [&](double x) { return spec.s_prime(x); }, g.hi, +1.0, 1e-12);
            if (!ti.converged)
                throw std::domain_error(
                    "ruin_function: scale diverges toward the upper boundary; "
                    "process is not upward transient");
            tail = ti.value;
        }
        out.exact_route = true;
        out.s_tail = tail;
        out.s_total = out.s_vals[N - 1] + tail;
        double s0 = hermite_eval(g, out.s_vals, out.s_derivs, spec.x0);
        double denom = out.s_total - s0;
        if (!(denom > 0.0))
            throw std::domain_error("ruin_function: s(B) - s(x0) must be positive");
        out.log_r0 = std::log(denom);
        out.log_r.resize(N);
        out.w.resize(N);
        out.dlog_r.resize(N);
        for (int i = 0; i < N; ++i) {
            double gap = out.s_total - out.s_vals[i];
            out.log_r[i] = gap > 0.0 ? std::log(gap) - out.log_r0 : -kInf;
            out.w[i] = gap > 0.0 ? -1.0 / gap : -kInf;
            out.dlog_r[i] = out.w[i] * spec.s_prime(g.point(i));
        }
        return out;
    }

    // Killed route: decreasing positive solution of G r = 0, integrated
    // downward from the upper window edge.
    RiccatiOde ode{spec, 0.0};
    out.log_r.resize(N);
    out.w.resize(N);
    out.dlog_r.resize(N);
    bool upper_dir = edge_is_absorbing(spec, false);
    int start = N - 1;
    double phi, w;
    if (upper_dir) {
        double ds = out.s_vals[N - 1] - out.s_vals[N - 2];
        out.log_r[N - 1] = -kInf;
        out.w[N - 1] = -kInf;
        out.dlog_r[N - 1] = -kInf;
        phi = std::log(ds);
        w = -1.0 / ds;
        start = N - 2;
    } else {
        phi = 0.0;
        w = wkb_w(spec, 0.0, g.hi, -1);
    }
    out.log_r[start] = phi;
    out.w[start] = w;
    for (int i = start; i > 0; --i) {
        rk4_cell_adaptive(ode, g.point(i), -h, phi, w);
        out.log_r[i - 1] = phi;
        out.w[i - 1] = w;
    }
    for (int i = start; i >= 0; --i)
        out.dlog_r[i] = out.w[i] * spec.s_prime(g.point(i));
    double a = hermite_eval(g, out.log_r, out.dlog_r, spec.x0);
    out.log_r -= a;
    return out;
}

double RuinFunction::log_r_at(double x) const {
    if (exact_route) {
        double gap = s_total - hermite_eval(grid, s_vals, s_derivs, x);
        return gap > 0.0 ? std::log(gap) - log_r0 : -kInf;
    }
    return hermite_eval(grid, log_r, dlog_r, x);
}

double RuinFunction::w_at(double x) const {
    if (exact_route) {
        double gap = s_total - hermite_eval(grid, s_vals, s_derivs, x);
        return gap > 0.0 ? -1.0 / gap : -kInf;
    }
    return linear_eval(grid, w, x);
}

double escape_rate(const RuinFunction& r, double y) { return -r.w_at(y); }

} // namespace excursus
