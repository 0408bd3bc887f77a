#include "excursus/grid.hpp"

#include <cmath>

namespace excursus {

Grid::Grid(double lo_, double hi_, int n_) : lo(lo_), hi(hi_), n(n_) {
    if (!(hi > lo)) throw std::invalid_argument("grid: hi must exceed lo");
    if (n < 2) throw std::invalid_argument("grid: need at least 2 cells");
    if (n % 2 != 0) throw std::invalid_argument("grid: cell count must be even");
}

ArrayXd Grid::points() const {
    return ArrayXd::LinSpaced(n + 1, lo, hi);
}

int Grid::cell(double x) const {
    int i = static_cast<int>(std::floor((x - lo) / h()));
    if (i < 0) i = 0;
    if (i > n - 1) i = n - 1;
    return i;
}

ArrayXd Grid::map(const Real1D& f) const {
    ArrayXd out(n + 1);
    for (int i = 0; i <= n; ++i) out[i] = f(point(i));
    return out;
}

ArrayXd simpson_weights(const Grid& g) {
    ArrayXd w = ArrayXd::Constant(g.n + 1, 2.0);
    for (int i = 1; i < g.n; i += 2) w[i] = 4.0;
    w[0] = 1.0;
    w[g.n] = 1.0;
    return w * (g.h() / 3.0);
}

double simpson(const Grid& g, const ArrayXd& values) {
    if (values.size() != g.n + 1)
        throw std::invalid_argument("simpson: value count does not match grid");
    return (simpson_weights(g) * values).sum();
}

ArrayXd cumulative_integral(const Grid& g, const ArrayXd& values) {
    if (values.size() != g.n + 1)
        throw std::invalid_argument("cumulative_integral: size mismatch");
    const double h = g.h();
    const int n = g.n;
    ArrayXd out(n + 1);
    out[0] = 0.0;
    if (n == 2) {
        out[1] = h / 12.0 * (5.0 * values[0] + 8.0 * values[1] - values[2]);
        out[2] = out[1] +
                 h / 12.0 * (-values[0] + 8.0 * values[1] + 5.0 * values[2]);
        return out;
    }
    // Per-cell integral of the cubic through four neighbouring nodes; the
    // local error is O(h^5) so the prefix stays fourth order throughout.
    for (int i = 1; i <= n; ++i) {
        int j = i - 1; // cell [j, j+1]
        double seg;
        if (j == 0) {
            seg = h / 24.0 *
                  (9.0 * values[0] + 19.0 * values[1] - 5.0 * values[2] +
                   values[3]);
        } else if (j == n - 1) {
            seg = h / 24.0 *
                  (values[n - 3] - 5.0 * values[n - 2] + 19.0 * values[n - 1] +
                   9.0 * values[n]);
        } else {
            seg = h / 24.0 *
                  (-values[j - 1] + 13.0 * values[j] + 13.0 * values[j + 1] -
                   values[j + 2]);
        }
        out[i] = out[i - 1] + seg;
    }
    return out;
}

namespace {

double adaptive_step(const Real1D& f, double a, double b, double fa,
                     double fm, double fb, double whole, double tol,
                     int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double err = left + right - whole;
    if (!std::isfinite(err)) return left + right;
    if (depth <= 0 || std::abs(err) <= 15.0 * tol)
        return left + right + err / 15.0;
    return adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace

double integrate(const Real1D& f, double a, double b, double tol,
                 int max_depth) {
    if (a == b) return 0.0;
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    if (!std::isfinite(whole)) return whole;
    return adaptive_step(f, a, b, fa, fm, fb, whole,
                         tol * std::max(1.0, std::abs(whole)), max_depth);
}

TailIntegral improper_integral(const Real1D& f, double a, double toward,
                               double tol, double divergence_cap) {
    TailIntegral out;
    double dir = toward >= 0 ? 1.0 : -1.0;
    double width = 1.0;
    double from = a;
    for (int k = 0; k < 64; ++k) {
        double to = from + dir * width;
        double piece = integrate(f, std::min(from, to), std::max(from, to),
                                 tol * 1e-2);
        out.value += piece;
        if (!std::isfinite(out.value) || std::abs(out.value) > divergence_cap)
            return out;
        if (std::abs(piece) < tol * std::max(1.0, std::abs(out.value))) {
            out.converged = true;
            return out;
        }
        from = to;
        width *= 2.0;
    }
    return out;
}

TailIntegral endpoint_integral(const Real1D& f, double a, double b,
                               double tol, double divergence_cap) {
    // Geometric shells closing in on b; the endpoint itself is never
    // evaluated. Power-law shell sums are geometric, so the remaining tail is
    // extrapolated from the shell ratio and convergence is declared when the
    // extrapolated total settles.
    TailIntegral out;
    double gap = b - a;
    double from = a;
    double prev_piece = 0.0;
    double prev_total = std::numeric_limits<double>::quiet_NaN();
    for (int k = 1; k <= 60; ++k) {
        double to = b - gap * std::ldexp(1.0, -k);
        if (to == from || to == b) break; // floating-point resolution exhausted
        double lo = std::min(from, to), hi = std::max(from, to);
        double piece = integrate(f, lo, hi, tol * 1e-2);
        out.value += piece;
        if (!std::isfinite(out.value) || std::abs(out.value) > divergence_cap)
            return out;
        double total = out.value;
        if (k > 1 && piece != 0.0 && prev_piece != 0.0) {
            double r = piece / prev_piece;
            if (r > 0.0 && r < 0.97) total += piece * r / (1.0 - r);
        }
        if (k > 4 && std::abs(piece) <= tol * std::max(1.0, std::abs(total))) {
            out.value = total;
            out.converged = true;
            return out;
        }
        if (k > 4 && std::isfinite(prev_total) &&
            std::abs(total - prev_total) <=
                tol * std::max(1.0, std::abs(total))) {
            out.value = total;
            out.converged = true;
            return out;
        }
        prev_piece = piece;
        prev_total = total;
        from = to;
    }
    return out;
}

double hermite_eval(const Grid& g, const ArrayXd& values, const ArrayXd& derivs,
                    double x) {
    int i = g.cell(x);
    double h = g.h();
    double t = (x - g.point(i)) / h;
    double y0 = values[i], y1 = values[i + 1];
    double d0 = derivs[i] * h, d1 = derivs[i + 1] * h;
    double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * d0 +
           (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * d1;
}

double hermite_deriv(const Grid& g, const ArrayXd& values, const ArrayXd& derivs,
                     double x) {
    int i = g.cell(x);
    double h = g.h();
    double t = (x - g.point(i)) / h;
    double y0 = values[i], y1 = values[i + 1];
    double d0 = derivs[i] * h, d1 = derivs[i + 1] * h;
    double t2 = t * t;
    double dy = (6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * d0 +
                (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * d1;
    return dy / h;
}

double linear_eval(const Grid& g, const ArrayXd& values, double x) {
    int i = g.cell(x);
    double t = (x - g.point(i)) / g.h();
    t = std::min(1.0, std::max(0.0, t));
    return values[i] + t * (values[i + 1] - values[i]);
}

double TabulatedFunction::operator()(double x) const {
    return hermite_eval(grid, values, derivs, x);
}

double TabulatedFunction::derivative(double x) const {
    return hermite_deriv(grid, values, derivs, x);
}

double invert_monotone(const TabulatedFunction& f, double target) {
    const ArrayXd& v = f.values;
    int n = static_cast<int>(v.size()) - 1;
    bool increasing = v[n] > v[0];
    double flo = increasing ? v[0] : v[n];
    double fhi = increasing ? v[n] : v[0];
    if (target < flo || target > fhi)
        throw std::domain_error("invert_monotone: target outside range");
    int lo = 0, hi = n;
    while (hi - lo > 1) {
        int mid = (lo + hi) / 2;
        bool left = increasing ? (v[mid] <= target) : (v[mid] >= target);
        if (left) lo = mid; else hi = mid;
    }
    double a = f.grid.point(lo), b = f.grid.point(hi);
    for (int it = 0; it < 60; ++it) {
        double m = 0.5 * (a + b);
        double fm = f(m);
        bool left = increasing ? (fm <= target) : (fm >= target);
        if (left) a = m; else b = m;
        if (b - a < 1e-14 * std::max(1.0, std::abs(a))) break;
    }
    return 0.5 * (a + b);
}

double sample_inverse_cdf(const Grid& g, const ArrayXd& density, double u) {
    if (density.size() != g.n + 1)
        throw std::invalid_argument("sample_inverse_cdf: size mismatch");
    const double h = g.h();
    int n = g.n;
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += 0.5 * h * (density[i] + density[i + 1]);
    if (!(total > 0.0))
        throw std::domain_error("sample_inverse_cdf: zero total mass");
    double target = u * total;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        double cellmass = 0.5 * h * (density[i] + density[i + 1]);
        if (acc + cellmass >= target || i == n - 1) {
            double rest = target - acc;
            double a = density[i], b = density[i + 1];
            // solve a*t + (b-a)*t^2/2 = rest/h for t in [0,1]
            double t;
            double slope = b - a;
            if (std::abs(slope) < 1e-14 * std::max(a, b)) {
                t = (a > 0) ? rest / (h * a) : 0.5;
            } else {
                double disc = a * a + 2.0 * slope * rest / h;
                t = (std::sqrt(std::max(0.0, disc)) - a) / slope;
            }
            if (t < 0) t = 0;
            if (t > 1) t = 1;
            return g.point(i) + t * h;
        }
        acc += cellmass;
    }
    return g.hi;
}

} // namespace excursus
