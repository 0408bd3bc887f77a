#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>

namespace excursus {

using Eigen::ArrayXd;
using Real1D = std::function<double(double)>;

// Uniform tabulation grid on [lo, hi] with n cells (n+1 nodes), n even so
// composite Simpson applies directly.
struct Grid {
    double lo = 0.0;
    double hi = 1.0;
    int n = 2000;

    Grid() = default;
    Grid(double lo_, double hi_, int n_);

    double h() const { return (hi - lo) / n; }
    int size() const { return n + 1; }
    double point(int i) const { return lo + i * h(); }
    ArrayXd points() const;
    bool contains(double x) const { return x >= lo && x <= hi; }

    // Largest i with point(i) <= x, clamped to [0, n-1].
    int cell(double x) const;

    ArrayXd map(const Real1D& f) const;
};

// Composite Simpson weights for the grid nodes (dx included).
ArrayXd simpson_weights(const Grid& g);

double simpson(const Grid& g, const ArrayXd& values);

// Cumulative integral of tabulated values from lo to each node
// (Simpson on node pairs, with a parabolic half-cell rule for odd prefixes).
ArrayXd cumulative_integral(const Grid& g, const ArrayXd& values);

// Adaptive Simpson for one-off integrals; depth-limited, absolute+relative tol.
double integrate(const Real1D& f, double a, double b,
                 double tol = 1e-10, int max_depth = 24);

struct TailIntegral {
    double value = 0.0;
    bool converged = false;
};

// Integral of f over [a, +inf) or (-inf, a] (direction from the sign of
// `toward`), by doubling windows until the increment falls below tol or the
// sum exceeds `divergence_cap`.
TailIntegral improper_integral(const Real1D& f, double a, double toward,
                               double tol = 1e-10,
                               double divergence_cap = 1e12);

// Integral over [a, b] where b may touch a singular endpoint: geometric
// refinement toward b. Reports divergence via converged=false.
TailIntegral endpoint_integral(const Real1D& f, double a, double b,
                               double tol = 1e-10,
                               double divergence_cap = 1e12);

// Cubic Hermite evaluation of (values, derivs) tabulated on g; clamps x to
// the grid. `hermite_deriv` is the derivative of that interpolant.
double hermite_eval(const Grid& g, const ArrayXd& values, const ArrayXd& derivs,
                    double x);
double hermite_deriv(const Grid& g, const ArrayXd& values, const ArrayXd& derivs,
                     double x);

// Piecewise-linear evaluation of node values on g; clamps x to the grid.
double linear_eval(const Grid& g, const ArrayXd& values, double x);

// Tabulated scalar function with value and derivative at each node; evaluates
// off-node by cubic Hermite interpolation (keeps the tabulation's O(h^4)).
struct TabulatedFunction {
    Grid grid;
    ArrayXd values;
    ArrayXd derivs;

    double operator()(double x) const;
    double derivative(double x) const;
};

// Inverse of a strictly monotone tabulated function by bisection on nodes plus
// Hermite refinement within the bracketing cell.
double invert_monotone(const TabulatedFunction& f, double target);

// Piecewise-linear inverse CDF sampling support over grid cells.
// `density` holds nonnegative node values of an (unnormalized) density with
// respect to dx; returns x with cumulative trapezoid mass u * total.
double sample_inverse_cdf(const Grid& g, const ArrayXd& density, double u);

} // namespace excursus
