#pragma once

#include "excursus/diffusion.hpp"

namespace excursus {

// Solutions of G g = alpha g: g1 increasing (condition at the lower end),
// g2 decreasing (condition at the upper end), both normalized to 1 at the
// spec anchor x0. Stored in log space with the scale log-derivative
// w = (dg/ds)/g, so ratios and the Wronskian evaluate without overflow.
struct EigenPair {
    double alpha = 0.0;
    Grid grid;
    ArrayXd log_g1, log_g2; // anchored: log g(x0) = 0
    ArrayXd dlog_g1, dlog_g2; // d/dx of the logs (= w * s'), Hermite slopes
    ArrayXd w1, w2;         // (dg/ds)/g at nodes
    double wronskian = 0.0; // g1+ g2 - g2+ g1, constant in exact arithmetic
    ArrayXd wronskian_tab;  // node diagnostic (interior nodes)
    bool lower_dirichlet = false;
    bool upper_dirichlet = false;
    // scale tabulation copied from the spec; edge cells of a Dirichlet side
    // interpolate g linearly in s, where log g has a pole
    ArrayXd s_vals, s_derivs;

    double log_g1_at(double x) const;
    double log_g2_at(double x) const;
    double g1(double x) const { return std::exp(log_g1_at(x)); }
    double g2(double x) const { return std::exp(log_g2_at(x)); }
    double w1_at(double x) const;
    double w2_at(double x) const;
    double g1_plus(double x) const { return w1_at(x) * g1(x); }
    double g2_plus(double x) const { return w2_at(x) * g2(x); }

    double wronskian_deviation() const; // max relative spread of the tab
};

EigenPair solve_eigenfunctions(const DiffusionSpec& spec, double alpha);

// Resolvent density u^alpha(x,y) w.r.t. m: g1(x and y ordered)/W.
double resolvent_density(const EigenPair& pair, double x, double y);

// U^alpha f at every grid node by splitting the kernel at x and integrating
// the two wings with cumulative Simpson.
ArrayXd resolvent_apply(const DiffusionSpec& spec, const EigenPair& pair,
                        const Real1D& f);

// P^x e^{-alpha T_y}: g1(x)/g1(y) below, g2(x)/g2(y) above.
double hitting_laplace(const DiffusionSpec& spec, double x, double y,
                       double alpha);
double hitting_laplace(const EigenPair& pair, double x, double y);

// W^alpha f(y): the alpha-potential of the excursion entrance law at level y.
double excursion_resolvent(const DiffusionSpec& spec, const EigenPair& pair,
                           const Real1D& f, double y);

// Positive decreasing solution of G r = 0 with r(x0) = 1; exists (non-
// constant) iff the diffusion is upward transient. P^x(T_y < inf) = r(x)/r(y)
// for y <= x.
struct RuinFunction {
    Grid grid;
    ArrayXd log_r;
    ArrayXd dlog_r; // d/dx log r
    ArrayXd w;      // (dr/ds)/r
    ArrayXd s_vals, s_derivs;
    bool exact_route = false; // no killing: r = (s(B) - s(x)) / (s(B) - s(x0))
    double s_total = 0.0;     // s(B) in the spec's scale normalization
    double s_tail = 0.0;      // s(B) - s(window hi)
    double log_r0 = 0.0;      // log(s(B) - s(x0)), exact route normalizer

    double log_r_at(double x) const;
    double r(double x) const { return std::exp(log_r_at(x)); }
    double w_at(double x) const;
    double r_plus(double x) const { return w_at(x) * r(x); }
    // P^x(T_y < inf) for y <= x
    double passage_prob(double x, double y) const {
        return std::exp(log_r_at(x) - log_r_at(y));
    }
};

RuinFunction ruin_function(const DiffusionSpec& spec);

// n_up_y(never returns) = -r+(y)/r(y), the escape intensity per unit scale.
double escape_rate(const RuinFunction& r, double y);

} // namespace excursus
