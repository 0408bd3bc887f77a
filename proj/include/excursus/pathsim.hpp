#pragma once

#include <vector>

#include "excursus/diffusion.hpp"
#include "excursus/rng.hpp"

namespace excursus {

// One simulated trajectory on a uniform time grid. The final entry sits at
// `lifetime`, which is off-grid when absorption or killing ends the path
// mid-step; entries never extend past `lifetime`.
struct Path {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<double> values;
    double lifetime = 0.0;
    bool absorbed = false;
    bool killed = false;
    bool left_window = false;

    int steps() const { return static_cast<int>(values.size()) - 1; }
    double time_at(int i) const {
        double t = t0 + i * dt;
        return t < lifetime ? t : lifetime;
    }
    // Linear interpolation between samples; clamped to [t0, lifetime].
    double value_at(double t) const;
};

// Running minimum H, its earliest attainment time rho, and the additive
// functional C_t = s(H_0) - s(H_t).
struct MinFunctional {
    std::vector<double> H;
    std::vector<double> C;
    int rho_index = 0;
    double rho = 0.0;
};

// One excursion above the running minimum: starts at time u from level
// `level`, lasts `duration`. The fragment keeps the samples from u through
// the first return (its closing sample is the return point when the path
// returns, the last available sample otherwise).
struct ExcursionRecord {
    double u = 0.0;
    double level = 0.0;
    double duration = 0.0;
    Path fragment;
};

// Euler-Maruyama stepping (exact Gaussian increments for the Brownian
// presets), exponential-clock killing, absorption at declared absorbing
// interval endpoints with a Brownian-bridge crossing test per step, and
// truncation with a flag if the path leaves the working window.
Path sample_path(const DiffusionSpec& spec, double x0, double dt,
                 double horizon, Rng& rng);

// Ties in the minimum resolve to the earliest index. The spec supplies the
// scale function for C.
MinFunctional running_minimum(const DiffusionSpec& spec, const Path& path);

// Excursion intervals are the maximal gaps between exact returns of the path
// to its running minimum; records shorter than min_duration are dropped.
// Requires min_duration >= path.dt. A trailing excursion still open at the
// end of the path is kept, with its duration measured to the lifetime.
std::vector<ExcursionRecord> extract_excursions(const Path& path,
                                                double min_duration);

// Exact conditional draws for the within-step behavior of one Brownian step,
// given endpoint values. `var` is sigma^2 * dt. Heights are measured from
// the reference level of interest (so `a`, `b` are endpoint offsets).

// P(bridge min < 0 | endpoints a, b above 0).
double bridge_cross_prob(double a, double b, double var);
// Minimum of the step, below both endpoints.
double bridge_min_sample(double x0, double x1, double var, Rng& rng);
// Minimum conditioned to fall below `cap` (cap <= min(x0, x1)).
double bridge_min_sample_below(double x0, double x1, double var, double cap,
                               Rng& rng);
double bridge_max_sample(double x0, double x1, double var, Rng& rng);
// Time in (0, dt) at which the step attains its minimum m, given endpoints.
double bridge_argmin_sample(double x0, double x1, double m, double dt,
                            double sigma2, Rng& rng);
// First time in (0, dt) the step crosses 0, given a > 0 at the left endpoint
// and that the crossing happens (b may have either sign).
double bridge_first_cross_sample(double a, double b, double dt, double sigma2,
                                 Rng& rng);

// Terminal triple (H_T, rho_T, X_T). For the Brownian presets the minimum
// and its location are exact in law: per-step bridge minima plus a final
// within-step argmin split. Other specs get the same construction on top of
// Euler steps.
struct MinTriple {
    double minimum = 0.0;
    double argmin = 0.0;
    double endpoint = 0.0;
};

MinTriple sample_min_triple(const DiffusionSpec& spec, double x0, double dt,
                            double horizon, Rng& rng);

} // namespace excursus
