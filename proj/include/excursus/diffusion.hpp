#pragma once

#include "excursus/grid.hpp"

#include <limits>
#include <optional>
#include <string>

namespace excursus {

// State interval ]A, B[ plus endpoint membership. An endpoint marked
// absorbing belongs to the state space as a trap.
struct Interval {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    bool lower_absorbing = false;
    bool upper_absorbing = false;
};

enum class BoundaryClass { natural, entrance, exit, regular_absorbing, regular };

const char* to_string(BoundaryClass c);

// Feller test integrals for one endpoint. `time_integral` is
// int [M(x)-M(p)] ds(x), `entrance_integral` is int [s(x)-s(p)] dm(x),
// both taken from an interior anchor p toward the endpoint.
struct BoundaryReport {
    BoundaryClass cls = BoundaryClass::natural;
    double time_integral = 0.0;
    bool time_finite = false;
    double entrance_integral = 0.0;
    bool entrance_finite = false;
};

// One-dimensional regular diffusion in natural scale/speed form:
// generator G u = d/dm (du/ds) - u dk/dm, with k(dx) = c(x) m(dx).
// Conventions follow the standard normalization in which standard Brownian
// motion has s(x) = x and m(dx) = 2 dx.
struct DiffusionSpec {
    Interval interval;

    // SDE-form coefficients dX = b dt + sigma dW, killed at rate c.
    Real1D drift;
    Real1D sigma;
    Real1D kill;

    // Scale/speed data; s is anchored so s(x0) = 0.
    Real1D scale;        // s
    Real1D scale_deriv;  // s'
    Real1D speed_density; // m' (w.r.t. Lebesgue)

    // Working window: tabulation domain, strictly inside ]A,B[ unless an
    // endpoint is a member of the state space.
    Grid window;
    double x0 = 0.0; // normalization anchor for eigenfunctions / ruin

    // Tabulations on the window (filled by build_*).
    ArrayXd s_tab, s_deriv_tab, m_density_tab, kill_tab;

    // Closed-form fast path: Brownian motion with constant drift/kill.
    bool brownian = false;
    double brownian_mu = 0.0;
    double kill_const = 0.0;
    bool kill_is_const = true;

    std::string name = "custom";

    double s(double x) const { return scale(x); }
    double s_prime(double x) const { return scale_deriv(x); }
    double m_prime(double x) const { return speed_density(x); }
    double b(double x) const { return drift(x); }
    double sig(double x) const { return sigma(x); }
    double c(double x) const { return kill(x); }
};

// Build from SDE coefficients; s' = exp(-int 2b/sigma^2), m' = 2/(sigma^2 s'),
// both anchored at the window midpoint unless x0 is given.
DiffusionSpec build_spec_sde(Real1D b, Real1D sigma, Real1D kill,
                             Interval interval, Grid window,
                             std::optional<double> x0 = std::nullopt);

// Build from scale derivative and speed density; b is recovered from
// (log s')' with a fourth-order stencil, sigma^2 = 2/(s' m').
DiffusionSpec build_spec_scale_speed(Real1D s_prime, Real1D m_prime,
                                     Real1D kill, Interval interval,
                                     Grid window,
                                     std::optional<double> x0 = std::nullopt);

// Both forms given: builds from the SDE form and rejects if the scale/speed
// form disagrees beyond `tol` in relative sup norm on the window.
DiffusionSpec build_spec_checked(Real1D b, Real1D sigma, Real1D s_prime,
                                 Real1D m_prime, Real1D kill,
                                 Interval interval, Grid window,
                                 double tol = 1e-8);

// Presets.
DiffusionSpec make_brownian(double window_lo = -8.0, double window_hi = 8.0,
                            int grid_n = 2000, double kill_rate = 0.0);
DiffusionSpec make_brownian_drift(double mu, double window_lo = -8.0,
                                  double window_hi = 8.0, int grid_n = 2000,
                                  double kill_rate = 0.0);
DiffusionSpec make_bessel3(double window_lo = 1e-3, double window_hi = 12.0,
                           int grid_n = 2000);

// "brownian", "bm-drift:mu=0.5", "bessel3", optionally with ",kill=0.25",
// ",window=-6:6", ",grid=4000"; otherwise treated as a path to a flat
// key-value spec file (keys: kind, mu, window_lo, window_hi, grid_n,
// kill_rate_expr).
DiffusionSpec parse_spec(const std::string& text);
DiffusionSpec load_spec_file(const std::string& path);

// Feller boundary classification for one endpoint (lower=false means upper).
// Declared-absorbing endpoints report regular_absorbing.
BoundaryReport classify_boundary(const DiffusionSpec& spec, bool lower);

// Scope guard: lower endpoint not attainable-or-reflecting in a way the
// excursion machinery cannot handle, upper endpoint regular-non-trap or
// not in the state space.
bool assumptions_hold(const DiffusionSpec& spec, std::string* why = nullptr);

} // namespace excursus
