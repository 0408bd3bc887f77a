#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "excursus/densities.hpp"
#include "excursus/pathsim.hpp"

namespace excursus {

// One mark of the excursion point process in the level variable: an
// excursion above level y with duration beyond eps, or the final escaping
// excursion. The recorded path starts at excursion age eps (the entrance
// draw), so the total duration is eps + excursion.lifetime; for an escaped
// mark the path is the conditioned ascent cut at a finite horizon.
struct LevelPoint {
    double y = 0.0;
    Path excursion;
    bool escaped = false;
};

struct ExcursionProcessOptions {
    double dt = 1e-3;
    double escape_horizon = 5.0; // length of the recorded escape path
    double time_cap = 400.0;     // continuation give-up; such draws retry
    double y_min = std::numeric_limits<double>::quiet_NaN();
    int entrance_n = 400;        // entrance-law tabulation nodes
};

// Levels descend from x as a Poisson process with intensity
// Lambda_eps(y) ds(y), Lambda_eps(y) = n_up_y(zeta > eps) = int f(eps;z,y)
// m(dz); an accepted level escapes with probability (-r+/r)/Lambda_eps and
// the process stops there. Non-escaped marks draw an entrance state from
// f(eps;.,y) m and continue as the plain diffusion absorbed at y,
// rejection-resampled if the continuation strays out of the window or past
// the time cap. A realization that reaches the window floor (probability
// r(x)/r(window lo)) or the y_min floor is returned without an escaped mark.
// Killing is not supported: a killed excursion can escape without ever
// becoming eps-observable, which this single-stream construction cannot
// represent.
std::vector<LevelPoint> sample_excursion_process(
    const DiffusionSpec& spec, const RuinFunction& ruin, double x, double eps,
    Rng& rng, const ExcursionProcessOptions& opt = {});
// Builds the ruin function; a spec that is not upward transient needs a
// finite opt.y_min instead and generates no escape marks.
std::vector<LevelPoint> sample_excursion_process(
    const DiffusionSpec& spec, double x, double eps, Rng& rng,
    const ExcursionProcessOptions& opt = {});

enum class LevyZ {
    exp_decay,      // Z_u = e^{-u}
    before_horizon, // Z_u = 1{u < z_horizon}
};

enum class LevyF {
    duration,         // 1{zeta > eps}
    laplace_duration, // e^{-alpha zeta} 1{zeta > eps}
    height,           // 1{sup - y > h}
    zero,             // degenerate sanity choice
};

struct LevyOptions {
    double dt = 1e-3;
    double horizon = 16.0; // simulated length under exp_decay
    double z_horizon = 1.0;
    double alpha = 1.0;
    double h = 0.5;
    int threads = 0; // 0: EXCURSUS_THREADS, then hardware
};

struct LevyReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double se_lhs = 0.0;
    double se_rhs = 0.0; // 0: rhs evaluated by quadrature
    double z_score = 0.0;
    long n = 0;
    std::string note;

    bool pass(double z_limit = 3.0) const;
    std::string describe() const;
};

// Both sides of P^x sum_{u in G} Z_u F(e^u) = P^x int Z_{T_y} 1{T_y < inf}
// n_up_y(F) ds(y). The left side streams skeleton paths with exact per-step
// bridge refinements (minimum, argmin, first crossing), so excursion starts,
// levels and durations carry no dt bias for the Brownian presets; the right
// side is quadrature over levels. Per-path sums are reduced in index order,
// so the result does not depend on the thread count.
LevyReport verify_levy_system(const DiffusionSpec& spec, double x, LevyZ Z,
                              LevyF F, double eps, long n_paths,
                              std::uint64_t seed, const LevyOptions& opt = {});

} // namespace excursus
