#pragma once

#include "excursus/densities.hpp"
#include "excursus/pathsim.hpp"
#include "excursus/stats.hpp"

#include <string>
#include <utility>
#include <vector>

namespace excursus {

// Split of an upward-transient path at its global minimum gamma, attained at
// rho: pre runs from the start down to gamma (the process conditioned to hit
// it), post climbs away and never returns. full splices them at the
// absorption sample, so sample j > pre.steps() sits at the off-grid time
// rho + (j - pre.steps()) * dt.
struct WilliamsSample {
    double gamma = 0.0;
    double rho = 0.0;
    Path pre;
    Path post;
    Path full;
};

// Bridge of the process above the floor y with pinned lifetime ell.
//   hat:      entrance at y, ends at endpoint (> y) at time ell.
//   reversed: starts at endpoint (> y), ends at y at time ell.
struct BridgeLaw {
    enum class Kind { hat, reversed };
    Kind kind = Kind::hat;
    double y = 0.0;
    double ell = 1.0;
    double endpoint = 1.0;
};

struct WilliamsOptions {
    double dt = 1e-3;
    double post_horizon = 10.0;
    double time_cap = 400.0;      // pre part gives up past this time
    double entrance_offset = 0.0; // 0 means one window grid step
};

// (gamma, rho): the global minimum and the time it is attained. gamma by
// inverse-cdf of P^x(gamma <= y) = r(x)/r(y) (bisection on log r), rho given
// gamma by inverse-cdf on the tabulated first-passage law down to gamma.
std::pair<double, double> sample_minimum(const DiffusionSpec& spec,
                                         const RuinFunction& ruin, double x,
                                         Rng& rng);
std::pair<double, double> sample_minimum(const DiffusionSpec& spec, double x,
                                         Rng& rng);

// The process started at x conditioned to hit y < x, absorbed there. Euler
// steps with the h-drift b + sigma^2 (log r)', a per-step bridge crossing
// test against y, and an exact within-step crossing-time draw; the final
// sample equals y. The conditioning removes killing.
Path sample_conditioned_down(const DiffusionSpec& spec,
                             const RuinFunction& ruin, double x, double y,
                             double dt, Rng& rng, double time_cap = 400.0);

// The process entered at y and conditioned never to return: h-drift
// b + sigma^2 (log r_y)' with r_y = 1 - r/r(y). The entrance is regularized
// by starting at y + delta; sub-floor proposals reflect, and the drift move
// per step is capped at one diffusive standard deviation, which smooths the
// 1/(z - y) singularity at the floor. Killing survives at rate c/r_y.
Path sample_conditioned_up(const DiffusionSpec& spec, const RuinFunction& ruin,
                           double y, double horizon, double dt, Rng& rng,
                           double entrance_offset = 0.0);

// Path split at the overall minimum: draw gamma, run the conditioned descent
// to it, then the conditioned ascent for post_horizon. Descents truncated by
// the window or the time cap are resampled with the same gamma; after 64
// failures this throws.
WilliamsSample williams_sample(const DiffusionSpec& spec,
                               const RuinFunction& ruin, double x, Rng& rng,
                               const WilliamsOptions& opt = {});
WilliamsSample williams_sample(const DiffusionSpec& spec, double x, Rng& rng,
                               const WilliamsOptions& opt = {});

// Density of (H_t, rho_t, X_t) at (y, u, x) w.r.t. ds(y) du m(dx):
// f(u; b, y) f(t-u; x, y). Zero when y >= min(b, x) or u outside ]0, t[.
double minimum_joint_density(const DiffusionSpec& spec, double b, double t,
                             double u, double y, double x);
double minimum_joint_density(const DiffusionSpec& spec, LaplaceCache& cache,
                             double b, double t, double u, double y, double x);

// Markov-chain bridge sampler on the killed kernel's node grid. Transition
// rows are q^y(dt; z, w) times the exact tail toward the far endpoint
// (q^y for the hat kind, the passage density for the reversed kind),
// normalized numerically per step; both endpoints are pinned exactly.
// Build once, sample many.
class BridgeSampler {
public:
    BridgeSampler(const DiffusionSpec& spec, const BridgeLaw& law, double dt,
                  int sub_n = 600);
    const BridgeLaw& law() const { return law_; }
    double step() const { return dt_; }
    int steps() const { return n_; }
    Path sample(Rng& rng) const;

private:
    const DiffusionSpec* spec_;
    BridgeLaw law_;
    double dt_ = 0.0; // ell / n, so the grid lands on ell exactly
    int n_ = 0;
    KilledKernel kernel_;
    ArrayXd nodes_; // kernel domain nodes strictly above y
    double h_ = 0.0;
    ArrayXd dm_;                // trapezoid m weights at nodes_
    Eigen::MatrixXd trans_;     // q^y(dt; node_i, node_j)
    std::vector<ArrayXd> tail_; // tail factor at t_k, k = 1..n-1
    ArrayXd first_row_;         // cumulative weights into the k = 1 state
    double jitter_lo_ = 0.0, jitter_hi_ = 0.0;

    int draw_from(const ArrayXd& cum, Rng& rng) const;
};

Path sample_bridge(const DiffusionSpec& spec, const BridgeLaw& law, double dt,
                   Rng& rng);

struct LocalDecompOptions {
    double dt = 1e-3;
    int pilot = 4000;            // edge-calibration draws, excluded from tests
    int conditional_paths = 20000;
    int conditional_target = 900; // in-bin fragments to collect
    int kernel_n = 400;
};

struct LocalDecompReport {
    std::vector<GofReport> checks;
    int cells = 0;
    int cells_pooled = 0;    // expected count below 5, merged into one cell
    int conditional_bin = 0; // fragments collected in the conditioning bin
    std::vector<std::string> notes;

    bool pass(double level = 0.01) const;
    std::string describe() const;
};

// Verifies the pre-t minimum decomposition: (i) chi-square of the exact
// (H_t, rho_t, X_t) triple histogram against the product density on a
// 4x4x4 partition with pilot-calibrated edges, (ii) marginal laws of H_t
// (and rho_t when closed forms exist), (iii) two-sample KS of in-bin path
// fragments at rho/2 and (t+rho)/2 against the bridge marginals. Requires a
// spec with closed-form passage densities (the Brownian presets).
LocalDecompReport verify_local_decomposition(const DiffusionSpec& spec,
                                             double b, double t, int N,
                                             Rng& rng,
                                             const LocalDecompOptions& opt = {});

} // namespace excursus
