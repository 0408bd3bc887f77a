#pragma once

#include "excursus/eigenfunctions.hpp"
#include "excursus/rng.hpp"

#include <map>

namespace excursus {

// Gaver-Stehfest inversion of a Laplace transform at t > 0.
ArrayXd stehfest_weights(int order);
double stehfest_invert(const Real1D& laplace, double t, int order = 12);
// Order 12 value plus the relative gap to the order 10 value.
double stehfest_invert_checked(const Real1D& laplace, double t,
                               double* rel_gap = nullptr);

// Eigen solves keyed by alpha, so transform inversions over a shared t reuse
// them across evaluation points.
class LaplaceCache {
public:
    explicit LaplaceCache(const DiffusionSpec& spec) : spec_(&spec) {}
    const EigenPair& at(double alpha);
    std::size_t size() const { return cache_.size(); }

private:
    const DiffusionSpec* spec_;
    std::map<double, EigenPair> cache_;
};

// Density in t of the first hitting time T_y under P^x (x != y). Closed form
// for the Brownian presets, Gaver-Stehfest on the hitting transform otherwise.
double first_passage_density(const DiffusionSpec& spec, double t, double x,
                             double y);
double first_passage_density(const DiffusionSpec& spec, LaplaceCache& cache,
                             double t, double x, double y);

// P^x(T_y < inf) for y <= x (via the ruin function when drifting up), 1 for
// y >= x without killing.
double first_passage_prob(const DiffusionSpec& spec, double x, double y);

// Tabulated first-passage law on [0, t_max] for inverse-cdf sampling.
class PassageDensity {
public:
    PassageDensity(const DiffusionSpec& spec, double x, double y, double t_max,
                   int nt = 2000);
    const Grid& tgrid() const { return tgrid_; }
    double density(double t) const;
    double cdf(double t) const;
    double mass() const { return cum_[cum_.size() - 1]; }
    // Inverse cdf of the law conditioned on {T_y <= t_max}.
    double sample(double u) const;

private:
    Grid tgrid_;
    ArrayXd dens_;
    ArrayXd cum_;
};

// Transition m-density q^y_t(z, x) of the diffusion killed at its first visit
// to y, on one side of y. Image formula for the Brownian presets; implicit
// finite-volume stepping (Crank-Nicolson with a damped start) otherwise.
class KilledKernel {
public:
    KilledKernel(const DiffusionSpec& spec, double y, bool upper_side,
                 int sub_n = 1200, double dt_max = 1e-3);
    const Grid& domain() const { return sub_; }
    bool closed_form() const { return closed_; }
    double density(double t, double z, double x) const;
    // density(t, z_j, x) over all domain nodes z_j
    ArrayXd slice(double t, double x) const;

private:
    const DiffusionSpec* spec_;
    double y_;
    bool upper_;
    bool closed_;
    double mu_ = 0.0;
    double kill_ = 0.0;
    double dt_max_;
    Grid sub_;
    ArrayXd ds_;   // s(z_{j+1}) - s(z_j)
    ArrayXd dm_;   // m mass attached to node j
    ArrayXd cvec_; // kill rate at nodes

    ArrayXd evolve(ArrayXd p, double t) const;
    double image_density(double t, double z, double x) const;
};

// alpha-resolvent m-density of the process killed at y, both arguments on the
// same side of y.
double killed_resolvent_density(const EigenPair& pair, double y, double x,
                                double z);

// Entrance law density (w.r.t. m) of the excursion measure above level y:
// the direct route equals the first-passage density from x down to y.
double entrance_density(const DiffusionSpec& spec, double y, double t, double x);
// Independent route: propagate the time-t/2 entrance law with the killed
// kernel over half the time.
double entrance_density_propagated(const DiffusionSpec& spec,
                                   LaplaceCache& cache,
                                   const KilledKernel& kernel, double y,
                                   double t, double x);

// Michael-Schucany-Haas exact inverse-Gaussian sampler (mean, shape).
double sample_inverse_gaussian(Rng& rng, double mean, double shape);

} // namespace excursus
