#include "excursus/densities.hpp"

#include <cmath>
#include <stdexcept>

namespace excursus {

namespace {

double binom(int n, int k) {
    double v = 1.0;
    for (int i = 1; i <= k; ++i) v = v * (n - k + i) / i;
    return std::round(v);
}

double gauss_kernel(double t, double d) {
    return std::exp(-d * d / (2.0 * t)) / std::sqrt(2.0 * M_PI * t);
}

} // namespace

ArrayXd stehfest_weights(int order) {
    if (order < 2 || order > 16 || order % 2 != 0)
        throw std::invalid_argument("stehfest_weights: order must be even, 2..16");
    int n2 = order / 2;
    double fact_n2 = std::tgamma(n2 + 1.0);
    ArrayXd zeta(order);
    for (int k = 1; k <= order; ++k) {
        double sum = 0.0;
        for (int j = (k + 1) / 2; j <= std::min(k, n2); ++j) {
            sum += std::pow(double(j), n2 + 1) / fact_n2 * binom(n2, j) *
                   binom(2 * j, j) * binom(j, k - j);
        }
        zeta[k - 1] = ((n2 + k) % 2 == 0 ? 1.0 : -1.0) * sum;
    }
    return zeta;
}

double stehfest_invert(const Real1D& laplace, double t, int order) {
    if (!(t > 0.0)) throw std::invalid_argument("stehfest_invert: t must be > 0");
    ArrayXd zeta = stehfest_weights(order);
    double ln2_t = M_LN2 / t;
    double sum = 0.0;
    for (int k = 1; k <= order; ++k) sum += zeta[k - 1] * laplace(k * ln2_t);
    return ln2_t * sum;
}

double stehfest_invert_checked(const Real1D& laplace, double t, double* rel_gap) {
    double v12 = stehfest_invert(laplace, t, 12);
    double v10 = stehfest_invert(laplace, t, 10);
    if (rel_gap) {
        double scale = std::max(std::abs(v12), 1e-300);
        *rel_gap = std::abs(v12 - v10) / scale;
    }
    return v12;
}

const EigenPair& LaplaceCache::at(double alpha) {
    auto it = cache_.find(alpha);
    if (it == cache_.end())
        it = cache_.emplace(alpha, solve_eigenfunctions(*spec_, alpha)).first;
    return it->second;
}

double first_passage_density(const DiffusionSpec& spec, double t, double x,
                             double y) {
    if (spec.brownian) {
        if (!(t > 0.0)) return 0.0;
        double delta = y - x;
        if (delta == 0.0) return 0.0;
        double mu = spec.brownian_mu;
        double f = std::abs(delta) / std::sqrt(2.0 * M_PI * t * t * t) *
                   std::exp(-(delta - mu * t) * (delta - mu * t) / (2.0 * t));
        if (spec.kill_is_const && spec.kill_const > 0.0)
            f *= std::exp(-spec.kill_const * t);
        return f;
    }
    LaplaceCache cache(spec);
    return first_passage_density(spec, cache, t, x, y);
}

double first_passage_density(const DiffusionSpec& spec, LaplaceCache& cache,
                             double t, double x, double y) {
    if (spec.brownian) return first_passage_density(spec, t, x, y);
    if (!(t > 0.0) || x == y) return 0.0;
    auto F = [&](double a) { return hitting_laplace(cache.at(a), x, y); };
    return std::max(0.0, stehfest_invert(F, t, 12));
}

double first_passage_prob(const DiffusionSpec& spec, double x, double y) {
    if (x == y) return 1.0;
    bool kill = spec.kill_tab.maxCoeff() > 0.0;
    if (!kill) {
        if (y >= x) return 1.0;
        try {
            RuinFunction r = ruin_function(spec);
            return r.passage_prob(x, y);
        } catch (const std::domain_error&) {
            // Scale diverges upward: every lower level is hit almost surely.
            return 1.0;
        }
    }
    EigenPair p = solve_eigenfunctions(spec, 1e-12);
    return hitting_laplace(p, x, y);
}

PassageDensity::PassageDensity(const DiffusionSpec& spec, double x, double y,
                               double t_max, int nt) {
    if (nt % 2) ++nt;
    tgrid_ = Grid(0.0, t_max, nt);
    int N = tgrid_.size();
    dens_.resize(N);
    dens_[0] = 0.0;
    if (spec.brownian) {
        for (int i = 1; i < N; ++i)
            dens_[i] = first_passage_density(spec, tgrid_.point(i), x, y);
    } else {
        LaplaceCache cache(spec);
        for (int i = 1; i < N; ++i)
            dens_[i] = std::max(
                0.0, first_passage_density(spec, cache, tgrid_.point(i), x, y));
    }
    cum_.resize(N);
    cum_[0] = 0.0;
    double h = tgrid_.h();
    for (int i = 1; i < N; ++i)
        cum_[i] = cum_[i - 1] + h / 2.0 * (dens_[i - 1] + dens_[i]);
}

double PassageDensity::density(double t) const {
    if (t <= 0.0 || t >= tgrid_.hi) return t == tgrid_.hi ? dens_[dens_.size() - 1] : 0.0;
    return linear_eval(tgrid_, dens_, t);
}

double PassageDensity::cdf(double t) const {
    if (t <= 0.0) return 0.0;
    if (t >= tgrid_.hi) return mass();
    int i = tgrid_.cell(t);
    double h = tgrid_.h();
    double fr = t - tgrid_.point(i);
    double slope = (dens_[i + 1] - dens_[i]) / h;
    return cum_[i] + dens_[i] * fr + 0.5 * slope * fr * fr;
}

double PassageDensity::sample(double u) const {
    return sample_inverse_cdf(tgrid_, dens_, u);
}

KilledKernel::KilledKernel(const DiffusionSpec& spec, double y, bool upper_side,
                           int sub_n, double dt_max)
    : spec_(&spec), y_(y), upper_(upper_side), dt_max_(dt_max) {
    if (!spec.window.contains(y))
        throw std::invalid_argument("KilledKernel: y outside window");
    closed_ = spec.brownian;
    mu_ = spec.brownian_mu;
    kill_ = spec.kill_is_const ? spec.kill_const : 0.0;
    double lo = upper_ ? y : spec.window.lo;
    double hi = upper_ ? spec.window.hi : y;
    if (!(hi > lo)) throw std::invalid_argument("KilledKernel: empty side");
    if (sub_n % 2) ++sub_n;
    sub_ = Grid(lo, hi, sub_n);
    if (!closed_) {
        int N = sub_.size();
        double h = sub_.h();
        ds_.resize(N - 1);
        dm_.resize(N);
        cvec_.resize(N);
        for (int j = 0; j + 1 < N; ++j)
            ds_[j] = spec.s(sub_.point(j + 1)) - spec.s(sub_.point(j));
        for (int j = 0; j < N; ++j) {
            double w = (j == 0 || j == N - 1) ? h / 2.0 : h;
            dm_[j] = w * spec.m_prime(sub_.point(j));
            cvec_[j] = spec.c(sub_.point(j));
        }
    }
}

double KilledKernel::image_density(double t, double z, double x) const {
    double direct = gauss_kernel(t, z - x);
    double mirror = gauss_kernel(t, (z - y_) + (x - y_));
    // e^{-mu(z+x) - mu^2 t/2}/2 (p_t(z-x) - p_t(z+x-2y)), written with
    // distances to y plus a constant factor to keep the exponent small.
    double q = std::exp(-mu_ * ((z - y_) + (x - y_)) - mu_ * mu_ * t / 2.0) *
               (direct - mirror) / 2.0;
    q *= std::exp(-2.0 * mu_ * y_);
    if (kill_ > 0.0) q *= std::exp(-kill_ * t);
    return std::max(0.0, q);
}

double KilledKernel::density(double t, double z, double x) const {
    bool z_in = upper_ ? z >= y_ : z <= y_;
    bool x_in = upper_ ? x >= y_ : x <= y_;
    if (!z_in || !x_in) return 0.0;
    if (closed_) return image_density(t, z, x);
    ArrayXd sl = slice(t, x);
    return linear_eval(sub_, sl, z);
}

ArrayXd KilledKernel::slice(double t, double x) const {
    int N = sub_.size();
    ArrayXd out(N);
    if (closed_) {
        for (int j = 0; j < N; ++j) out[j] = image_density(t, sub_.point(j), x);
        return out;
    }
    ArrayXd p = ArrayXd::Zero(N);
    int j = sub_.cell(x);
    double fr = (x - sub_.point(j)) / sub_.h();
    p[j] = (1.0 - fr) / dm_[j];
    p[j + 1] = fr / dm_[j + 1];
    return evolve(std::move(p), t);
}

ArrayXd KilledKernel::evolve(ArrayXd p, double t) const {
    int N = p.size();
    double dt = std::min(dt_max_, t / 50.0);
    int steps = std::max(1, int(std::ceil(t / dt - 1e-12)));
    dt = t / steps;

    ArrayXd lcoef = ArrayXd::Zero(N), ucoef = ArrayXd::Zero(N);
    for (int j = 1; j + 1 < N; ++j) {
        lcoef[j] = 1.0 / (ds_[j - 1] * dm_[j]);
        ucoef[j] = 1.0 / (ds_[j] * dm_[j]);
    }

    ArrayXd a(N), b(N), c(N), rhs(N), cp(N), dp(N);
    auto solve_tridiag = [&](double theta) {
        // (I - theta L) result = rhs with Dirichlet rows at both ends
        a[0] = 0.0;
        b[0] = 1.0;
        c[0] = 0.0;
        rhs[0] = 0.0;
        a[N - 1] = 0.0;
        b[N - 1] = 1.0;
        c[N - 1] = 0.0;
        rhs[N - 1] = 0.0;
        for (int j = 1; j + 1 < N; ++j) {
            a[j] = -theta * lcoef[j];
            c[j] = -theta * ucoef[j];
            b[j] = 1.0 + theta * (lcoef[j] + ucoef[j] + cvec_[j]);
        }
        cp[0] = c[0] / b[0];
        dp[0] = rhs[0] / b[0];
        for (int j = 1; j < N; ++j) {
            double m = b[j] - a[j] * cp[j - 1];
            cp[j] = c[j] / m;
            dp[j] = (rhs[j] - a[j] * dp[j - 1]) / m;
        }
        p[N - 1] = dp[N - 1];
        for (int j = N - 2; j >= 0; --j) p[j] = dp[j] - cp[j] * p[j + 1];
    };
    auto apply_L = [&](int j) {
        return lcoef[j] * p[j - 1] - (lcoef[j] + ucoef[j] + cvec_[j]) * p[j] +
               ucoef[j] * p[j + 1];
    };

    // Damped (implicit Euler) start smooths the delta data, then CN.
    int damped = steps >= 3 ? 2 : steps;
    for (int s = 0; s < damped; ++s) {
        for (int half = 0; half < 2; ++half) {
            rhs = p;
            solve_tridiag(dt / 2.0);
        }
    }
    for (int s = damped; s < steps; ++s) {
        rhs[0] = 0.0;
        rhs[N - 1] = 0.0;
        for (int j = 1; j + 1 < N; ++j) rhs[j] = p[j] + dt / 2.0 * apply_L(j);
        solve_tridiag(dt / 2.0);
    }
    return p;
}

double killed_resolvent_density(const EigenPair& pair, double y, double x,
                                double z) {
    if ((x - y) * (z - y) < 0.0) return 0.0;
    double mn = std::min(x, z), mx = std::max(x, z);
    double l1y = pair.log_g1_at(y), l2y = pair.log_g2_at(y);
    if (mn >= y) {
        double l1mn = pair.log_g1_at(mn), l2mn = pair.log_g2_at(mn);
        double base = std::exp(l1mn + pair.log_g2_at(mx)) / pair.wronskian;
        double corr = 1.0 - std::exp((l1y - l2y) - (l1mn - l2mn));
        return base * std::max(0.0, corr);
    }
    double l1mx = pair.log_g1_at(mx), l2mx = pair.log_g2_at(mx);
    double base = std::exp(pair.log_g1_at(mn) + l2mx) / pair.wronskian;
    double corr = 1.0 - std::exp((l2y - l1y) - (l2mx - l1mx));
    return base * std::max(0.0, corr);
}

double entrance_density(const DiffusionSpec& spec, double y, double t,
                        double x) {
    return first_passage_density(spec, t, x, y);
}

double entrance_density_propagated(const DiffusionSpec& spec,
                                   LaplaceCache& cache,
                                   const KilledKernel& kernel, double y,
                                   double t, double x) {
    const Grid& g = kernel.domain();
    int N = g.size();
    double half = t / 2.0;
    ArrayXd sl = kernel.slice(half, x);
    ArrayXd integrand(N);
    for (int j = 0; j < N; ++j) {
        double z = g.point(j);
        double f = spec.brownian
                       ? first_passage_density(spec, half, z, y)
                       : first_passage_density(spec, cache, half, z, y);
        integrand[j] = f * sl[j] * spec.m_prime(z);
    }
    return simpson(g, integrand);
}

double sample_inverse_gaussian(Rng& rng, double mean, double shape) {
    if (!(mean > 0.0) || !(shape > 0.0))
        throw std::invalid_argument("sample_inverse_gaussian: bad parameters");
    double nu = rng.normal();
    double w = nu * nu;
    double x = mean + mean * mean * w / (2.0 * shape) -
               mean / (2.0 * shape) *
                   std::sqrt(4.0 * mean * shape * w + mean * mean * w * w);
    if (rng.uniform() <= mean / (mean + x)) return x;
    return mean * mean / x;
}

} // namespace excursus
