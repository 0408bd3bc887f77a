#include "excursus/stats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace excursus {

double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {

double gamma_series(double a, double x) {
    double sum = 1.0 / a, term = sum, ap = a;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, f = d;
    for (int i = 1; i < 500; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double delta = d * c;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * f;
}

} // namespace

double gammq(double a, double x) {
    if (x < 0.0 || a <= 0.0)
        throw std::invalid_argument("gammq: requires x >= 0, a > 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_series(a, x);
    return gamma_cf(a, x);
}

double kolmogorov_sf(double lambda) {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 1.18) {
        // Jacobi theta form, rapidly convergent for small arguments.
        double t = std::exp(-M_PI * M_PI / (8.0 * lambda * lambda));
        double cdf = std::sqrt(2.0 * M_PI) / lambda *
                     (t + std::pow(t, 9.0) + std::pow(t, 25.0) + std::pow(t, 49.0));
        return 1.0 - cdf;
    }
    double sum = 0.0, sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        if (term < 1e-16) break;
        sign = -sign;
    }
    return std::max(0.0, 2.0 * sum);
}

std::string GofReport::describe() const {
    std::ostringstream os;
    os << name << ": stat=" << statistic << " p=" << p_value
       << " n=" << n_effective;
    return os.str();
}

GofReport ks_test(std::vector<double> sample, const Real1D& cdf,
                  const std::string& name) {
    if (sample.empty()) throw std::invalid_argument("ks_test: empty sample");
    std::sort(sample.begin(), sample.end());
    std::size_t n = sample.size();
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double F = cdf(sample[i]);
        d = std::max(d, std::abs(F - double(i) / n));
        d = std::max(d, std::abs(double(i + 1) / n - F));
    }
    GofReport rep;
    rep.name = name;
    rep.statistic = d;
    rep.n_effective = double(n);
    rep.p_value = kolmogorov_sf(std::sqrt(double(n)) * d);
    return rep;
}

GofReport ks2_test(std::vector<double> a, std::vector<double> b,
                   const std::string& name) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("ks2_test: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    GofReport rep;
    rep.name = name;
    rep.statistic = d;
    double ne = double(a.size()) * b.size() / double(a.size() + b.size());
    rep.n_effective = ne;
    rep.p_value = kolmogorov_sf(std::sqrt(ne) * d);
    return rep;
}

GofReport chi2_test(const std::vector<double>& observed,
                    const std::vector<double>& expected, int dof_reduction,
                    const std::string& name) {
    if (observed.size() != expected.size() || observed.empty())
        throw std::invalid_argument("chi2_test: size mismatch");
    double stat = 0.0, n = 0.0;
    for (std::size_t k = 0; k < observed.size(); ++k) {
        if (expected[k] <= 0.0)
            throw std::invalid_argument("chi2_test: nonpositive expected count");
        double diff = observed[k] - expected[k];
        stat += diff * diff / expected[k];
        n += observed[k];
    }
    int dof = int(observed.size()) - 1 - dof_reduction;
    if (dof < 1) throw std::invalid_argument("chi2_test: dof < 1");
    GofReport rep;
    rep.name = name;
    rep.statistic = stat;
    rep.n_effective = n;
    rep.p_value = gammq(dof / 2.0, stat / 2.0);
    return rep;
}

void EmpiricalLaw::add(double x, double weight) {
    if (weight < 0.0) throw std::invalid_argument("EmpiricalLaw: negative weight");
    points_.emplace_back(x, weight);
    sorted_ = false;
    sum_w_ += weight;
    sum_w2_ += weight * weight;
    sum_wx_ += weight * x;
    sum_wx2_ += weight * x * x;
}

double EmpiricalLaw::effective_n() const {
    return sum_w2_ > 0.0 ? sum_w_ * sum_w_ / sum_w2_ : 0.0;
}

double EmpiricalLaw::mean() const {
    if (sum_w_ <= 0.0) throw std::logic_error("EmpiricalLaw: no mass");
    return sum_wx_ / sum_w_;
}

double EmpiricalLaw::variance() const {
    double mu = mean();
    return std::max(0.0, sum_wx2_ / sum_w_ - mu * mu);
}

void EmpiricalLaw::sort_points() const {
    if (!sorted_) {
        std::sort(points_.begin(), points_.end());
        sorted_ = true;
    }
}

double EmpiricalLaw::cdf_at(double x) const {
    sort_points();
    double acc = 0.0;
    for (const auto& p : points_) {
        if (p.first > x) break;
        acc += p.second;
    }
    return sum_w_ > 0.0 ? acc / sum_w_ : 0.0;
}

GofReport EmpiricalLaw::ks(const Real1D& cdf, const std::string& name) const {
    if (points_.empty()) throw std::logic_error("EmpiricalLaw: no points");
    sort_points();
    double acc = 0.0, d = 0.0;
    for (const auto& p : points_) {
        double F = cdf(p.first);
        d = std::max(d, std::abs(F - acc / sum_w_));
        acc += p.second;
        d = std::max(d, std::abs(acc / sum_w_ - F));
    }
    GofReport rep;
    rep.name = name;
    rep.statistic = d;
    rep.n_effective = effective_n();
    rep.p_value = kolmogorov_sf(std::sqrt(rep.n_effective) * d);
    return rep;
}

} // namespace excursus
