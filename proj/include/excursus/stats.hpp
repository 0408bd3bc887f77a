#pragma once

#include "excursus/grid.hpp"

#include <string>
#include <vector>

namespace excursus {

double normal_pdf(double x);
double normal_cdf(double x);

// Regularized upper incomplete gamma Q(a, x).
double gammq(double a, double x);

// Kolmogorov distribution survival function Q_KS(lambda).
double kolmogorov_sf(double lambda);

struct GofReport {
    std::string name;
    double statistic = 0.0;
    double p_value = 0.0;
    double n_effective = 0.0;

    bool pass(double level = 0.01) const { return p_value > level; }
    std::string describe() const;
};

// One-sample Kolmogorov-Smirnov against a cdf; p = Q_KS(sqrt(n) D).
GofReport ks_test(std::vector<double> sample, const Real1D& cdf,
                  const std::string& name = "ks");

// Two-sample Kolmogorov-Smirnov; p = Q_KS(sqrt(nm/(n+m)) D).
GofReport ks2_test(std::vector<double> a, std::vector<double> b,
                   const std::string& name = "ks2");

// Pearson chi-square with dof = size - 1 - dof_reduction;
// p = Q(dof/2, stat/2).
GofReport chi2_test(const std::vector<double>& observed,
                    const std::vector<double>& expected,
                    int dof_reduction = 0,
                    const std::string& name = "chi2");

// Weighted empirical law; KS uses the effective sample size
// (sum w)^2 / (sum w^2).
class EmpiricalLaw {
public:
    void add(double x, double weight = 1.0);
    std::size_t count() const { return points_.size(); }
    double total_weight() const { return sum_w_; }
    double effective_n() const;
    double mean() const;
    double variance() const;
    double cdf_at(double x) const;
    GofReport ks(const Real1D& cdf, const std::string& name = "ks") const;
    const std::vector<std::pair<double, double>>& points() const {
        return points_;
    }

private:
    mutable std::vector<std::pair<double, double>> points_;
    mutable bool sorted_ = false;
    double sum_w_ = 0.0;
    double sum_w2_ = 0.0;
    double sum_wx_ = 0.0;
    double sum_wx2_ = 0.0;

    void sort_points() const;
};

} // namespace excursus
