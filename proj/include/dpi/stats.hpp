#pragma once

#include <span>
#include <vector>

namespace dpi::stats {

// log(sum_i exp(v_i)), stable for large-magnitude inputs.
double logsumexp(std::span<const double> v);
double logsumexp2(double a, double b);

// Total variation distance between two finite distributions: 0.5 * L1.
double tvd(std::span<const double> p, std::span<const double> q);

struct Interval {
  double lo = 0.0, hi = 1.0;
};
// Wilson score interval for a binomial proportion (default z for 95%).
Interval wilson(int successes, int trials, double z = 1.959963984540054);

double mean(std::span<const double> v);
double variance(std::span<const double> v);  // sample variance, n-1 denominator

// Exact binomial distribution via the regularized incomplete beta function.
// No normal approximation anywhere; quantiles are integer scans over the cdf.
double binomial_pmf(int n, double p, int k);
double binomial_cdf(int n, double p, int k);       // P[X <= k]
int binomial_quantile(int n, double p, double q);  // min{k : P[X <= k] >= q}

double chi2_cdf(double df, double x);
double chi2_quantile(double df, double q);
double normal_cdf(double x);

// Least-squares slope of y against x.
double ls_slope(std::span<const double> x, std::span<const double> y);

// Kolmogorov-Smirnov distance of a sample against Uniform(0, 1).
double ks_uniform(std::vector<double> sample);

}  // namespace dpi::stats
