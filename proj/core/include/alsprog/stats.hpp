#pragma once

#include <span>
#include <vector>

namespace alsprog::stats {

// log Gamma(x), x > 0
double gammln(double x);

// Regularized incomplete gamma P(a, x) and its complement Q(a, x) = 1 - P.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Regularized incomplete beta I_x(a, b).
double betainc(double a, double b, double x);

// Two-sided p-value of Student's t with df degrees of freedom.
double t_two_sided_p(double t, double df);

// Upper-tail probability of a chi-square variate: P(X >= stat | dof).
double chi2_upper_p(double stat, int dof);

// Sample helpers. median() averages the two middle order statistics for
// even counts; variance() is the population form (divide by n).
double mean(std::span<const double> v);
double median(std::span<const double> v);
double variance(std::span<const double> v);
double sample_sd(std::span<const double> v);  // n-1 denominator, needs n >= 2

// Linearly interpolated quantile with h = (n-1)q over the sorted sample.
double quantile(std::span<const double> sorted, double q);

// Average ranks (1-based); ties get the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> v);

// Pearson correlation; returns NaN when either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace alsprog::stats
