#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "alsprog/rng.hpp"
#include "alsprog/stats.hpp"

using namespace alsprog;

namespace {

// Adaptive Simpson quadrature, the brute-force integration oracle for the
// distribution functions. Independent of the implementation under test.
double simpson(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  return (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b));
}

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double eps, double whole, int depth) {
  const double c = 0.5 * (a + b);
  const double left = simpson(f, a, c);
  const double right = simpson(f, c, b);
  if (depth <= 0 || std::fabs(left + right - whole) <= 15.0 * eps)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, c, 0.5 * eps, left, depth - 1) +
         adaptive_simpson(f, c, b, 0.5 * eps, right, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double eps = 1e-13) {
  return adaptive_simpson(f, a, b, eps, simpson(f, a, b), 40);
}

// t density via std::lgamma (libm, not the project's gammln)
double t_pdf(double x, double df) {
  const double c = std::exp(std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df)) /
                   std::sqrt(df * 3.14159265358979323846);
  return c * std::pow(1.0 + x * x / df, -0.5 * (df + 1.0));
}

double chi2_pdf(double x, double k) {
  if (x <= 0) return 0;
  return std::exp((0.5 * k - 1.0) * std::log(x) - 0.5 * x -
                  std::lgamma(0.5 * k) - 0.5 * k * std::log(2.0));
}

// O(n^2) average ranks, the brute-force oracle
std::vector<double> brute_ranks(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] < v[i]) ++less;
      if (v[j] == v[i]) ++equal;
    }
    out[i] = less + 0.5 * (equal + 1);
  }
  return out;
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("gammln matches lgamma") {
  for (const double x : {0.5, 1.0, 2.0, 3.7, 10.0, 55.5})
    CHECK(stats::gammln(x) == doctest::Approx(std::lgamma(x)).epsilon(1e-13));
}

TEST_CASE("chi-square upper tail against erfc and quadrature") {
  // dof 1: Q(x) = erfc(sqrt(x/2)), an independent closed form
  for (const double x : {0.5, 1.0, 3.84, 10.0, 20.0}) {
    CHECK(stats::chi2_upper_p(x, 1) ==
          doctest::Approx(std::erfc(std::sqrt(0.5 * x))).epsilon(1e-12));
  }
  CHECK(stats::chi2_upper_p(20.0, 1) ==
        doctest::Approx(7.744216431044074e-06).epsilon(1e-9));

  for (const int dof : {1, 2, 3, 5, 10}) {
    for (const double x : {0.3, 2.0, 7.5, 15.0}) {
      const double lower =
          integrate([&](double t) { return chi2_pdf(t, dof); }, 0.0, x);
      CHECK(stats::chi2_upper_p(x, dof) ==
            doctest::Approx(1.0 - lower).epsilon(1e-10));
    }
  }
}

TEST_CASE("chi-square degenerate dof") {
  CHECK(stats::chi2_upper_p(0.0, 0) == 1.0);
  CHECK(stats::chi2_upper_p(123.0, 0) == 1.0);
}

TEST_CASE("two-sided t p-value against quadrature") {
  for (const double df : {1.0, 3.0, 8.0, 30.0}) {
    for (const double t : {0.1, 0.7, 1.5, 2.3, 4.0}) {
      const double body =
          integrate([&](double x) { return t_pdf(x, df); }, 0.0, t);
      const double expected = 1.0 - 2.0 * body;
      CHECK(stats::t_two_sided_p(t, df) ==
            doctest::Approx(expected).epsilon(1e-10));
      CHECK(stats::t_two_sided_p(-t, df) ==
            doctest::Approx(expected).epsilon(1e-10));
    }
  }
  CHECK(stats::t_two_sided_p(0.0, 5.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("incomplete gamma complements") {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const double a = rng.uniform(0.2, 20.0);
    const double x = rng.uniform(0.0, 30.0);
    CHECK(stats::gamma_p(a, x) + stats::gamma_q(a, x) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("median and quantile") {
  std::vector<double> odd = {1, 3, 2};
  CHECK(stats::median(odd) == 2.0);
  std::vector<double> even = {1, 2, 3, 4};
  CHECK(stats::median(even) == 2.5);
  std::vector<double> sorted = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  CHECK(stats::quantile(sorted, 0.1) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(stats::quantile(sorted, 0.0) == 0.0);
  CHECK(stats::quantile(sorted, 1.0) == 9.0);
}

TEST_CASE("average ranks with ties") {
  const std::vector<double> v = {1, 2, 2, 3};
  const auto r = stats::average_ranks(v);
  CHECK(r == std::vector<double>{1.0, 2.5, 2.5, 4.0});

  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.uniform_int(1, 40);
    std::vector<double> x;
    for (int i = 0; i < n; ++i)
      x.push_back(static_cast<double>(rng.uniform_int(0, 8)));
    CHECK(stats::average_ranks(x) == brute_ranks(x));
  }
}

TEST_CASE("pearson basics") {
  const std::vector<double> x = {1, 2, 3, 4};
  const std::vector<double> y = {2, 4, 6, 8};
  CHECK(stats::pearson(x, y) == doctest::Approx(1.0).epsilon(1e-14));
  const std::vector<double> z = {5, 5, 5, 5};
  CHECK(std::isnan(stats::pearson(x, z)));
}

}  // TEST_SUITE
