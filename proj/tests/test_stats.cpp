#include <cmath>
#include <random>

#include "doctest.h"
#include "hkc/stats.hpp"

namespace {

double tau_b_naive(const std::vector<double>& x, const std::vector<double>& y) {
  double c = 0, tx = 0, ty = 0, n0 = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double a = (x[i] > x[j]) - (x[i] < x[j]);
      const double b = (y[i] > y[j]) - (y[i] < y[j]);
      c += a * b;
      tx += a == 0;
      ty += b == 0;
      n0 += 1;
    }
  return c / std::sqrt((n0 - tx) * (n0 - ty));
}

}  // namespace

TEST_CASE("tau-b matches the quadratic definition, with and without ties") {
  std::mt19937_64 eng(2);
  std::uniform_int_distribution<int> small(0, 5);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(150), y(150);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = rep % 2 ? small(eng) : nd(eng);
      y[i] = rep % 3 ? 0.5 * x[i] + small(eng) : nd(eng);
    }
    CHECK(hkc::kendall_tau(x, y) == doctest::Approx(tau_b_naive(x, y)).epsilon(1e-12));
  }
  std::vector<double> a{1, 2, 3, 4}, b{4, 3, 2, 1};
  CHECK(hkc::kendall_tau(a, b) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(hkc::kendall_tau(a, a) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("Kolmogorov-Smirnov tests") {
  std::vector<double> grid;
  for (int i = 0; i < 1000; ++i) grid.push_back((i + 0.5) / 1000.0);
  CHECK(hkc::ks_uniform(grid).statistic == doctest::Approx(0.0005));
  CHECK(hkc::ks_uniform(grid).p_value == 1.0);
  std::vector<double> skew;
  for (double g : grid) skew.push_back(g * g);
  CHECK(hkc::ks_uniform(skew).p_value < 1e-10);
  CHECK(hkc::ks_two_sample(grid, grid).statistic == 0.0);
  // Q(1.36) ~ 0.049 at large n
  CHECK(hkc::kolmogorov_p_value(1.36 / std::sqrt(1e6), 1e6) == doctest::Approx(0.0494).epsilon(0.01));
}

TEST_CASE("empirical quantile") {
  std::vector<double> x{5, 1, 4, 2, 3};
  CHECK(hkc::empirical_quantile(x, 0.2) == 1.0);
  CHECK(hkc::empirical_quantile(x, 0.21) == 2.0);
  CHECK(hkc::empirical_quantile(x, 0.99) == 5.0);
}
