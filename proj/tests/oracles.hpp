#pragma once
// Independent reference implementations used only by tests. None of these
// route through the library's Kendall inverse or level-set samplers.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "hkc/copulas.hpp"
#include "hkc/generators.hpp"

namespace oracle {

/// Marshall-Olkin frailty sampler: U_i = psi(E_i / V) with V drawn from the
/// distribution whose Laplace transform is psi.
class FrailtySampler {
 public:
  FrailtySampler(hkc::Family family, double theta, std::uint64_t seed) : family_(family), theta_(theta), eng_(seed) {}

  std::vector<double> draw(int d) {
    const double v = frailty();
    std::vector<double> u(static_cast<std::size_t>(d));
    for (auto& x : u) x = psi(exp_(eng_) / v);
    return u;
  }

  double psi(double s) const {
    switch (family_) {
      case hkc::Family::independence:
        return std::exp(-s);
      case hkc::Family::clayton:
        return std::pow(1.0 + s, -1.0 / theta_);
      case hkc::Family::gumbel:
        return std::exp(-std::pow(s, 1.0 / theta_));
      case hkc::Family::frank:
        return -std::log1p(-(1.0 - std::exp(-theta_)) * std::exp(-s)) / theta_;
    }
    return 0.0;
  }

 private:
  double frailty() {
    switch (family_) {
      case hkc::Family::independence:
        return 1.0;
      case hkc::Family::clayton:
        return std::gamma_distribution<double>(1.0 / theta_, 1.0)(eng_);
      case hkc::Family::gumbel: {
        // Kanter / Chambers-Mallows-Stuck positive stable with index a
        const double a = 1.0 / theta_;
        if (a == 1.0) return 1.0;
        const double th = std::numbers::pi * unif_(eng_);
        const double w = exp_(eng_);
        return std::sin(a * th) / std::pow(std::sin(th), 1.0 / a) * std::pow(std::sin((1.0 - a) * th) / w, (1.0 - a) / a);
      }
      case hkc::Family::frank: {
        // logarithmic series with p = 1 - e^{-theta}, by sequential inversion
        const double p = -std::expm1(-theta_);
        const double u = unif_(eng_);
        double prob = -p / std::log1p(-p), cum = prob;
        double k = 1.0;
        while (u > cum && k < 1e7) {
          prob *= p * k / (k + 1.0);
          k += 1.0;
          cum += prob;
        }
        return k;
      }
    }
    return 1.0;
  }

  hkc::Family family_;
  double theta_;
  std::mt19937_64 eng_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::exponential_distribution<double> exp_{1.0};
};

/// Central finite difference of f at x.
inline double derivative(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Mixed partial d^2 C / du dv by central differences.
inline double mixed_partial(const std::function<double(double, double)>& c, double u, double v, double h) {
  return (c(u + h, v + h) - c(u + h, v - h) - c(u - h, v + h) + c(u - h, v - h)) / (4.0 * h * h);
}

/// Orthant probability P(X_1 <= 0, X_2 <= 0) of a centered elliptical pair.
inline double orthant2(double rho) { return 0.25 + std::asin(rho) / (2.0 * std::numbers::pi); }
/// Trivariate orthant probability.
inline double orthant3(double r12, double r13, double r23) {
  return 0.125 + (std::asin(r12) + std::asin(r13) + std::asin(r23)) / (4.0 * std::numbers::pi);
}
/// Equicorrelated (rho = 1/2) orthant probability in dimension d: 1/(d+1).
inline double orthant_half(int d) { return 1.0 / (d + 1.0); }

/// Closed-form bivariate Kendall functions (hand-derived).
inline double kendall_bivariate(hkc::Family f, double theta, double t) {
  switch (f) {
    case hkc::Family::independence:
      return t - t * std::log(t);
    case hkc::Family::clayton:
      return t + t * (1.0 - std::pow(t, theta)) / theta;
    case hkc::Family::gumbel:
      return t - t * std::log(t) / theta;
    case hkc::Family::frank:
      return t - std::expm1(theta * t) / theta * std::log(std::expm1(-theta * t) / std::expm1(-theta));
  }
  return 0.0;
}

inline hkc::Copula equicorrelated_gaussian(int d, double rho) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(d, d, rho);
  r.diagonal().setOnes();
  return hkc::Copula::gaussian(r);
}

}  // namespace oracle
