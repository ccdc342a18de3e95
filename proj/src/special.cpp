#include "hkc/special.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <numbers>

#include "hkc/errors.hpp"

namespace hkc::special {

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0,1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double normal_log_pdf(double x) noexcept {
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  return -0.5 * x * x - kHalfLog2Pi;
}

double student_t_cdf(double x, double nu) {
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  return boost::math::cdf(boost::math::students_t_distribution<double>(nu), x);
}

double student_t_quantile(double p, double nu) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("student_t_quantile: p must lie in (0,1)");
  return boost::math::quantile(boost::math::students_t_distribution<double>(nu), p);
}

double student_t_log_pdf(double x, double nu) noexcept {
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) -
         0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

double chi_square_upper_tail(double x, int dof) {
  if (x <= 0.0) return 1.0;
  switch (dof) {
    case 1:
      return std::erfc(std::sqrt(0.5 * x));
    case 2:
      return std::exp(-0.5 * x);
    default:
      return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(dof), x));
  }
}

double debye1(double x) {
  if (x == 0.0) return 1.0;
  auto integrand = [](double t) { return t == 0.0 ? 1.0 : t / std::expm1(t); };
  const double integral = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, x, 15, 1e-14);
  return integral / x;
}

}  // namespace hkc::special
