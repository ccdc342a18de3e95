#pragma once

#include <algorithm>

namespace hkc {

/// Interior clamp applied to copula density inputs and pseudo-observations.
inline constexpr double kInteriorEps = 1e-12;

inline double clamp_interior(double u) noexcept {
  return std::clamp(u, kInteriorEps, 1.0 - kInteriorEps);
}

namespace special {

double normal_cdf(double x) noexcept;
double normal_quantile(double p);
double normal_log_pdf(double x) noexcept;

double student_t_cdf(double x, double nu);
double student_t_quantile(double p, double nu);
double student_t_log_pdf(double x, double nu) noexcept;

/// Upper tail P(X > x) of a chi-square variable with 1 or 2 degrees of freedom.
double chi_square_upper_tail(double x, int dof);

/// Debye function of order one, (1/x) * int_0^x t/(e^t - 1) dt, by adaptive quadrature.
double debye1(double x);

}  // namespace special
}  // namespace hkc
