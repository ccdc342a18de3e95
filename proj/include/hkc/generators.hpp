#pragma once

#include <string_view>
#include <vector>

namespace hkc {

enum class Family { independence, clayton, gumbel, frank };

std::string_view to_string(Family f) noexcept;

/// Archimedean generator phi with its inverse psi = phi^{-1}.
///
/// Parameter domains: clayton theta > 0, gumbel theta >= 1, frank theta != 0;
/// the independence family ignores theta. Derivatives of psi are exact:
/// product formulas for clayton/independence, polynomial recurrences for
/// gumbel (in s^{1/theta}) and frank (in x/(1-x), x = (1-e^{-theta}) e^{-s}).
class Generator {
 public:
  static constexpr int kMaxOrder = 30;

  Generator() = default;
  Generator(Family family, double theta);

  static Generator independence() { return {}; }

  Family family() const noexcept { return family_; }
  double theta() const noexcept { return theta_; }

  /// phi(t), t in (0,1]; phi(1) == 0.
  double value(double t) const;
  /// phi'(t) (negative).
  double derivative(double t) const;
  /// psi(s) = phi^{-1}(s), s >= 0; psi(0) == 1, psi(inf) == 0.
  double inverse(double s) const;
  /// k-th derivative of psi at s.
  double inverse_derivative(double s, int k) const;
  /// log |psi^{(k)}(s)|; the sign is (-1)^k for completely monotone generators.
  double log_abs_inverse_derivative(double s, int k) const;

  /// Kendall's tau of the bivariate copula.
  double tau() const;
  /// Generator with the given family whose bivariate Kendall's tau equals tau.
  static Generator from_tau(Family family, double tau);

  /// True when psi is completely monotone, i.e. valid in every dimension.
  bool completely_monotone() const noexcept { return family_ != Family::frank || theta_ > 0.0; }

 private:
  double gumbel_log_poly(double x, int k) const;
  double frank_poly_signed(double y, int k) const;
  double frank_log_abs_poly(double y, int k) const;
  void check_order(int k) const;

  Family family_ = Family::independence;
  double theta_ = 1.0;
  double em1_ = 0.0;  // frank: expm1(-theta)
  // Clayton: log prod_{j<k} (1/theta + j), k = 0..kMaxOrder.
  // Gumbel: |c_{k,j}|, row k holds j = 1..k (triangular, row-major).
  std::vector<double> coeff_;
};

}  // namespace hkc
