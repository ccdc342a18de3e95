#include "hkc/generators.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "hkc/errors.hpp"
#include "hkc/special.hpp"

namespace hkc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMax = Generator::kMaxOrder;

inline std::size_t tri_index(int k, int j) { return static_cast<std::size_t>(k * (k - 1) / 2 + (j - 1)); }

// |q_{k,j}| for the frank recurrence Q_{k+1}(y) = -y(1+y) Q_k'(y), Q_1 = y.
// Independent of theta, so built once.
const std::vector<double>& frank_table() {
  static const std::vector<double> table = [] {
    std::vector<double> r(tri_index(kMax + 1, 1), 0.0);
    r[tri_index(1, 1)] = 1.0;
    for (int k = 1; k < kMax; ++k) {
      for (int j = 1; j <= k + 1; ++j) {
        double v = 0.0;
        if (j <= k) v += j * r[tri_index(k, j)];
        if (j >= 2) v += (j - 1) * r[tri_index(k, j - 1)];
        r[tri_index(k + 1, j)] = v;
      }
    }
    return r;
  }();
  return table;
}

// log(sum_j c_j x^j) for nonnegative coefficients, overflow safe.
double log_poly_positive(const double* c, int k, double log_x) {
  double m = -kInf;
  for (int j = 1; j <= k; ++j)
    if (c[j - 1] > 0.0) m = std::max(m, std::log(c[j - 1]) + j * log_x);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (int j = 1; j <= k; ++j)
    if (c[j - 1] > 0.0) acc += std::exp(std::log(c[j - 1]) + j * log_x - m);
  return m + std::log(acc);
}

double horner_positive(const double* c, int k, double x) {
  double acc = 0.0;
  for (int j = k; j >= 1; --j) acc = (acc + c[j - 1]) * x;
  return acc;
}

}  // namespace

std::string_view to_string(Family f) noexcept {
  switch (f) {
    case Family::independence:
      return "independence";
    case Family::clayton:
      return "clayton";
    case Family::gumbel:
      return "gumbel";
    case Family::frank:
      return "frank";
  }
  return "unknown";
}

Generator::Generator(Family family, double theta) : family_(family), theta_(theta) {
  if (!std::isfinite(theta) && family != Family::independence)
    throw ParameterError("generator parameter must be finite");
  switch (family) {
    case Family::independence:
      theta_ = 1.0;
      break;
    case Family::clayton: {
      if (!(theta > 0.0)) throw ParameterError("clayton requires theta > 0, got " + std::to_string(theta));
      coeff_.resize(kMax + 1);
      coeff_[0] = 0.0;
      for (int k = 1; k <= kMax; ++k) coeff_[k] = coeff_[k - 1] + std::log(1.0 / theta + (k - 1));
      break;
    }
    case Family::gumbel: {
      if (!(theta >= 1.0)) throw ParameterError("gumbel requires theta >= 1, got " + std::to_string(theta));
      // P_{k+1}(x) = -a x P_k - k P_k + a x P_k', a = 1/theta; b = (-1)^k c >= 0.
      const double a = 1.0 / theta;
      coeff_.assign(tri_index(kMax + 1, 1), 0.0);
      coeff_[tri_index(1, 1)] = a;
      for (int k = 1; k < kMax; ++k) {
        for (int j = 1; j <= k + 1; ++j) {
          double v = 0.0;
          if (j >= 2) v += a * coeff_[tri_index(k, j - 1)];
          if (j <= k) v += (k - a * j) * coeff_[tri_index(k, j)];
          coeff_[tri_index(k + 1, j)] = v;
        }
      }
      break;
    }
    case Family::frank:
      if (theta == 0.0) throw ParameterError("frank requires theta != 0");
      em1_ = std::expm1(-theta);
      break;
  }
}

double Generator::value(double t) const {
  if (!(t > 0.0 && t <= 1.0)) throw DomainError("generator value: t must lie in (0,1], got " + std::to_string(t));
  if (t == 1.0) return 0.0;
  switch (family_) {
    case Family::independence:
      return -std::log(t);
    case Family::clayton:
      return std::expm1(-theta_ * std::log(t));
    case Family::gumbel:
      return std::pow(-std::log(t), theta_);
    case Family::frank: {
      const double ratio = std::expm1(-theta_ * t) / em1_;
      if (ratio < 0.5) return -std::log(ratio);
      // near t = 1: ratio - 1 = -e^{-theta t} expm1(-theta (1-t)) / expm1(-theta)
      return -std::log1p(-std::exp(-theta_ * t) * std::expm1(-theta_ * (1.0 - t)) / em1_);
    }
  }
  return 0.0;
}

double Generator::derivative(double t) const {
  if (!(t > 0.0 && t <= 1.0)) throw DomainError("generator derivative: t must lie in (0,1]");
  switch (family_) {
    case Family::independence:
      return -1.0 / t;
    case Family::clayton:
      return -theta_ * std::exp(-(theta_ + 1.0) * std::log(t));
    case Family::gumbel:
      if (t == 1.0) return theta_ == 1.0 ? -1.0 : 0.0;
      return -theta_ * std::pow(-std::log(t), theta_ - 1.0) / t;
    case Family::frank:
      return -theta_ / std::expm1(theta_ * t);
  }
  return 0.0;
}

double Generator::inverse(double s) const {
  if (!(s >= 0.0)) throw DomainError("generator inverse: s must be >= 0, got " + std::to_string(s));
  if (s == 0.0) return 1.0;
  if (std::isinf(s)) return 0.0;
  switch (family_) {
    case Family::independence:
      return std::exp(-s);
    case Family::clayton:
      return std::exp(-std::log1p(s) / theta_);
    case Family::gumbel:
      return std::exp(-std::pow(s, 1.0 / theta_));
    case Family::frank: {
      const double a = em1_ * std::exp(-s);
      if (a > -0.5) return -std::log1p(a) / theta_;
      return -std::log(-std::expm1(-s) + std::exp(-theta_ - s)) / theta_;
    }
  }
  return 0.0;
}

void Generator::check_order(int k) const {
  if (k < 0 || k > kMaxOrder)
    throw DomainError("generator inverse derivative: order " + std::to_string(k) + " unsupported (max " +
                      std::to_string(kMaxOrder) + ")");
}

double Generator::gumbel_log_poly(double x, int k) const {
  const double* c = &coeff_[tri_index(k, 1)];
  const double h = horner_positive(c, k, x);
  if (std::isfinite(h) && h > 0.0) return std::log(h);
  return log_poly_positive(c, k, std::log(x));
}

double Generator::frank_poly_signed(double y, int k) const {
  const double* r = &frank_table()[tri_index(k, 1)];
  // Q_k(y) = (-1)^{k-1} sum_j r_j y^j
  double acc = 0.0;
  for (int j = k; j >= 1; --j) acc = (acc + r[j - 1]) * y;
  return (k % 2 == 1) ? acc : -acc;
}

double Generator::frank_log_abs_poly(double y, int k) const {
  const double* r = &frank_table()[tri_index(k, 1)];
  const double h = horner_positive(r, k, y);
  if (std::isfinite(h) && h > 0.0) return std::log(h);
  return log_poly_positive(r, k, std::log(y));
}

double Generator::log_abs_inverse_derivative(double s, int k) const {
  check_order(k);
  if (!(s >= 0.0)) throw DomainError("generator inverse derivative: s must be >= 0");
  if (k == 0) return std::log(inverse(s));
  switch (family_) {
    case Family::independence:
      return -s;
    case Family::clayton:
      return coeff_[k] - (1.0 / theta_ + k) * std::log1p(s);
    case Family::gumbel: {
      if (theta_ == 1.0) return -s;
      if (s == 0.0) return kInf;
      const double log_s = std::log(s);
      const double x = std::exp(log_s / theta_);
      return -x - k * log_s + gumbel_log_poly(x, k);
    }
    case Family::frank: {
      const double es = std::exp(-s);
      const double x = -em1_ * es;
      const double a = em1_ * es;
      const double w = (a > -0.5) ? 1.0 + a : -std::expm1(-s) + std::exp(-theta_ - s);
      const double y = x / w;
      if (theta_ > 0.0) return -std::log(theta_) + frank_log_abs_poly(y, k);
      return std::log(std::abs(frank_poly_signed(y, k) / theta_));
    }
  }
  return 0.0;
}

double Generator::inverse_derivative(double s, int k) const {
  check_order(k);
  if (!(s >= 0.0)) throw DomainError("generator inverse derivative: s must be >= 0");
  if (k == 0) return inverse(s);
  if (family_ == Family::frank && theta_ < 0.0) {
    const double es = std::exp(-s);
    const double x = -em1_ * es;
    const double w = 1.0 + em1_ * es;
    return -frank_poly_signed(x / w, k) / theta_;
  }
  const double mag = std::exp(log_abs_inverse_derivative(s, k));
  return (k % 2 == 0) ? mag : -mag;
}

double Generator::tau() const {
  switch (family_) {
    case Family::independence:
      return 0.0;
    case Family::clayton:
      return theta_ / (theta_ + 2.0);
    case Family::gumbel:
      return 1.0 - 1.0 / theta_;
    case Family::frank: {
      const double t = std::abs(theta_);
      double tau;
      if (t < 1e-2) {
        const double t2 = t * t;
        tau = t / 9.0 - t * t2 / 900.0 + 4.0 * t * t2 * t2 / 211680.0;
      } else {
        tau = 1.0 - 4.0 / t * (1.0 - special::debye1(t));
      }
      return theta_ > 0 ? tau : -tau;
    }
  }
  return 0.0;
}

Generator Generator::from_tau(Family family, double tau) {
  switch (family) {
    case Family::independence:
      if (tau != 0.0) throw ParameterError("independence family only attains tau = 0");
      return Generator::independence();
    case Family::clayton:
      if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("clayton attains tau in (0,1) only");
      return Generator(family, 2.0 * tau / (1.0 - tau));
    case Family::gumbel:
      if (!(tau >= 0.0 && tau < 1.0)) throw ParameterError("gumbel attains tau in [0,1) only");
      return Generator(family, 1.0 / (1.0 - tau));
    case Family::frank: {
      if (!(tau > -1.0 && tau < 1.0) || tau == 0.0) throw ParameterError("frank attains tau in (-1,1)\\{0} only");
      const double target = std::abs(tau);
      double lo = 1e-6, hi = 745.0;
      auto tau_of = [](double th) { return Generator(Family::frank, th).tau(); };
      if (target < tau_of(lo) || target > tau_of(hi))
        throw ParameterError("frank: tau " + std::to_string(tau) + " outside the numerically attainable range");
      while (hi - lo > 1e-10 * std::max(1.0, lo)) {
        const double mid = 0.5 * (lo + hi);
        (tau_of(mid) < target ? lo : hi) = mid;
      }
      const double theta = 0.5 * (lo + hi);
      return Generator(family, tau > 0 ? theta : -theta);
    }
  }
  throw ParameterError("unknown family");
}

}  // namespace hkc
