#include "hkc/kendall.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hkc/copulas.hpp"
#include "hkc/errors.hpp"
#include "hkc/rng.hpp"

namespace hkc {

KendallFunction KendallFunction::closed_form(Generator g, int dim) {
  if (dim < 1) throw DimensionError("Kendall function dimension must be >= 1");
  if (dim - 1 > Generator::kMaxOrder) throw DimensionError("Kendall function dimension exceeds supported order");
  if (dim > 2 && !g.completely_monotone())
    throw ParameterError("frank with negative theta is only valid in dimension 2");
  KendallFunction k;
  k.kind_ = Kind::closed_form;
  k.dim_ = dim;
  k.gen_ = std::move(g);
  return k;
}

KendallFunction KendallFunction::empirical(std::vector<double> values, int dim) {
  if (values.empty()) throw DimensionError("empirical Kendall function needs at least one value");
  for (double v : values)
    if (!(v > 0.0 && v < 1.0)) throw DomainError("empirical Kendall values must lie in (0,1)");
  std::sort(values.begin(), values.end());
  KendallFunction k;
  k.kind_ = Kind::empirical;
  k.dim_ = dim;
  k.values_ = std::move(values);
  return k;
}

double KendallFunction::closed_cdf(double t) const {
  if (dim_ == 1) return t;
  const double s = gen_.value(t);
  const double log_s = std::log(s);
  double acc = t;
  for (int i = 1; i < dim_; ++i)
    acc += std::exp(i * log_s + gen_.log_abs_inverse_derivative(s, i) - std::lgamma(i + 1.0));
  return std::min(acc, 1.0);
}

double KendallFunction::closed_log_density(double t) const {
  if (dim_ == 1) return 0.0;
  const double s = gen_.value(t);
  return std::log(-gen_.derivative(t)) + (dim_ - 1) * std::log(s) - std::lgamma(static_cast<double>(dim_)) +
         gen_.log_abs_inverse_derivative(s, dim_);
}

double KendallFunction::cdf(double t) const {
  if (std::isnan(t)) throw DomainError("Kendall cdf: NaN argument");
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  if (kind_ == Kind::empirical) {
    const auto it = std::upper_bound(values_.begin(), values_.end(), t);
    return static_cast<double>(it - values_.begin()) / static_cast<double>(values_.size());
  }
  return closed_cdf(t);
}

double KendallFunction::density(double t) const {
  if (kind_ == Kind::empirical) throw NumericError("empirical Kendall function has no density");
  if (!(t > 0.0 && t < 1.0)) throw DomainError("Kendall density: t must lie in (0,1)");
  return std::exp(closed_log_density(t));
}

double KendallFunction::inverse(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("Kendall inverse: p must lie in (0,1)");
  if (kind_ == Kind::empirical) {
    const double n = static_cast<double>(values_.size());
    auto k = static_cast<std::size_t>(std::ceil(p * n));
    k = std::clamp<std::size_t>(k, 1, values_.size());
    while (k > 1 && static_cast<double>(k - 1) / n >= p) --k;
    while (k < values_.size() && static_cast<double>(k) / n < p) ++k;
    return values_[k - 1];
  }
  if (dim_ == 1) return p;

  // Safeguarded Newton on [lo, hi]; K(t) >= t puts the root below p.
  double lo = 0.0, hi = p;
  double x = 0.5 * p;
  for (int iter = 0; iter < 400; ++iter) {
    const double f = closed_cdf(x) - p;
    if (std::abs(f) < 1e-10) return x;
    (f < 0.0 ? lo : hi) = x;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) return x;
    double next = x - f / std::exp(closed_log_density(x));
    if (!(next > lo && next < hi)) {
      if (lo == 0.0)
        next = hi * 0.0625;
      else if (hi > 4.0 * lo)
        next = std::sqrt(lo * hi);
      else
        next = 0.5 * (lo + hi);
    }
    x = next;
  }
  throw NumericError("Kendall inverse: bracketing failed to converge");
}

std::string KendallFunction::provenance() const {
  if (kind_ == Kind::empirical) return "empirical(" + std::to_string(values_.size()) + ")";
  return "closed_form";
}

KendallFunction empirical_kendall_build(const Copula& copula, RngStream& rng, const KendallBuildOptions& options) {
  if (options.mc_size < 1000) throw DimensionError("empirical Kendall build needs at least 1000 draws");
  const int d = copula.dim();
  CdfOptions cdf_opts;
  cdf_opts.qmc_points = options.cdf_points;
  cdf_opts.quad_tol = options.quad_tol;
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  std::vector<double> row(static_cast<std::size_t>(d));
  std::vector<double> z(options.mc_size);
  for (std::size_t j = 0; j < options.mc_size; ++j) {
    copula.sample_into(rng, row);
    z[j] = std::clamp(copula.cdf(row, cdf_opts), lo, hi);
  }
  return KendallFunction::empirical(std::move(z), d);
}

}  // namespace hkc
