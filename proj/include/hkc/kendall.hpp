#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hkc/generators.hpp"

namespace hkc {

class Copula;
class RngStream;

/// Distribution function K of Z = C(U) for U ~ C.
///
/// Closed-form variant (Archimedean generator, dimension d):
///   K(t) = t + sum_{i=1}^{d-1} (-phi(t))^i / i! * psi^{(i)}(phi(t)),
/// empirical variant: step function over stored sorted values. Immutable.
class KendallFunction {
 public:
  enum class Kind { closed_form, empirical };

  /// K(t) = t, the Kendall function of a single uniform variable.
  KendallFunction() = default;

  static KendallFunction closed_form(Generator g, int dim);
  static KendallFunction identity() { return {}; }
  /// Empirical step function; `values` need not be sorted and must lie in (0,1).
  static KendallFunction empirical(std::vector<double> values, int dim);

  Kind kind() const noexcept { return kind_; }
  int dim() const noexcept { return dim_; }
  const Generator& generator() const noexcept { return gen_; }
  const std::vector<double>& sorted_values() const noexcept { return values_; }

  /// K(t) for t in [0,1]; K(0) = 0, K(1) = 1.
  double cdf(double t) const;
  /// Closed-form density K'(t); empirical kind throws.
  double density(double t) const;
  /// Closed form: root of K(t) = p to |K - p| < 1e-10.
  /// Empirical: smallest stored value whose step CDF is >= p.
  double inverse(double p) const;

  /// "closed_form" or "empirical(N)".
  std::string provenance() const;

 private:
  double closed_cdf(double t) const;
  double closed_log_density(double t) const;

  Kind kind_ = Kind::closed_form;
  int dim_ = 1;
  Generator gen_;
  std::vector<double> values_;
};

struct KendallBuildOptions {
  std::size_t mc_size = 100000;
  /// Points per CDF evaluation for elliptical copulas above dimension 3.
  std::size_t cdf_points = 2048;
  /// Relative quadrature tolerance for elliptical copulas up to dimension 3.
  double quad_tol = 1e-8;
};

/// Empirical Kendall function from m values C(U_j), U_j simulated from `copula`.
KendallFunction empirical_kendall_build(const Copula& copula, RngStream& rng, const KendallBuildOptions& options = {});

}  // namespace hkc
