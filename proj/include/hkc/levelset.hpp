#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "hkc/copulas.hpp"
#include "hkc/generators.hpp"

namespace hkc {

class RngStream;

enum class LevelSetMethod { conditional_inverse, projected, rejection };

std::string_view to_string(LevelSetMethod m) noexcept;

/// A point u with C(u) ~= z_target.
struct LevelSetSample {
  std::vector<double> u;
  double z_target = 0.0;
  double z_achieved = 0.0;
  LevelSetMethod method = LevelSetMethod::conditional_inverse;
  std::size_t attempts = 1;
};

/// Acceptance band for rejection sampling: |C(u) - z| < eps0 (absolute)
/// or |C(u) - z| < eps0 * z (relative).
struct ToleranceRule {
  enum class Mode { absolute, relative };
  Mode mode = Mode::relative;
  double eps0 = 0.01;

  double band(double z) const noexcept { return mode == Mode::relative ? eps0 * z : eps0; }
  bool accepts(double c, double z) const noexcept { return std::abs(c - z) < band(z); }
};

inline constexpr std::size_t kDefaultMaxAttempts = 10'000'000;

/// P(U_j <= u | U_1..U_{j-1} = prefix, C(U) = z) for a d-dimensional
/// Archimedean copula: (1 - phi(u) / (phi(z) - sum phi(prefix)))^{d-j}.
double conditional_levelset_cdf(const Generator& g, int d, std::span<const double> prefix, double z, double u);

/// Conditional inverse method driven by d-1 given uniforms `v`.
void levelset_conditional_from_uniforms(const Generator& g, int d, double z, std::span<const double> v,
                                        std::span<double> out);
/// Projected method from a point `s` of the unit simplex: u_j = psi(s_j * phi(z)).
void levelset_projected_from_simplex(const Generator& g, double z, std::span<const double> s, std::span<double> out);

LevelSetSample sample_levelset_conditional(const Generator& g, int d, double z, RngStream& rng);
LevelSetSample sample_levelset_projected(const Generator& g, int d, double z, RngStream& rng);

/// Draws from `c` until C(u) falls in the tolerance band around z.
/// Throws AttemptCapError after `max_attempts` draws.
LevelSetSample sample_levelset_rejection(const Copula& c, double z, const ToleranceRule& eps, RngStream& rng,
                                         std::size_t max_attempts = kDefaultMaxAttempts,
                                         const CdfOptions& cdf_options = {});

/// Batch rejection for many targets at once: each draw is assigned to the
/// pending target nearest to C(u) among those whose band contains C(u), and
/// that target leaves the pending set. Row j of the result lies on level z[j].
/// The cap bounds the number of consecutive unassigned draws.
RowMatrix sample_levelset_batch(const Copula& c, std::span<const double> z, const ToleranceRule& eps,
                                RngStream& rng, std::size_t max_attempts = kDefaultMaxAttempts,
                                const CdfOptions& cdf_options = {}, std::size_t* total_draws = nullptr);

}  // namespace hkc
