#include "hkc/levelset.hpp"

#include <cmath>
#include <set>
#include <string>
#include <utility>

#include "hkc/errors.hpp"
#include "hkc/rng.hpp"

namespace hkc {

std::string_view to_string(LevelSetMethod m) noexcept {
  switch (m) {
    case LevelSetMethod::conditional_inverse:
      return "conditional_inverse";
    case LevelSetMethod::projected:
      return "projected";
    case LevelSetMethod::rejection:
      return "rejection";
  }
  return "unknown";
}

namespace {

void check_level(double z) {
  if (!(z > 0.0 && z < 1.0)) throw DomainError("level z must lie in (0,1), got " + std::to_string(z));
}

double archimedean_value(const Generator& g, std::span<const double> u) {
  double s = 0.0;
  for (double x : u) s += g.value(std::clamp(x, 1e-300, 1.0));
  return g.inverse(s);
}

}  // namespace

double conditional_levelset_cdf(const Generator& g, int d, std::span<const double> prefix, double z, double u) {
  check_level(z);
  const int j = static_cast<int>(prefix.size()) + 1;
  if (j > d) throw DimensionError("conditional level-set cdf: prefix too long");
  double rest = g.value(z);
  for (double p : prefix) rest -= g.value(p);
  if (!(rest > 0.0)) throw SupportError("conditional level-set cdf: prefix already exceeds level z");
  if (u >= 1.0) return 1.0;
  const double lower = g.inverse(rest);
  if (!(u > lower)) throw SupportError("conditional level-set cdf: u at or below the lower support endpoint");
  const double ratio = g.value(u) / rest;
  return std::pow(std::max(0.0, 1.0 - ratio), d - j);
}

void levelset_conditional_from_uniforms(const Generator& g, int d, double z, std::span<const double> v,
                                        std::span<double> out) {
  check_level(z);
  if (static_cast<int>(v.size()) != d - 1 || static_cast<int>(out.size()) != d)
    throw DimensionError("conditional inverse: expected d-1 uniforms and d outputs");
  double rest = g.value(z);
  for (int j = 1; j < d; ++j) {
    // 1 - v^{1/(d-j)}, the inverse of the conditional cdf in generator space
    const double frac = -std::expm1(std::log(v[static_cast<std::size_t>(j - 1)]) / (d - j));
    const double t = frac * rest;
    out[static_cast<std::size_t>(j - 1)] = g.inverse(t);
    rest = std::max(0.0, rest - t);
  }
  out[static_cast<std::size_t>(d - 1)] = g.inverse(rest);
}

void levelset_projected_from_simplex(const Generator& g, double z, std::span<const double> s, std::span<double> out) {
  check_level(z);
  if (s.size() != out.size()) throw DimensionError("projected: simplex point and output sizes differ");
  const double r = g.value(z);
  for (std::size_t j = 0; j < s.size(); ++j) out[j] = g.inverse(s[j] * r);
}

LevelSetSample sample_levelset_conditional(const Generator& g, int d, double z, RngStream& rng) {
  if (d < 1) throw DimensionError("level-set dimension must be >= 1");
  LevelSetSample out;
  out.u.resize(static_cast<std::size_t>(d));
  std::vector<double> v(static_cast<std::size_t>(d - 1));
  for (auto& x : v) x = rng.uniform();
  levelset_conditional_from_uniforms(g, d, z, v, out.u);
  out.z_target = z;
  out.z_achieved = archimedean_value(g, out.u);
  out.method = LevelSetMethod::conditional_inverse;
  return out;
}

LevelSetSample sample_levelset_projected(const Generator& g, int d, double z, RngStream& rng) {
  if (d < 1) throw DimensionError("level-set dimension must be >= 1");
  std::vector<double> s(static_cast<std::size_t>(d));
  double total = 0.0;
  for (auto& x : s) total += (x = rng.exponential());
  for (auto& x : s) x /= total;
  LevelSetSample out;
  out.u.resize(static_cast<std::size_t>(d));
  levelset_projected_from_simplex(g, z, s, out.u);
  out.z_target = z;
  out.z_achieved = archimedean_value(g, out.u);
  out.method = LevelSetMethod::projected;
  return out;
}

LevelSetSample sample_levelset_rejection(const Copula& c, double z, const ToleranceRule& eps, RngStream& rng,
                                         std::size_t max_attempts, const CdfOptions& cdf_options) {
  check_level(z);
  if (!(eps.eps0 > 0.0)) throw ParameterError("rejection tolerance must be positive");
  LevelSetSample out;
  out.u.resize(static_cast<std::size_t>(c.dim()));
  out.z_target = z;
  out.method = LevelSetMethod::rejection;
  for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
    c.sample_into(rng, out.u);
    const double value = c.cdf(out.u, cdf_options);
    if (eps.accepts(value, z)) {
      out.z_achieved = value;
      out.attempts = attempt;
      return out;
    }
  }
  throw AttemptCapError("rejection sampling: no draw within the tolerance band after " +
                        std::to_string(max_attempts) + " attempts (widen epsilon or reduce dimension)");
}

RowMatrix sample_levelset_batch(const Copula& c, std::span<const double> z, const ToleranceRule& eps,
                                RngStream& rng, std::size_t max_attempts, const CdfOptions& cdf_options,
                                std::size_t* total_draws) {
  if (!(eps.eps0 > 0.0)) throw ParameterError("rejection tolerance must be positive");
  for (double zj : z) check_level(zj);
  const int d = c.dim();
  RowMatrix out(static_cast<Eigen::Index>(z.size()), d);
  std::set<std::pair<double, std::size_t>> pending;
  for (std::size_t j = 0; j < z.size(); ++j) pending.emplace(z[j], j);

  std::vector<double> u(static_cast<std::size_t>(d));
  std::size_t draws = 0, since_accept = 0;
  while (!pending.empty()) {
    if (since_accept >= max_attempts)
      throw AttemptCapError("batch rejection sampling: " + std::to_string(pending.size()) +
                            " targets unfilled after " + std::to_string(max_attempts) +
                            " consecutive draws (widen epsilon or reduce dimension)");
    c.sample_into(rng, u);
    ++draws;
    ++since_accept;
    const double value = c.cdf(u, cdf_options);
    // Band membership is monotone in distance on each side of C(u), so the
    // nearest admissible target is one of the two neighbours.
    auto above = pending.lower_bound({value, 0});
    auto best = pending.end();
    double best_dist = 0.0;
    if (above != pending.end() && eps.accepts(value, above->first)) {
      best = above;
      best_dist = above->first - value;
    }
    if (above != pending.begin()) {
      auto below = std::prev(above);
      // leftmost entry of the run of equal levels keeps the lowest index
      while (below != pending.begin() && std::prev(below)->first == below->first) --below;
      const double dist = value - below->first;
      if (eps.accepts(value, below->first) && (best == pending.end() || dist <= best_dist)) best = below;
    }
    if (best == pending.end()) continue;
    const auto row = static_cast<Eigen::Index>(best->second);
    for (int k = 0; k < d; ++k) out(row, k) = u[static_cast<std::size_t>(k)];
    pending.erase(best);
    since_accept = 0;
  }
  if (total_draws) *total_draws = draws;
  return out;
}

}  // namespace hkc
