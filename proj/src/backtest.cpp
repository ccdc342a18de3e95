#include "hkc/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hkc/errors.hpp"
#include "hkc/rng.hpp"
#include "hkc/special.hpp"
#include "hkc/stats.hpp"

namespace hkc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kForecastStream = 0x56415246;  // "VARF"

// n ln(p) with 0 ln 0 = 0.
double xlogy(double n, double p) { return n == 0.0 ? 0.0 : n * std::log(p); }

void mean_sd(std::span<const double> w, double& mean, double& sd) {
  if (w.size() < 2) throw DimensionError("margin: window needs at least two values");
  mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  double ss = 0.0;
  for (double x : w) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(w.size() - 1));
  if (!(sd > 0.0)) throw DomainError("margin: window has zero variance");
}

}  // namespace

double Margin::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("margin quantile: p must lie in (0,1)");
  switch (kind) {
    case Kind::empirical: {
      const auto n = sorted.size();
      auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
      k = std::clamp<std::size_t>(k, 1, n);
      return sorted[k - 1];
    }
    case Kind::normal:
      return location + scale * special::normal_quantile(p);
    case Kind::student_t:
      return location + scale * special::student_t_quantile(p, nu);
  }
  return kNaN;
}

Margin Margin::empirical(std::span<const double> window) {
  if (window.empty()) throw DimensionError("margin: empty window");
  Margin m;
  m.kind = Kind::empirical;
  m.sorted.assign(window.begin(), window.end());
  std::sort(m.sorted.begin(), m.sorted.end());
  return m;
}

Margin Margin::normal(std::span<const double> window) {
  Margin m;
  m.kind = Kind::normal;
  mean_sd(window, m.location, m.scale);
  return m;
}

Margin Margin::student_t(std::span<const double> window, double nu) {
  if (!(nu > 2.0)) throw ParameterError("student_t margin requires nu > 2");
  Margin m;
  m.kind = Kind::student_t;
  m.nu = nu;
  double sd = 0.0;
  mean_sd(window, m.location, sd);
  m.scale = sd * std::sqrt((nu - 2.0) / nu);
  return m;
}

std::string_view to_string(Margin::Kind k) noexcept {
  switch (k) {
    case Margin::Kind::empirical:
      return "empirical";
    case Margin::Kind::normal:
      return "normal";
    case Margin::Kind::student_t:
      return "student_t";
  }
  return "unknown";
}

Margin::Kind margin_kind_from_string(std::string_view s) {
  for (auto k : {Margin::Kind::empirical, Margin::Kind::normal, Margin::Kind::student_t})
    if (to_string(k) == s) return k;
  throw ParameterError("unknown margin kind '" + std::string(s) + "'");
}

double forecast_var(const HierarchicalModel& model, std::span<const Margin> margins, std::span<const double> weights,
                    double level, std::size_t mc, RngStream& rng, const SampleOptions& sampling) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("VaR level must lie in (0,1)");
  if (mc < 10000) throw DomainError("VaR forecast needs at least 10^4 Monte Carlo draws");
  if (margins.size() != model.n_vars || weights.size() != model.n_vars)
    throw DimensionError("VaR forecast: margins and weights must match the model's variables");
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(wsum - 1.0) > 1e-9) throw DomainError("VaR forecast: weights must sum to 1");
  const RowMatrix u = model_sample(model, mc, rng, sampling);
  std::vector<double> r(mc, 0.0);
  for (std::size_t s = 0; s < mc; ++s)
    for (std::size_t i = 0; i < model.n_vars; ++i)
      r[s] += weights[i] * margins[i].quantile(clamp_interior(u(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i))));
  return empirical_quantile(std::move(r), 1.0 - level);
}

LrTest kupiec_uc(std::span<const std::uint8_t> hits, double alpha) {
  if (hits.empty()) throw DimensionError("Kupiec test needs at least one observation");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("Kupiec test: alpha must lie in (0,1)");
  const auto t = static_cast<double>(hits.size());
  const auto x = static_cast<double>(std::count_if(hits.begin(), hits.end(), [](std::uint8_t h) { return h != 0; }));
  const double null = xlogy(t - x, 1.0 - alpha) + xlogy(x, alpha);
  const double alt = xlogy(t - x, 1.0 - x / t) + xlogy(x, x / t);
  const double lr = std::max(0.0, -2.0 * (null - alt));
  return {lr, special::chi_square_upper_tail(lr, 1)};
}

ChristoffersenResult christoffersen_tests(std::span<const std::uint8_t> hits, double alpha) {
  if (hits.size() < 2) throw DimensionError("Christoffersen tests need at least two observations");
  ChristoffersenResult r;
  for (std::size_t i = 1; i < hits.size(); ++i) {
    const bool a = hits[i - 1] != 0, b = hits[i] != 0;
    (a ? (b ? r.n11 : r.n10) : (b ? r.n01 : r.n00))++;
  }
  const bool all_equal = std::all_of(hits.begin(), hits.end(), [&](std::uint8_t h) { return (h != 0) == (hits[0] != 0); });
  if (all_equal) {
    r.degenerate = true;
    r.lr_ind = r.p_ind = r.lr_cc = r.p_cc = kNaN;
    return r;
  }
  const auto n00 = static_cast<double>(r.n00), n01 = static_cast<double>(r.n01);
  const auto n10 = static_cast<double>(r.n10), n11 = static_cast<double>(r.n11);
  const double p01 = n00 + n01 > 0 ? n01 / (n00 + n01) : 0.0;
  const double p11 = n10 + n11 > 0 ? n11 / (n10 + n11) : 0.0;
  const double p = (n01 + n11) / (n00 + n01 + n10 + n11);
  const double alt = xlogy(n00, 1.0 - p01) + xlogy(n01, p01) + xlogy(n10, 1.0 - p11) + xlogy(n11, p11);
  const double null = xlogy(n00 + n10, 1.0 - p) + xlogy(n01 + n11, p);
  r.lr_ind = std::max(0.0, 2.0 * (alt - null));
  r.p_ind = special::chi_square_upper_tail(r.lr_ind, 1);
  r.lr_cc = kupiec_uc(hits, alpha).lr + r.lr_ind;
  r.p_cc = special::chi_square_upper_tail(r.lr_cc, 2);
  return r;
}

BacktestReport evaluate_hits(std::vector<std::uint8_t> hits, double level) {
  BacktestReport rep;
  rep.level = level;
  rep.hits = std::move(hits);
  rep.horizon = rep.hits.size();
  rep.n_exceed = static_cast<std::size_t>(std::count_if(rep.hits.begin(), rep.hits.end(), [](std::uint8_t h) { return h != 0; }));
  const LrTest uc = kupiec_uc(rep.hits, 1.0 - level);
  rep.lr_uc = uc.lr;
  rep.p_uc = uc.p;
  if (rep.hits.size() >= 2) {
    const auto c = christoffersen_tests(rep.hits, 1.0 - level);
    rep.degenerate = c.degenerate;
    rep.lr_ind = c.lr_ind;
    rep.p_ind = c.p_ind;
    rep.lr_cc = c.lr_cc;
    rep.p_cc = c.p_cc;
  } else {
    rep.degenerate = true;
    rep.lr_ind = rep.p_ind = rep.lr_cc = rep.p_cc = kNaN;
  }
  return rep;
}

BacktestReport rolling_backtest(const HierarchicalModel& skeleton, const RowMatrix& returns,
                                const RollingOptions& options) {
  const auto t_total = static_cast<std::size_t>(returns.rows());
  const auto n = static_cast<std::size_t>(returns.cols());
  if (options.window < 10) throw DomainError("rolling backtest: window must be at least 10");
  if (t_total <= options.window) throw DimensionError("rolling backtest: no observations after the first window");
  if (options.refit_every < 1) throw DomainError("rolling backtest: refit cadence must be >= 1");
  std::vector<double> w = options.weights;
  if (w.empty()) w.assign(n, 1.0 / static_cast<double>(n));
  if (w.size() != n) throw DimensionError("rolling backtest: weight count differs from the column count");
  require_valid(skeleton, n);

  std::vector<double> var, realized;
  std::vector<std::uint8_t> hits;
  HierarchicalModel model;
  std::size_t refits = 0;
  std::vector<double> col(options.window);
  for (std::size_t t = options.window; t < t_total; ++t) {
    const std::size_t day = t - options.window;
    const auto lo = static_cast<Eigen::Index>(t - options.window);
    const RowMatrix window = returns.middleRows(lo, static_cast<Eigen::Index>(options.window));
    if (day % options.refit_every == 0) {
      FitOptions fo = options.fit;
      fo.seed = derive_seed(options.seed, {kForecastStream, day, 1});
      model = fit_two_step(skeleton, pseudo_observations(window), fo).model;
      ++refits;
    }
    std::vector<Margin> margins;
    margins.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t r = 0; r < options.window; ++r) col[r] = window(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i));
      switch (options.margin) {
        case Margin::Kind::empirical:
          margins.push_back(Margin::empirical(col));
          break;
        case Margin::Kind::normal:
          margins.push_back(Margin::normal(col));
          break;
        case Margin::Kind::student_t:
          margins.push_back(Margin::student_t(col, options.margin_nu));
          break;
      }
    }
    RngStream rng = RngStream::derive(options.seed, {kForecastStream, day});
    const double v = forecast_var(model, margins, w, options.level, options.mc, rng, options.sampling);
    double x = 0.0;
    for (std::size_t i = 0; i < n; ++i) x += w[i] * returns(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i));
    var.push_back(v);
    realized.push_back(x);
    hits.push_back(x < v ? 1 : 0);
  }
  BacktestReport rep = evaluate_hits(std::move(hits), options.level);
  rep.var = std::move(var);
  rep.realized = std::move(realized);
  rep.window = options.window;
  rep.refits = refits;
  return rep;
}

double aic(double loglik, std::size_t params) noexcept { return 2.0 * static_cast<double>(params) - 2.0 * loglik; }

double bic(double loglik, std::size_t params, std::size_t n) noexcept {
  return static_cast<double>(params) * std::log(static_cast<double>(n)) - 2.0 * loglik;
}

}  // namespace hkc
