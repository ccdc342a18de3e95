#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hkc/estimation.hpp"
#include "hkc/model.hpp"

namespace hkc {

/// Marginal return model of one asset, used to map uniforms to returns.
struct Margin {
  enum class Kind { empirical, normal, student_t };
  Kind kind = Kind::empirical;
  /// Sorted window values (empirical kind).
  std::vector<double> sorted;
  double location = 0.0;
  double scale = 1.0;
  double nu = 0.0;

  /// ceil(p n)-th order statistic for the empirical kind; parametric quantile otherwise.
  double quantile(double p) const;

  static Margin empirical(std::span<const double> window);
  /// Normal with the window's mean and standard deviation.
  static Margin normal(std::span<const double> window);
  /// Location-scale Student-t with the window's mean and standard deviation.
  static Margin student_t(std::span<const double> window, double nu);
};

std::string_view to_string(Margin::Kind k) noexcept;
Margin::Kind margin_kind_from_string(std::string_view s);

/// Monte Carlo Value-at-Risk: the (1 - level)-quantile of sum_i w_i F_i^{-1}(U_i)
/// over mc draws of U from the model.
double forecast_var(const HierarchicalModel& model, std::span<const Margin> margins, std::span<const double> weights,
                    double level, std::size_t mc, RngStream& rng, const SampleOptions& sampling = {});

struct LrTest {
  double lr = 0.0;
  double p = 1.0;
};

/// Kupiec proportion-of-failures test with the 0 ln 0 = 0 convention.
LrTest kupiec_uc(std::span<const std::uint8_t> hits, double alpha);

struct ChristoffersenResult {
  /// All hits equal: the transition likelihood is undefined and the IND
  /// and CC fields are NaN.
  bool degenerate = false;
  std::size_t n00 = 0, n01 = 0, n10 = 0, n11 = 0;
  double lr_ind = 0.0;
  double p_ind = 1.0;
  double lr_cc = 0.0;
  double p_cc = 1.0;
};

/// First-order Markov independence test and the joint conditional-coverage test.
ChristoffersenResult christoffersen_tests(std::span<const std::uint8_t> hits, double alpha);

struct BacktestReport {
  double level = 0.99;
  std::vector<std::uint8_t> hits;
  std::vector<double> var;
  std::vector<double> realized;
  std::size_t n_exceed = 0;
  double lr_uc = 0.0, p_uc = 1.0;
  bool degenerate = false;
  double lr_ind = 0.0, p_ind = 1.0;
  double lr_cc = 0.0, p_cc = 1.0;
  std::size_t window = 0;
  std::size_t horizon = 0;
  std::size_t refits = 0;
};

/// Runs all coverage tests on a hit series.
BacktestReport evaluate_hits(std::vector<std::uint8_t> hits, double level);

struct RollingOptions {
  std::size_t window = 500;
  double level = 0.99;
  std::size_t refit_every = 25;
  std::size_t mc = 10000;
  Margin::Kind margin = Margin::Kind::empirical;
  double margin_nu = 5.0;
  /// Equal weights when empty.
  std::vector<double> weights;
  FitOptions fit{};
  SampleOptions sampling{};
  std::uint64_t seed = 0;
};

/// Rolling one-day-ahead VaR backtest: for each day after the first window,
/// fit the copula on rank pseudo-observations of the trailing window (refit
/// every `refit_every` days), forecast the portfolio VaR and record a hit when
/// the realized return falls below it.
BacktestReport rolling_backtest(const HierarchicalModel& skeleton, const RowMatrix& returns,
                                const RollingOptions& options);

double aic(double loglik, std::size_t params) noexcept;
double bic(double loglik, std::size_t params, std::size_t n) noexcept;

}  // namespace hkc
