#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "hkc/copulas.hpp"

namespace hkc {

/// Kendall's tau-b in O(n log n) (Knight's merge-sort algorithm).
double kendall_tau(std::span<const double> x, std::span<const double> y);

/// Pairwise tau-b matrix of the columns of `u`.
Eigen::MatrixXd kendall_tau_matrix(const RowMatrix& u);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against U(0,1).
KsResult ks_uniform(std::span<const double> x);
/// Two-sample Kolmogorov-Smirnov test.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Asymptotic Kolmogorov tail Q(lambda) with Stephens' finite-sample
/// correction for effective size `n_eff`.
double kolmogorov_p_value(double d, double n_eff);

/// Empirical quantile: the ceil(p*n)-th order statistic of `x` (which is copied).
double empirical_quantile(std::vector<double> x, double p);

}  // namespace hkc
