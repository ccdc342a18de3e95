#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hkc/generators.hpp"
#include "hkc/kendall.hpp"

namespace hkc {

class RngStream;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class CopulaKind { independence, archimedean, gaussian, student_t };

std::string_view to_string(CopulaKind k) noexcept;

struct CdfOptions {
  /// Randomized quasi-Monte Carlo points for elliptical copulas above dimension 3.
  std::size_t qmc_points = 100000;
  /// Relative tolerance of the adaptive quadrature used up to dimension 3.
  double quad_tol = 1e-11;
  /// Fixed QMC shift seed, so repeated evaluations are deterministic and monotone.
  std::uint64_t seed = 0x5EEDC0DE;
};

struct CdfValue {
  double value = 0.0;
  double std_error = 0.0;
};

/// A concrete d-dimensional copula: independence, Archimedean, Gaussian or
/// Student-t. Dimension one is the identity copula for every kind.
///
/// Density and CDF inputs strictly inside (0,1) are clamped to
/// [1e-12, 1 - 1e-12]; exact 0 and 1 coordinates of the CDF are handled
/// analytically (groundedness, uniform margins).
class Copula {
 public:
  static Copula independence(int dim);
  static Copula archimedean(Generator generator, int dim);
  static Copula gaussian(Eigen::MatrixXd corr);
  static Copula student_t(Eigen::MatrixXd corr, double nu);

  CopulaKind kind() const noexcept { return kind_; }
  int dim() const noexcept { return dim_; }
  bool is_archimedean() const noexcept { return kind_ == CopulaKind::archimedean || kind_ == CopulaKind::independence; }
  bool is_elliptical() const noexcept { return kind_ == CopulaKind::gaussian || kind_ == CopulaKind::student_t; }

  /// Generator of an Archimedean copula; the independence kind reports phi = -log t.
  const Generator& generator() const noexcept { return gen_; }
  const Eigen::MatrixXd& correlation() const noexcept { return corr_; }
  double nu() const noexcept { return nu_; }

  double cdf(std::span<const double> u, const CdfOptions& options = {}) const;
  /// CDF with the Monte Carlo standard error (zero for deterministic paths).
  CdfValue cdf_with_error(std::span<const double> u, const CdfOptions& options = {}) const;

  double log_pdf(std::span<const double> u) const;
  double pdf(std::span<const double> u) const;

  void sample_into(RngStream& rng, std::span<double> out) const;
  RowMatrix sample(std::size_t n, RngStream& rng) const;

  /// Solves C(prefix, x, 1, ..., 1) = z for x.
  double quantile_curve(std::span<const double> prefix, double z, const CdfOptions& options = {}) const;

  /// Sub-copula over the given coordinates.
  Copula margin(std::span<const std::size_t> indices) const;

  /// Draws the remaining coordinates given coordinate `k` fixed at `uk`.
  void sample_given(std::size_t k, double uk, RngStream& rng, std::span<double> out) const;

  /// Kendall's tau between coordinates i and j.
  double pair_tau(std::size_t i, std::size_t j) const;

  /// Closed-form Kendall function (Archimedean, independence and dimension one).
  KendallFunction closed_kendall() const;

  /// Short description, e.g. "clayton(theta=2)" or "student_t(d=3, nu=4)".
  std::string describe() const;

 private:
  Copula() = default;
  void prepare_elliptical();
  double archimedean_cdf(std::span<const double> u) const;
  CdfValue elliptical_cdf(std::span<const double> u, const CdfOptions& options) const;
  double marginal_quantile(double u) const;
  double marginal_cdf(double x) const;

  CopulaKind kind_ = CopulaKind::independence;
  int dim_ = 1;
  Generator gen_;
  KendallFunction kendall_;
  Eigen::MatrixXd corr_;
  Eigen::MatrixXd chol_;      // lower Cholesky factor of corr_
  Eigen::MatrixXd chol_inv_;  // its inverse
  double log_det_ = 0.0;
  double nu_ = 0.0;
  double t_const_ = 0.0;  // student-t density normalizing term
};

/// Bivariate-projected nearest correlation matrix: eigenvalues clipped at
/// `floor`, then rescaled to unit diagonal.
Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& m, double floor = 1e-6);

}  // namespace hkc
