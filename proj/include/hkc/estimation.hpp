#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hkc/copulas.hpp"
#include "hkc/model.hpp"
#include "hkc/optimize.hpp"

namespace hkc {

/// Rank transform rank/(N+1) per column, average ranks for ties.
RowMatrix pseudo_observations(const RowMatrix& x);

/// Copula family names as used in configs and reports.
enum class CopulaFamily { independence, clayton, gumbel, frank, gaussian, student_t };

std::string_view to_string(CopulaFamily f) noexcept;
CopulaFamily copula_family_from_string(std::string_view s);
CopulaFamily family_of(const Copula& c) noexcept;

struct ClusterFit {
  Copula copula = Copula::independence(1);
  double loglik = 0.0;
  /// "none", "mle", "tau_inversion" or "tau_inversion+mle_nu".
  std::string method;
  std::size_t evals = 0;
  bool converged = true;
};

/// Fits a copula of the given family to the columns of `u`: Archimedean by
/// one-dimensional MLE over an unconstrained transform of theta, elliptical
/// by pairwise tau inversion (plus MLE over nu for student_t).
ClusterFit fit_cluster(CopulaFamily family, const RowMatrix& u, const NelderMeadOptions& nm = {});

enum class KendallMode { closed_form, empirical };

struct FitOptions {
  KendallMode kendall_mode = KendallMode::closed_form;
  KendallBuildOptions kendall_build{};
  std::uint64_t seed = 0;
  NelderMeadOptions optimizer{};
  DensityOptions density{};
  int threads = 1;
  /// Joint MLE with elliptical clusters holds their parameters and
  /// empirical Kendall functions fixed.
  bool force_frozen_kendall = false;
};

struct NodeReport {
  std::string path;
  CopulaFamily family = CopulaFamily::independence;
  int dim = 1;
  double theta = 0.0;
  Eigen::MatrixXd corr;
  double nu = 0.0;
  std::string method;
  double loglik = 0.0;
  std::size_t evals = 0;
  bool converged = true;
  std::string kendall;
};

struct FitReport {
  std::vector<NodeReport> nodes;
  double loglik_two_step = 0.0;
  std::size_t clamped_two_step = 0;
  bool joint_run = false;
  double loglik_joint_start = 0.0;
  double loglik_joint = 0.0;
  std::size_t clamped_joint = 0;
  std::size_t joint_evals = 0;
  std::size_t joint_iterations = 0;
  bool joint_converged = true;
  std::size_t n_obs = 0;
  std::size_t n_params = 0;
  bool converged() const noexcept;
  /// Final log-likelihood: joint when run, else two-step.
  double loglik() const noexcept { return joint_run ? loglik_joint : loglik_two_step; }
};

struct FitResult {
  HierarchicalModel model;
  FitReport report;
};

/// Two-step estimation: fit the clusters bottom-up, transform them to V-values
/// with their Kendall functions, then fit each parent on the V-values.
/// The template's copulas fix the families; nodes marked `fixed` keep their
/// parameters.
FitResult fit_two_step(const HierarchicalModel& skeleton, const RowMatrix& u, const FitOptions& options = {});

/// Joint maximization of the full log-likelihood, starting from the two-step
/// estimates. Archimedean nodes use closed-form Kendall functions. The result
/// never has a lower log-likelihood than the start.
FitResult fit_joint_mle(const FitResult& start, const RowMatrix& u, const FitOptions& options = {});

/// Rebuilds every non-root Kendall function according to options.kendall_mode.
void refresh_kendall(HierarchicalModel& m, const FitOptions& options);

// Simulation study over four-dimensional models with two bivariate clusters.

enum class StudyMethod { two_step_closed, two_step_empirical, joint_mle };

std::string_view to_string(StudyMethod m) noexcept;

struct StudyConfig {
  CopulaFamily cluster1 = CopulaFamily::clayton;
  CopulaFamily cluster2 = CopulaFamily::gumbel;
  std::vector<CopulaFamily> nesting{CopulaFamily::clayton, CopulaFamily::gumbel, CopulaFamily::frank};
  std::vector<double> tau0{0.4, 0.7};
  /// (tau1, tau2) pairs.
  std::vector<std::pair<double, double>> cluster_taus{{0.4, 0.7}};
  std::vector<std::size_t> sizes{250, 500, 1000};
  std::size_t replications = 100;
  std::vector<StudyMethod> methods{StudyMethod::two_step_closed, StudyMethod::two_step_empirical,
                                   StudyMethod::joint_mle};
  std::size_t kendall_mc = 100000;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct StudyCell {
  CopulaFamily nesting = CopulaFamily::clayton;
  double tau0 = 0.0;
  double tau1 = 0.0;
  double tau2 = 0.0;
  std::size_t n = 0;
  StudyMethod method = StudyMethod::two_step_closed;
  std::size_t ok = 0;
  std::size_t failed = 0;
  double bias = 0.0;
  double sd = 0.0;
  double mse = 0.0;
};

/// Simulates each cell `replications` times and reports bias, SD and MSE of
/// the nesting tau estimate per method. Replication r of a cell uses streams
/// derived from (seed, cell, r), so results do not depend on thread count.
std::vector<StudyCell> simulation_study(const StudyConfig& config);

/// Kendall's tau of a bivariate copula (generator tau or (2/pi) asin rho).
double copula_tau(const Copula& c);
/// Copula of a family with the given pairwise tau (equicorrelated for
/// gaussian; student_t is not supported since tau does not fix nu).
Copula copula_from_tau(CopulaFamily family, double tau, int dim = 2);

}  // namespace hkc
