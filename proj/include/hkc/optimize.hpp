#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace hkc {

struct NelderMeadOptions {
  std::size_t max_evals = 5000;
  /// Converged when max f - min f over the simplex falls below this.
  double f_tol = 1e-8;
  /// Initial simplex edge along each axis.
  double step = 0.25;
  /// Restarts from the best vertex after convergence, to catch collapsed simplices.
  int restarts = 1;
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  std::size_t evals = 0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Minimizes `f` by the Nelder-Mead simplex method. Non-finite values are
/// treated as +infinity. The start point is a vertex, so the result is never
/// worse than f(x0).
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                             const NelderMeadOptions& options = {});

}  // namespace hkc
