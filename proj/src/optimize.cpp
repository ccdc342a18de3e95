#include "hkc/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hkc/errors.hpp"

namespace hkc {

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                             const NelderMeadOptions& options) {
  const std::size_t n = x0.size();
  if (n == 0) throw DimensionError("nelder_mead: empty parameter vector");
  NelderMeadResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<double> best_x = x0;
  double best_f = eval(x0);

  for (int round = 0; round <= options.restarts; ++round) {
    std::vector<std::vector<double>> simplex(n + 1, best_x);
    std::vector<double> fv(n + 1);
    fv[0] = best_f;
    for (std::size_t i = 0; i < n; ++i) {
      simplex[i + 1][i] += options.step;
      fv[i + 1] = eval(simplex[i + 1]);
    }
    std::vector<std::size_t> order(n + 1);
    bool converged = false;
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    while (res.evals < options.max_evals) {
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
      const std::size_t lo = order.front(), hi = order.back(), second = order[n - 1];
      if (std::isfinite(fv[hi]) && fv[hi] - fv[lo] < options.f_tol) {
        converged = true;
        break;
      }
      ++res.iterations;
      std::fill(centroid.begin(), centroid.end(), 0.0);
      for (std::size_t i = 0; i <= n; ++i)
        if (i != hi)
          for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / static_cast<double>(n);

      for (std::size_t k = 0; k < n; ++k) xr[k] = centroid[k] + (centroid[k] - simplex[hi][k]);
      const double fr = eval(xr);
      if (fr < fv[lo]) {
        for (std::size_t k = 0; k < n; ++k) xe[k] = centroid[k] + 2.0 * (centroid[k] - simplex[hi][k]);
        const double fe = eval(xe);
        if (fe < fr) {
          simplex[hi] = xe;
          fv[hi] = fe;
        } else {
          simplex[hi] = xr;
          fv[hi] = fr;
        }
        continue;
      }
      if (fr < fv[second]) {
        simplex[hi] = xr;
        fv[hi] = fr;
        continue;
      }
      const bool outside = fr < fv[hi];
      for (std::size_t k = 0; k < n; ++k)
        xc[k] = outside ? centroid[k] + 0.5 * (xr[k] - centroid[k]) : centroid[k] + 0.5 * (simplex[hi][k] - centroid[k]);
      const double fc = eval(xc);
      if (fc < (outside ? fr : fv[hi])) {
        simplex[hi] = xc;
        fv[hi] = fc;
        continue;
      }
      for (std::size_t i = 0; i <= n; ++i) {
        if (i == lo) continue;
        for (std::size_t k = 0; k < n; ++k) simplex[i][k] = simplex[lo][k] + 0.5 * (simplex[i][k] - simplex[lo][k]);
        fv[i] = eval(simplex[i]);
      }
    }
    const auto lo = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    const bool improved = fv[lo] < best_f;
    if (fv[lo] <= best_f) {
      best_f = fv[lo];
      best_x = simplex[lo];
    }
    res.converged = converged;
    if (!converged || (round > 0 && !improved)) break;
  }
  res.x = best_x;
  res.f = best_f;
  return res;
}

}  // namespace hkc
