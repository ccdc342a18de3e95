#include "hkc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hkc/errors.hpp"

namespace hkc {

namespace {

// Counts swaps while merge-sorting `v`; each swap is a discordant pair.
long long merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  long long swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<long long>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

// Sum over runs of equal values of len*(len-1)/2, for a sorted sequence.
template <class Eq>
long long tied_pairs(std::size_t n, Eq eq) {
  long long total = 0, run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (eq(i - 1, i)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total + run * (run - 1) / 2;
}

}  // namespace

double kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("kendall_tau: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw DimensionError("kendall_tau: need at least two observations");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];

  const long long n0 = static_cast<long long>(n) * static_cast<long long>(n - 1) / 2;
  const long long n1 = tied_pairs(n, [&](std::size_t a, std::size_t b) { return x[idx[a]] == x[idx[b]]; });
  const long long n3 = tied_pairs(n, [&](std::size_t a, std::size_t b) {
    return x[idx[a]] == x[idx[b]] && ys[a] == ys[b];
  });
  std::vector<double> buf(n);
  const long long swaps = merge_count(ys, buf, 0, n);
  const long long n2 = tied_pairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });

  const double denom = std::sqrt(static_cast<double>(n0 - n1)) * std::sqrt(static_cast<double>(n0 - n2));
  if (denom == 0.0) throw DomainError("kendall_tau: constant input");
  const long long concordant_minus_discordant = n0 - n1 - n2 + n3 - 2 * swaps;
  return static_cast<double>(concordant_minus_discordant) / denom;
}

Eigen::MatrixXd kendall_tau_matrix(const RowMatrix& u) {
  const auto d = u.cols();
  Eigen::MatrixXd t = Eigen::MatrixXd::Identity(d, d);
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    cols[static_cast<std::size_t>(j)].resize(static_cast<std::size_t>(u.rows()));
    for (Eigen::Index i = 0; i < u.rows(); ++i) cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = u(i, j);
  }
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = a + 1; b < d; ++b)
      t(a, b) = t(b, a) = kendall_tau(cols[static_cast<std::size_t>(a)], cols[static_cast<std::size_t>(b)]);
  return t;
}

double kolmogorov_p_value(double d, double n_eff) {
  const double sn = std::sqrt(n_eff);
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0, sign = 1.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_uniform(std::span<const double> x) {
  if (x.empty()) throw DimensionError("ks_uniform: empty sample");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = std::clamp(s[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, kolmogorov_p_value(d, n)};
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DimensionError("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return {d, kolmogorov_p_value(d, na * nb / (na + nb))};
}

double empirical_quantile(std::vector<double> x, double p) {
  if (x.empty()) throw DimensionError("empirical_quantile: empty sample");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("empirical_quantile: p must lie in (0,1)");
  auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(x.size())));
  k = std::clamp<std::size_t>(k, 1, x.size());
  std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(k - 1), x.end());
  return x[k - 1];
}

}  // namespace hkc
