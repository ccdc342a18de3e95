#include "hkc/copulas.hpp"

#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/owens_t.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "hkc/errors.hpp"
#include "hkc/levelset.hpp"
#include "hkc/rng.hpp"
#include "hkc/special.hpp"

namespace hkc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_gaussian_dof(double nu) { return std::isinf(nu); }

double elliptical_marginal_cdf(double x, double nu) {
  return is_gaussian_dof(nu) ? special::normal_cdf(x) : special::student_t_cdf(x, nu);
}

double elliptical_marginal_log_pdf(double x, double nu) {
  return is_gaussian_dof(nu) ? special::normal_log_pdf(x) : special::student_t_log_pdf(x, nu);
}

// Frailty variable V with E[exp(-sV)] = psi(s): gamma for clayton, positive
// stable (Kanter's representation) for gumbel, logarithmic series (Kemp's
// LK algorithm) for frank.
double frailty(const Generator& g, RngStream& rng) {
  const double theta = g.theta();
  switch (g.family()) {
    case Family::independence:
      return 1.0;
    case Family::clayton:
      return rng.gamma(1.0 / theta);
    case Family::gumbel: {
      const double a = 1.0 / theta;
      if (a == 1.0) return 1.0;
      const double th = std::numbers::pi * rng.uniform();
      const double w = rng.exponential();
      return std::sin(a * th) / std::pow(std::sin(th), 1.0 / a) * std::pow(std::sin((1.0 - a) * th) / w, (1.0 - a) / a);
    }
    case Family::frank: {
      const double p = -std::expm1(-theta);
      const double u2 = rng.uniform();
      if (u2 > p) return 1.0;
      const double q = -std::expm1(-theta * rng.uniform());
      if (u2 < q * q) return std::floor(1.0 + std::log(u2) / std::log(q));
      return u2 > q ? 1.0 : 2.0;
    }
  }
  return 1.0;
}

// Bivariate standard normal P(X <= h, Y <= k) with correlation rho, via
// Owen's T function.
double bivariate_normal_cdf(double h, double k, double rho) {
  if (std::isinf(h) || std::isinf(k)) {
    if (h == -kInf || k == -kInf) return 0.0;
    return h == kInf ? special::normal_cdf(k) : special::normal_cdf(h);
  }
  const double s = std::sqrt((1.0 - rho) * (1.0 + rho));
  if (h == 0.0 && k == 0.0) return 0.25 + std::asin(rho) / (2.0 * std::numbers::pi);
  auto owen = [&](double x, double y) {
    // T(x, (y - rho x) / (x s)), with the a -> +-inf limit at x = 0
    if (x == 0.0) return std::copysign(0.25, y);
    return boost::math::owens_t(x, (y - rho * x) / (x * s));
  };
  const double beta = (h * k > 0.0 || (h * k == 0.0 && h + k >= 0.0)) ? 0.0 : 0.5;
  const double p = 0.5 * special::normal_cdf(h) + 0.5 * special::normal_cdf(k) - owen(h, k) - owen(k, h) - beta;
  return std::clamp(p, 0.0, std::min(special::normal_cdf(h), special::normal_cdf(k)));
}

// P(X <= a) for a standardized elliptical vector with correlation r and
// degrees of freedom nu (infinite for Gaussian), by conditioning on X_0 and
// integrating the conditional probability of the rest (dimension <= 3).
double elliptical_quad(const std::vector<double>& a, const Eigen::MatrixXd& r, double nu, double tol) {
  const auto d = static_cast<Eigen::Index>(a.size());
  if (d == 1) return elliptical_marginal_cdf(a[0], nu);
  for (double ai : a)
    if (ai == -kInf) return 0.0;
  if (d == 2 && is_gaussian_dof(nu)) return bivariate_normal_cdf(a[0], a[1], r(0, 1));

  const Eigen::VectorXd r1 = r.col(0).tail(d - 1);
  const Eigen::MatrixXd s = r.bottomRightCorner(d - 1, d - 1) - r1 * r1.transpose();
  Eigen::VectorXd sd(d - 1);
  for (Eigen::Index i = 0; i < d - 1; ++i) sd(i) = std::sqrt(std::max(s(i, i), 0.0));
  Eigen::MatrixXd rc = Eigen::MatrixXd::Identity(d - 1, d - 1);
  for (Eigen::Index i = 0; i < d - 1; ++i)
    for (Eigen::Index j = 0; j < d - 1; ++j)
      if (i != j && sd(i) > 1e-12 && sd(j) > 1e-12) rc(i, j) = s(i, j) / (sd(i) * sd(j));
  const double nu_cond = is_gaussian_dof(nu) ? nu : nu + 1.0;

  std::vector<double> b(static_cast<std::size_t>(d - 1));
  auto integrand = [&](double x) {
    if (!std::isfinite(x)) return 0.0;
    const double kappa = is_gaussian_dof(nu) ? 1.0 : std::sqrt((nu + x * x) / (nu + 1.0));
    for (Eigen::Index i = 0; i < d - 1; ++i) {
      const double shift = a[static_cast<std::size_t>(i + 1)] - r1(i) * x;
      if (sd(i) <= 1e-12)
        b[static_cast<std::size_t>(i)] = shift >= 0.0 ? kInf : -kInf;
      else
        b[static_cast<std::size_t>(i)] = shift / (sd(i) * kappa);
    }
    double inner;
    if (d == 2) {
      inner = std::isinf(b[0]) ? (b[0] > 0 ? 1.0 : 0.0) : elliptical_marginal_cdf(b[0], nu_cond);
    } else {
      std::vector<double> bb = b;
      inner = elliptical_quad(bb, rc, nu_cond, tol);
    }
    return inner * std::exp(elliptical_marginal_log_pdf(x, nu));
  };
  // The Gaussian outer density is negligible below -12 (mass ~2e-33), while
  // cdf arguments never fall below about -7 after interior clamping.
  const double lower = is_gaussian_dof(nu) ? std::min(-12.0, a[0] - 1.0) : -kInf;
  const double p = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, lower, a[0], 12, tol);
  return std::clamp(p, 0.0, 1.0);
}

// Genz separation-of-variables estimator with randomized Kronecker lattice
// points (baker-transformed, antithetic); standard error over random shifts.
CdfValue elliptical_sov(const std::vector<double>& a, const Eigen::MatrixXd& r, double nu, std::size_t points,
                        std::uint64_t seed) {
  const auto d = static_cast<int>(a.size());
  const Eigen::MatrixXd l = r.llt().matrixL();
  const bool t_kind = !is_gaussian_dof(nu);
  const int dims = t_kind ? d : d - 1;
  static constexpr std::array<double, 40> primes = {2,   3,   5,   7,   11,  13,  17,  19,  23,  29,
                                                    31,  37,  41,  43,  47,  53,  59,  61,  67,  71,
                                                    73,  79,  83,  89,  97,  101, 103, 107, 109, 113,
                                                    127, 131, 137, 139, 149, 151, 157, 163, 167, 173};
  if (dims > static_cast<int>(primes.size())) throw DimensionError("elliptical CDF: dimension too large for QMC rule");
  std::vector<double> alpha(static_cast<std::size_t>(dims));
  for (int i = 0; i < dims; ++i) alpha[i] = std::fmod(std::sqrt(primes[static_cast<std::size_t>(i)]), 1.0);

  constexpr int shifts = 10;
  const std::size_t per_shift = std::max<std::size_t>(1, points / (2 * shifts));
  std::vector<double> w(static_cast<std::size_t>(dims)), y(static_cast<std::size_t>(d));
  auto integrand = [&](const std::vector<double>& ww) {
    double scale = 1.0;
    int off = 0;
    if (t_kind) {
      const double q = std::clamp(ww[0], 1e-300, 1.0 - 1e-16);
      scale = std::sqrt(2.0 * boost::math::gamma_p_inv(0.5 * nu, q) / nu);
      off = 1;
    }
    double e = special::normal_cdf(a[0] * scale / l(0, 0));
    double f = e;
    for (int i = 1; i < d; ++i) {
      const double p = std::clamp(ww[static_cast<std::size_t>(off + i - 1)] * e, 1e-300, 1.0 - 1e-16);
      y[static_cast<std::size_t>(i - 1)] = special::normal_quantile(p);
      double sum = 0.0;
      for (int j = 0; j < i; ++j) sum += l(i, j) * y[static_cast<std::size_t>(j)];
      e = special::normal_cdf((a[static_cast<std::size_t>(i)] * scale - sum) / l(i, i));
      f *= e;
      if (f == 0.0) break;
    }
    return f;
  };

  std::array<double, shifts> means{};
  for (int s = 0; s < shifts; ++s) {
    RngStream rng = RngStream::derive(seed, {static_cast<std::uint64_t>(s)});
    std::vector<double> shift(static_cast<std::size_t>(dims));
    for (auto& v : shift) v = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 1; i <= per_shift; ++i) {
      for (int k = 0; k < dims; ++k) {
        const double frac = std::fmod(static_cast<double>(i) * alpha[static_cast<std::size_t>(k)] + shift[static_cast<std::size_t>(k)], 1.0);
        w[static_cast<std::size_t>(k)] = std::abs(2.0 * frac - 1.0);
      }
      acc += integrand(w);
      for (auto& v : w) v = 1.0 - v;
      acc += integrand(w);
    }
    means[static_cast<std::size_t>(s)] = acc / static_cast<double>(2 * per_shift);
  }
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= shifts;
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  var /= (shifts - 1);
  return {std::clamp(mean, 0.0, 1.0), std::sqrt(var / shifts)};
}

Eigen::MatrixXd validated_correlation(Eigen::MatrixXd corr) {
  if (corr.rows() != corr.cols() || corr.rows() < 1) throw DimensionError("correlation matrix must be square and non-empty");
  const auto d = corr.rows();
  for (Eigen::Index i = 0; i < d; ++i) {
    if (std::abs(corr(i, i) - 1.0) > 1e-10) throw ParameterError("correlation matrix must have unit diagonal");
    corr(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      if (!std::isfinite(corr(i, j)) || std::abs(corr(i, j) - corr(j, i)) > 1e-10)
        throw ParameterError("correlation matrix must be symmetric and finite");
      const double m = 0.5 * (corr(i, j) + corr(j, i));
      corr(i, j) = corr(j, i) = m;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 1e-10) throw ParameterError("correlation matrix must be positive definite");
  return corr;
}

}  // namespace

std::string_view to_string(CopulaKind k) noexcept {
  switch (k) {
    case CopulaKind::independence:
      return "independence";
    case CopulaKind::archimedean:
      return "archimedean";
    case CopulaKind::gaussian:
      return "gaussian";
    case CopulaKind::student_t:
      return "student_t";
  }
  return "unknown";
}

Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& m, double floor) {
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor);
  Eigen::MatrixXd out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  const Eigen::VectorXd inv_sd = out.diagonal().cwiseSqrt().cwiseInverse();
  out = inv_sd.asDiagonal() * out * inv_sd.asDiagonal();
  out.diagonal().setOnes();
  return 0.5 * (out + out.transpose());
}

Copula Copula::independence(int dim) {
  if (dim < 1) throw DimensionError("copula dimension must be >= 1");
  Copula c;
  c.kind_ = CopulaKind::independence;
  c.dim_ = dim;
  c.kendall_ = dim == 1 ? KendallFunction::identity() : KendallFunction::closed_form(Generator::independence(), dim);
  return c;
}

Copula Copula::archimedean(Generator generator, int dim) {
  if (dim < 1) throw DimensionError("copula dimension must be >= 1");
  if (dim > Generator::kMaxOrder) throw DimensionError("Archimedean dimension exceeds the supported derivative order");
  if (dim > 2 && !generator.completely_monotone())
    throw ParameterError("frank with negative theta is only valid in dimension 2");
  Copula c;
  c.kind_ = CopulaKind::archimedean;
  c.dim_ = dim;
  c.kendall_ = dim == 1 ? KendallFunction::identity() : KendallFunction::closed_form(generator, dim);
  c.gen_ = std::move(generator);
  return c;
}

Copula Copula::gaussian(Eigen::MatrixXd corr) {
  Copula c;
  c.kind_ = CopulaKind::gaussian;
  c.corr_ = validated_correlation(std::move(corr));
  c.dim_ = static_cast<int>(c.corr_.rows());
  c.nu_ = kInf;
  c.prepare_elliptical();
  return c;
}

Copula Copula::student_t(Eigen::MatrixXd corr, double nu) {
  if (!(nu > 2.0) || !std::isfinite(nu)) throw ParameterError("student_t requires finite nu > 2");
  Copula c;
  c.kind_ = CopulaKind::student_t;
  c.corr_ = validated_correlation(std::move(corr));
  c.dim_ = static_cast<int>(c.corr_.rows());
  c.nu_ = nu;
  c.prepare_elliptical();
  return c;
}

void Copula::prepare_elliptical() {
  Eigen::LLT<Eigen::MatrixXd> llt(corr_);
  chol_ = llt.matrixL();
  chol_inv_ = chol_.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(dim_, dim_));
  log_det_ = 2.0 * chol_.diagonal().array().log().sum();
  if (kind_ == CopulaKind::student_t) {
    const double d = dim_;
    t_const_ = std::lgamma(0.5 * (nu_ + d)) + (d - 1.0) * std::lgamma(0.5 * nu_) - d * std::lgamma(0.5 * (nu_ + 1.0)) -
               0.5 * log_det_;
  }
}

double Copula::marginal_quantile(double u) const {
  return kind_ == CopulaKind::gaussian ? special::normal_quantile(u) : special::student_t_quantile(u, nu_);
}

double Copula::marginal_cdf(double x) const { return elliptical_marginal_cdf(x, nu_); }

double Copula::archimedean_cdf(std::span<const double> u) const {
  double s = 0.0;
  for (double ui : u) {
    if (ui <= 0.0) return 0.0;
    if (ui >= 1.0) continue;
    s += gen_.value(clamp_interior(ui));
  }
  return gen_.inverse(s);
}

CdfValue Copula::elliptical_cdf(std::span<const double> u, const CdfOptions& options) const {
  std::vector<std::size_t> idx;
  idx.reserve(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] <= 0.0) return {0.0, 0.0};
    if (u[i] < 1.0) idx.push_back(i);
  }
  if (idx.empty()) return {1.0, 0.0};
  if (idx.size() == 1) return {u[idx[0]], 0.0};
  const auto m = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd sub(m, m);
  std::vector<double> a(idx.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    a[static_cast<std::size_t>(i)] = marginal_quantile(clamp_interior(u[idx[static_cast<std::size_t>(i)]]));
    for (Eigen::Index j = 0; j < m; ++j)
      sub(i, j) = corr_(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]), static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]));
  }
  if (m <= 3) return {elliptical_quad(a, sub, nu_, options.quad_tol), 0.0};
  return elliptical_sov(a, sub, nu_, options.qmc_points, options.seed);
}

CdfValue Copula::cdf_with_error(std::span<const double> u, const CdfOptions& options) const {
  if (static_cast<int>(u.size()) != dim_)
    throw DimensionError("copula cdf: expected " + std::to_string(dim_) + " coordinates, got " + std::to_string(u.size()));
  for (double ui : u)
    if (std::isnan(ui)) throw DomainError("copula cdf: NaN coordinate");
  switch (kind_) {
    case CopulaKind::independence: {
      double p = 1.0;
      for (double ui : u) {
        if (ui <= 0.0) return {0.0, 0.0};
        if (ui < 1.0) p *= clamp_interior(ui);
      }
      return {p, 0.0};
    }
    case CopulaKind::archimedean:
      return {archimedean_cdf(u), 0.0};
    case CopulaKind::gaussian:
    case CopulaKind::student_t:
      return elliptical_cdf(u, options);
  }
  return {};
}

double Copula::cdf(std::span<const double> u, const CdfOptions& options) const { return cdf_with_error(u, options).value; }

double Copula::log_pdf(std::span<const double> u) const {
  if (static_cast<int>(u.size()) != dim_)
    throw DimensionError("copula pdf: expected " + std::to_string(dim_) + " coordinates, got " + std::to_string(u.size()));
  if (dim_ == 1 || kind_ == CopulaKind::independence) return 0.0;
  switch (kind_) {
    case CopulaKind::archimedean: {
      double s = 0.0, log_dphi = 0.0;
      for (double ui : u) {
        const double w = clamp_interior(ui);
        s += gen_.value(w);
        log_dphi += std::log(-gen_.derivative(w));
      }
      const double ld = gen_.log_abs_inverse_derivative(s, dim_);
      return ld + log_dphi;
    }
    case CopulaKind::gaussian:
    case CopulaKind::student_t: {
      std::array<double, 64> xs_buf{};
      std::vector<double> xs_heap;
      double* x = xs_buf.data();
      if (dim_ > 64) {
        xs_heap.resize(static_cast<std::size_t>(dim_));
        x = xs_heap.data();
      }
      for (int i = 0; i < dim_; ++i) x[i] = marginal_quantile(clamp_interior(u[static_cast<std::size_t>(i)]));
      double q = 0.0, xx = 0.0, marg = 0.0;
      for (int i = 0; i < dim_; ++i) {
        double yi = 0.0;
        for (int j = 0; j <= i; ++j) yi += chol_inv_(i, j) * x[j];
        q += yi * yi;
        xx += x[i] * x[i];
        if (kind_ == CopulaKind::student_t) marg += std::log1p(x[i] * x[i] / nu_);
      }
      if (kind_ == CopulaKind::gaussian) return -0.5 * log_det_ - 0.5 * (q - xx);
      return t_const_ - 0.5 * (nu_ + dim_) * std::log1p(q / nu_) + 0.5 * (nu_ + 1.0) * marg;
    }
    default:
      return 0.0;
  }
}

double Copula::pdf(std::span<const double> u) const {
  const double v = std::exp(log_pdf(u));
  if (!std::isfinite(v)) throw NumericError("copula pdf: non-finite density");
  return v;
}

void Copula::sample_into(RngStream& rng, std::span<double> out) const {
  if (static_cast<int>(out.size()) != dim_) throw DimensionError("copula sample: output size mismatch");
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  if (dim_ == 1 || kind_ == CopulaKind::independence) {
    for (auto& v : out) v = rng.uniform();
    return;
  }
  switch (kind_) {
    case CopulaKind::archimedean: {
      if (gen_.completely_monotone()) {
        // Marshall-Olkin: U_i = psi(E_i / V) with V the frailty whose Laplace transform is psi.
        const double v = frailty(gen_, rng);
        for (auto& x : out) x = std::clamp(gen_.inverse(rng.exponential() / v), lo, hi);
        return;
      }
      const double z = kendall_.inverse(rng.uniform());
      std::array<double, Generator::kMaxOrder> v{};
      for (int j = 0; j + 1 < dim_; ++j) v[static_cast<std::size_t>(j)] = rng.uniform();
      levelset_conditional_from_uniforms(gen_, dim_, z, std::span<const double>(v.data(), static_cast<std::size_t>(dim_ - 1)), out);
      for (auto& x : out) x = std::clamp(x, lo, hi);
      return;
    }
    case CopulaKind::gaussian:
    case CopulaKind::student_t: {
      std::array<double, 64> z_buf{};
      std::vector<double> z_heap;
      double* z = z_buf.data();
      if (dim_ > 64) {
        z_heap.resize(static_cast<std::size_t>(dim_));
        z = z_heap.data();
      }
      for (int i = 0; i < dim_; ++i) z[i] = rng.normal();
      const double scale = kind_ == CopulaKind::student_t ? 1.0 / std::sqrt(rng.chi_square(nu_) / nu_) : 1.0;
      for (int i = 0; i < dim_; ++i) {
        double x = 0.0;
        for (int j = 0; j <= i; ++j) x += chol_(i, j) * z[j];
        out[static_cast<std::size_t>(i)] = std::clamp(marginal_cdf(x * scale), lo, hi);
      }
      return;
    }
    default:
      return;
  }
}

RowMatrix Copula::sample(std::size_t n, RngStream& rng) const {
  RowMatrix out(static_cast<Eigen::Index>(n), dim_);
  for (std::size_t i = 0; i < n; ++i)
    sample_into(rng, std::span<double>(out.row(static_cast<Eigen::Index>(i)).data(), static_cast<std::size_t>(dim_)));
  return out;
}

double Copula::quantile_curve(std::span<const double> prefix, double z, const CdfOptions& options) const {
  if (!(z > 0.0 && z < 1.0)) throw DomainError("quantile curve: z must lie in (0,1)");
  if (static_cast<int>(prefix.size()) >= dim_) throw DimensionError("quantile curve: prefix must be shorter than the dimension");
  if (prefix.empty()) return z;
  for (double p : prefix)
    if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile curve: prefix must lie in (0,1)");

  if (is_archimedean()) {
    const Generator& gen = gen_;
    double rest = gen.value(z);
    for (double p : prefix) rest -= gen.value(p);
    if (!(rest > 0.0)) throw NoSolutionError("quantile curve: level z is not below C(prefix, 1, ..., 1)");
    return gen.inverse(rest);
  }

  std::vector<std::size_t> idx(prefix.size() + 1);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const Copula sub = margin(idx);
  std::vector<double> point(prefix.begin(), prefix.end());
  point.push_back(1.0);
  const CdfValue top = sub.cdf_with_error(point, options);
  if (!(top.value > z)) throw NoSolutionError("quantile curve: level z is not below C(prefix, 1, ..., 1)");
  double lo = 0.0, hi = 1.0;
  CdfValue at{};
  for (int iter = 0; iter < 200 && hi - lo > 1e-15; ++iter) {
    const double mid = 0.5 * (lo + hi);
    point.back() = mid;
    at = sub.cdf_with_error(point, options);
    (at.value < z ? lo : hi) = mid;
  }
  const double x = 0.5 * (lo + hi);
  point.back() = x;
  at = sub.cdf_with_error(point, options);
  if (std::abs(at.value - z) > 1e-8 + 4.0 * at.std_error)
    throw NumericError("quantile curve: bisection tolerance not met");
  return x;
}

Copula Copula::margin(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw DimensionError("margin: empty index set");
  for (std::size_t i : indices)
    if (static_cast<int>(i) >= dim_) throw DimensionError("margin: index out of range");
  const int m = static_cast<int>(indices.size());
  switch (kind_) {
    case CopulaKind::independence:
      return independence(m);
    case CopulaKind::archimedean:
      return archimedean(gen_, m);
    case CopulaKind::gaussian:
    case CopulaKind::student_t: {
      Eigen::MatrixXd sub(m, m);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
          sub(i, j) = corr_(static_cast<Eigen::Index>(indices[static_cast<std::size_t>(i)]),
                            static_cast<Eigen::Index>(indices[static_cast<std::size_t>(j)]));
      return kind_ == CopulaKind::gaussian ? gaussian(sub) : student_t(sub, nu_);
    }
  }
  throw DimensionError("margin: unknown kind");
}

void Copula::sample_given(std::size_t k, double uk, RngStream& rng, std::span<double> out) const {
  if (static_cast<int>(out.size()) != dim_ || static_cast<int>(k) >= dim_) throw DimensionError("sample_given: bad index or size");
  out[k] = uk;
  if (dim_ == 1) return;
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  const double w = clamp_interior(uk);
  switch (kind_) {
    case CopulaKind::independence:
      for (std::size_t i = 0; i < out.size(); ++i)
        if (i != k) out[i] = rng.uniform();
      return;
    case CopulaKind::archimedean: {
      // Sequential conditional inversion in generator space:
      // F(u | previous) = psi^{(m)}(S + phi(u)) / psi^{(m)}(S).
      double s = gen_.value(w);
      int m = 1;
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (i == k) continue;
        const double target = gen_.log_abs_inverse_derivative(s, m) + std::log(rng.uniform());
        double a = 0.0, b = 1.0;
        while (gen_.log_abs_inverse_derivative(s + b, m) > target && b < 1e300) b *= 2.0;
        for (int iter = 0; iter < 200 && b - a > 1e-14 * (1.0 + a); ++iter) {
          const double mid = 0.5 * (a + b);
          (gen_.log_abs_inverse_derivative(s + mid, m) > target ? a : b) = mid;
        }
        const double t = 0.5 * (a + b);
        out[i] = std::clamp(gen_.inverse(t), lo, hi);
        s += t;
        ++m;
      }
      return;
    }
    case CopulaKind::gaussian:
    case CopulaKind::student_t: {
      const auto d = static_cast<Eigen::Index>(dim_);
      const auto kk = static_cast<Eigen::Index>(k);
      const double xk = marginal_quantile(w);
      std::vector<Eigen::Index> rest;
      for (Eigen::Index i = 0; i < d; ++i)
        if (i != kk) rest.push_back(i);
      const auto m = static_cast<Eigen::Index>(rest.size());
      Eigen::MatrixXd cov(m, m);
      Eigen::VectorXd mean(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        mean(i) = corr_(rest[static_cast<std::size_t>(i)], kk) * xk;
        for (Eigen::Index j = 0; j < m; ++j)
          cov(i, j) = corr_(rest[static_cast<std::size_t>(i)], rest[static_cast<std::size_t>(j)]) -
                      corr_(rest[static_cast<std::size_t>(i)], kk) * corr_(rest[static_cast<std::size_t>(j)], kk);
      }
      const Eigen::MatrixXd l = cov.llt().matrixL();
      Eigen::VectorXd z(m);
      for (Eigen::Index i = 0; i < m; ++i) z(i) = rng.normal();
      double scale = 1.0;
      if (kind_ == CopulaKind::student_t) {
        const double nu1 = nu_ + 1.0;
        scale = std::sqrt((nu_ + xk * xk) / nu1) / std::sqrt(rng.chi_square(nu1) / nu1);
      }
      const Eigen::VectorXd x = mean + scale * (l * z);
      for (Eigen::Index i = 0; i < m; ++i)
        out[static_cast<std::size_t>(rest[static_cast<std::size_t>(i)])] = std::clamp(marginal_cdf(x(i)), lo, hi);
      return;
    }
  }
}

double Copula::pair_tau(std::size_t i, std::size_t j) const {
  if (static_cast<int>(std::max(i, j)) >= dim_ || i == j) throw DimensionError("pair_tau: invalid coordinate pair");
  switch (kind_) {
    case CopulaKind::independence:
      return 0.0;
    case CopulaKind::archimedean:
      return gen_.tau();
    case CopulaKind::gaussian:
    case CopulaKind::student_t:
      return 2.0 / std::numbers::pi *
             std::asin(corr_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  }
  return 0.0;
}

KendallFunction Copula::closed_kendall() const {
  if (dim_ == 1) return KendallFunction::identity();
  if (is_elliptical()) throw NumericError("elliptical copulas have no closed-form Kendall function");
  return kendall_;
}

std::string Copula::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case CopulaKind::independence:
      os << "independence(d=" << dim_ << ")";
      break;
    case CopulaKind::archimedean:
      os << to_string(gen_.family()) << "(d=" << dim_ << ", theta=" << gen_.theta() << ")";
      break;
    case CopulaKind::gaussian:
      os << "gaussian(d=" << dim_ << ")";
      break;
    case CopulaKind::student_t:
      os << "student_t(d=" << dim_ << ", nu=" << nu_ << ")";
      break;
  }
  return os.str();
}

}  // namespace hkc
