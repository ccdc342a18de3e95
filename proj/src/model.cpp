#include "hkc/model.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

#include "hkc/errors.hpp"
#include "hkc/rng.hpp"
#include "hkc/special.hpp"

namespace hkc {

namespace {

constexpr std::uint64_t kKendallStream = 0x4B454E44;  // "KEND"

std::string variable_label(const HierarchicalModel& m, std::size_t i) {
  if (i < m.variables.size() && !m.variables[i].empty()) return "'" + m.variables[i] + "'";
  return std::to_string(i + 1);
}

// Small-size-optimized scratch vector.
class Scratch {
 public:
  explicit Scratch(std::size_t n) : n_(n) {
    if (n > fixed_.size()) heap_.resize(n);
  }
  double* data() noexcept { return n_ > fixed_.size() ? heap_.data() : fixed_.data(); }
  std::span<double> span() noexcept { return {data(), n_}; }
  double& operator[](std::size_t i) noexcept { return data()[i]; }

 private:
  std::size_t n_;
  std::array<double, 32> fixed_{};
  std::vector<double> heap_;
};

// C-value of a node at a data row (the argument of its Kendall function).
double node_cdf(const ModelNode& node, std::span<const double> u, const DensityOptions& opt) {
  const std::size_t a = node.arity();
  Scratch args(a);
  if (node.is_leaf()) {
    for (std::size_t i = 0; i < a; ++i) args[i] = clamp_interior(u[node.columns[i]]);
  } else {
    for (std::size_t i = 0; i < a; ++i) {
      const ModelNode& c = node.children[i];
      args[i] = clamp_interior(c.kendall.cdf(node_cdf(c, u, opt)));
    }
  }
  if (a == 1) return args[0];
  return node.copula.cdf(args.span(), opt.cdf);
}

// Log density of the subtree below `node`; stores the node's C-value in
// *c_out when requested.
double node_log_density(const ModelNode& node, std::span<const double> u, const DensityOptions& opt, double* c_out) {
  const std::size_t a = node.arity();
  Scratch args(a);
  double acc = 0.0;
  if (node.is_leaf()) {
    for (std::size_t i = 0; i < a; ++i) args[i] = clamp_interior(u[node.columns[i]]);
  } else {
    for (std::size_t i = 0; i < a; ++i) {
      const ModelNode& c = node.children[i];
      double cv = 0.0;
      acc += node_log_density(c, u, opt, &cv);
      args[i] = clamp_interior(c.kendall.cdf(cv));
    }
  }
  if (a > 1) acc += node.copula.log_pdf(args.span());
  if (c_out) *c_out = a == 1 ? args[0] : node.copula.cdf(args.span(), opt.cdf);
  return acc;
}

void collect_leaves(const ModelNode& node, std::size_t depth, std::vector<std::size_t>& depths,
                    std::map<std::size_t, std::size_t>& widths) {
  ++widths[depth];
  if (node.is_leaf()) {
    depths.push_back(depth);
    return;
  }
  for (const auto& c : node.children) collect_leaves(c, depth + 1, depths, widths);
}

void prepare_recursive(ModelNode& node, std::size_t& index, const KendallPolicy& policy, bool is_root) {
  if (!is_root) prepare_kendall(node, index, policy);
  ++index;
  for (auto& c : node.children) prepare_recursive(c, index, policy, false);
}

}  // namespace

std::vector<std::string> validate_model(const HierarchicalModel& m, std::size_t n_vars) {
  std::vector<std::string> issues;
  std::vector<std::string> owner(n_vars);
  bool is_root = true;
  for_each_node(m.root, [&](const ModelNode& node, const std::string& path) {
    const bool root_here = is_root;
    is_root = false;
    if (node.name.empty()) issues.push_back(path + ": node has no name");
    if (node.children.empty() && node.columns.empty()) issues.push_back(path + ": node has neither children nor columns");
    if (!node.children.empty() && !node.columns.empty()) issues.push_back(path + ": node has both children and columns");
    if (node.arity() > 0 && static_cast<std::size_t>(node.copula.dim()) != node.arity())
      issues.push_back(path + ": dimension mismatch, copula has dimension " + std::to_string(node.copula.dim()) +
                       " but the node has " + std::to_string(node.arity()) + " arguments");
    if (!root_here && node.kendall.dim() != node.copula.dim())
      issues.push_back(path + ": Kendall function dimension " + std::to_string(node.kendall.dim()) +
                       " differs from copula dimension " + std::to_string(node.copula.dim()));
    for (std::size_t col : node.columns) {
      if (col >= n_vars) {
        issues.push_back(path + ": variable " + std::to_string(col + 1) + " out of range (" + std::to_string(n_vars) +
                         " variables)");
        continue;
      }
      if (!owner[col].empty())
        issues.push_back("overlap: variable " + variable_label(m, col) + " appears in " + owner[col] + " and " + path);
      else
        owner[col] = path;
    }
  });
  for (std::size_t i = 0; i < n_vars; ++i)
    if (owner[i].empty()) issues.push_back("gap: variable " + variable_label(m, i) + " belongs to no cluster");

  std::vector<std::size_t> depths;
  std::map<std::size_t, std::size_t> widths;
  collect_leaves(m.root, 0, depths, widths);
  if (!depths.empty() && std::adjacent_find(depths.begin(), depths.end(), std::not_equal_to<>()) != depths.end())
    issues.push_back("levels: all clusters must sit at the same depth below the root");
  for (auto it = widths.begin(); it != widths.end() && std::next(it) != widths.end(); ++it)
    if (std::next(it)->second < it->second)
      issues.push_back("levels: width ordering violated, level " + std::to_string(std::next(it)->first) + " has " +
                       std::to_string(std::next(it)->second) + " nodes but level " + std::to_string(it->first) +
                       " has " + std::to_string(it->second));
  return issues;
}

void require_valid(const HierarchicalModel& m, std::size_t n_vars) {
  auto issues = validate_model(m, n_vars);
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

void prepare_kendall(ModelNode& node, std::size_t preorder_index, const KendallPolicy& policy) {
  const int d = node.copula.dim();
  if (d == 1) {
    node.kendall = KendallFunction::identity();
  } else if (node.copula.is_archimedean() && !policy.force_empirical) {
    node.kendall = node.copula.closed_kendall();
  } else {
    RngStream rng = RngStream::derive(policy.seed, {kKendallStream, preorder_index});
    node.kendall = empirical_kendall_build(node.copula, rng, policy.build);
  }
}

void prepare_kendall(HierarchicalModel& m, const KendallPolicy& policy) {
  std::size_t index = 0;
  prepare_recursive(m.root, index, policy, true);
}

RowMatrix node_pit(const ModelNode& node, const RowMatrix& u, const DensityOptions& options) {
  const auto a = static_cast<Eigen::Index>(node.arity());
  RowMatrix v(u.rows(), a);
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    std::span<const double> row(u.row(r).data(), static_cast<std::size_t>(u.cols()));
    for (Eigen::Index i = 0; i < a; ++i) {
      if (node.is_leaf()) {
        v(r, i) = row[node.columns[static_cast<std::size_t>(i)]];
      } else {
        const ModelNode& c = node.children[static_cast<std::size_t>(i)];
        v(r, i) = c.kendall.cdf(node_cdf(c, row, options));
      }
    }
  }
  return v;
}

RowMatrix nesting_pit(const HierarchicalModel& m, const RowMatrix& u, const DensityOptions& options) {
  if (static_cast<std::size_t>(u.cols()) != m.n_vars) throw DimensionError("nesting_pit: column count mismatch");
  return node_pit(m.root, u, options);
}

double model_log_density(const HierarchicalModel& m, std::span<const double> u, const DensityOptions& options) {
  if (u.size() != m.n_vars)
    throw DimensionError("model density: expected " + std::to_string(m.n_vars) + " values, got " +
                         std::to_string(u.size()));
  return node_log_density(m.root, u, options, nullptr);
}

double model_density(const HierarchicalModel& m, std::span<const double> u, const DensityOptions& options) {
  const double v = std::exp(model_log_density(m, u, options));
  if (!std::isfinite(v)) throw NumericError("model density: non-finite value");
  return v;
}

LogLik model_loglik(const HierarchicalModel& m, const RowMatrix& u, const DensityOptions& options, int threads) {
  if (u.rows() < 1) throw DimensionError("log-likelihood needs at least one row");
  if (static_cast<std::size_t>(u.cols()) != m.n_vars) throw DimensionError("log-likelihood: column count mismatch");
  // Row terms are summed in row order afterwards, so the total does not
  // depend on the thread count.
  std::vector<double> terms(static_cast<std::size_t>(u.rows()));
  auto run = [&](Eigen::Index lo, Eigen::Index hi) {
    for (Eigen::Index r = lo; r < hi; ++r)
      terms[static_cast<std::size_t>(r)] =
          node_log_density(m.root, std::span<const double>(u.row(r).data(), m.n_vars), options, nullptr);
  };
  const int t = std::clamp<int>(threads, 1, static_cast<int>(std::min<Eigen::Index>(u.rows(), 64)));
  if (t == 1) {
    run(0, u.rows());
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(t));
    std::vector<std::thread> pool;
    const Eigen::Index chunk = (u.rows() + t - 1) / t;
    for (int i = 0; i < t; ++i) {
      pool.emplace_back([&, i] {
        try {
          const Eigen::Index lo = i * chunk, hi = std::min(u.rows(), lo + chunk);
          if (lo < hi) run(lo, hi);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  const double floor = std::log(kDensityFloor);
  LogLik out;
  for (double ld : terms) {
    if (!(ld >= floor)) {
      out.value += floor;
      ++out.clamped_rows;
    } else {
      out.value += ld;
    }
  }
  return out;
}

bool exact_sampling_available(const HierarchicalModel& m) {
  bool ok = true;
  bool root = true;
  for_each_node(m.root, [&](const ModelNode& node, const std::string&) {
    if (!root && node.arity() > 1 && !node.copula.is_archimedean()) ok = false;
    root = false;
  });
  return ok;
}

namespace {

void distribute(const ModelNode& node, const RowMatrix& args, RowMatrix& out, RngStream& rng,
                const SampleOptions& options);

// Fills the subtree of a non-root node whose V-values are given.
void sample_child(const ModelNode& node, const Eigen::VectorXd& v, RowMatrix& out, RngStream& rng,
                  const SampleOptions& options) {
  const auto n = v.size();
  const auto a = static_cast<Eigen::Index>(node.arity());
  std::vector<double> z(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) z[static_cast<std::size_t>(j)] = node.kendall.inverse(clamp_interior(v(j)));
  RowMatrix level(n, a);
  if (a == 1) {
    for (Eigen::Index j = 0; j < n; ++j) level(j, 0) = z[static_cast<std::size_t>(j)];
  } else if (node.copula.is_archimedean() && options.method != SampleMethod::rejection) {
    std::vector<double> uni(static_cast<std::size_t>(a - 1));
    for (Eigen::Index j = 0; j < n; ++j) {
      for (auto& x : uni) x = rng.uniform();
      levelset_conditional_from_uniforms(node.copula.generator(), static_cast<int>(a), z[static_cast<std::size_t>(j)],
                                         uni, std::span<double>(level.row(j).data(), static_cast<std::size_t>(a)));
    }
    constexpr double lo = std::numeric_limits<double>::min();
    const double hi = std::nextafter(1.0, 0.0);
    level = level.cwiseMax(lo).cwiseMin(hi);
  } else {
    level = sample_levelset_batch(node.copula, z, options.tolerance, rng, options.max_attempts, options.cdf);
  }
  distribute(node, level, out, rng, options);
}

void distribute(const ModelNode& node, const RowMatrix& args, RowMatrix& out, RngStream& rng,
                const SampleOptions& options) {
  for (Eigen::Index i = 0; i < args.cols(); ++i) {
    if (node.is_leaf())
      out.col(static_cast<Eigen::Index>(node.columns[static_cast<std::size_t>(i)])) = args.col(i);
    else
      sample_child(node.children[static_cast<std::size_t>(i)], args.col(i), out, rng, options);
  }
}

}  // namespace

RowMatrix model_sample(const HierarchicalModel& m, std::size_t n, RngStream& rng, const SampleOptions& options) {
  if (options.method == SampleMethod::exact && !exact_sampling_available(m))
    throw ParameterError("exact sampling requires Archimedean clusters; use the rejection method");
  RowMatrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m.n_vars));
  if (n == 0) return out;
  const RowMatrix top = m.root.copula.sample(n, rng);
  distribute(m.root, top, out, rng, options);
  return out;
}

MarginDensity cross_cluster_margin_pdf(const HierarchicalModel& m, std::size_t k, std::size_t l, double uk, double ul,
                                       std::size_t mc, RngStream& rng) {
  if (k >= m.n_vars || l >= m.n_vars) throw DimensionError("cross-cluster margin: variable index out of range");
  if (!(uk > 0.0 && uk < 1.0 && ul > 0.0 && ul < 1.0)) throw DomainError("cross-cluster margin: point must be interior");
  if (m.root.is_leaf()) throw DomainError("cross-cluster margin: model has a single cluster; use its copula margin");
  auto locate = [&](std::size_t var, std::size_t& child, std::size_t& pos) {
    for (std::size_t i = 0; i < m.root.children.size(); ++i) {
      const ModelNode& c = m.root.children[i];
      if (!c.is_leaf()) continue;
      const auto it = std::find(c.columns.begin(), c.columns.end(), var);
      if (it != c.columns.end()) {
        child = i;
        pos = static_cast<std::size_t>(it - c.columns.begin());
        return;
      }
    }
    throw DimensionError("cross-cluster margin: variable " + variable_label(m, var) +
                         " is not in a cluster directly under the root");
  };
  std::size_t ci = 0, pi = 0, cj = 0, pj = 0;
  locate(k, ci, pi);
  locate(l, cj, pj);
  if (ci == cj) throw DomainError("cross-cluster margin: variables share a cluster; use the cluster copula margin");
  if (m.root.copula.kind() == CopulaKind::independence) return {1.0, 0.0};

  const std::array<std::size_t, 2> pair{ci, cj};
  const Copula c0 = m.root.copula.margin(pair);
  const ModelNode& a = m.root.children[ci];
  const ModelNode& b = m.root.children[cj];
  if (a.arity() == 1 && b.arity() == 1) {
    const std::array<double, 2> p{uk, ul};
    return {c0.pdf(p), 0.0};
  }
  if (mc < 2) throw DimensionError("cross-cluster margin: need at least two Monte Carlo draws");
  const DensityOptions opt;
  std::vector<double> wa(a.arity()), wb(b.arity());
  auto v_of = [&](const ModelNode& node, std::size_t pos, double fixed, std::vector<double>& w) {
    if (node.arity() == 1) return fixed;
    node.copula.sample_given(pos, fixed, rng, w);
    return node.kendall.cdf(node.copula.cdf(w, opt.cdf));
  };
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < mc; ++s) {
    const std::array<double, 2> v{clamp_interior(v_of(a, pi, uk, wa)), clamp_interior(v_of(b, pj, ul, wb))};
    const double x = c0.pdf(v);
    sum += x;
    sum_sq += x * x;
  }
  const double n = static_cast<double>(mc);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

std::size_t parameter_count(const HierarchicalModel& m) {
  std::size_t count = 0;
  for_each_node(m.root, [&](const ModelNode& node, const std::string&) {
    const auto d = static_cast<std::size_t>(node.copula.dim());
    switch (node.copula.kind()) {
      case CopulaKind::independence:
        break;
      case CopulaKind::archimedean:
        count += d > 1 ? 1 : 0;
        break;
      case CopulaKind::gaussian:
        count += d * (d - 1) / 2;
        break;
      case CopulaKind::student_t:
        count += d * (d - 1) / 2 + 1;
        break;
    }
  });
  return count;
}

}  // namespace hkc
