#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hkc/copulas.hpp"
#include "hkc/kendall.hpp"
#include "hkc/levelset.hpp"

namespace hkc {

class RngStream;

/// Node of a hierarchical Kendall copula. A leaf couples data columns, an
/// internal node couples the V-variables of its children. Every non-root
/// node carries the Kendall function of its own copula.
struct ModelNode {
  std::string name;
  Copula copula = Copula::independence(1);
  KendallFunction kendall;
  std::vector<ModelNode> children;
  std::vector<std::size_t> columns;
  /// Parameters given by the user and excluded from fitting.
  bool fixed = false;

  bool is_leaf() const noexcept { return children.empty(); }
  /// Number of arguments of this node's copula.
  std::size_t arity() const noexcept { return is_leaf() ? columns.size() : children.size(); }
};

struct HierarchicalModel {
  ModelNode root;
  std::size_t n_vars = 0;
  /// Optional column names, used in messages.
  std::vector<std::string> variables;
};

/// Structural problems, each naming the offending node path or variable.
std::vector<std::string> validate_model(const HierarchicalModel& m, std::size_t n_vars);
/// Throws ValidationError listing every problem.
void require_valid(const HierarchicalModel& m, std::size_t n_vars);

struct KendallPolicy {
  /// Build empirical Kendall functions even where a closed form exists.
  bool force_empirical = false;
  KendallBuildOptions build{};
  std::uint64_t seed = 0;
};

/// Assigns each non-root node its Kendall function: identity for single
/// columns, closed form for Archimedean copulas, simulated empirical otherwise.
/// Streams are derived from the seed and the node's preorder index.
void prepare_kendall(HierarchicalModel& m, const KendallPolicy& policy);
void prepare_kendall(ModelNode& node, std::size_t preorder_index, const KendallPolicy& policy);

/// Options for density evaluation.
struct DensityOptions {
  /// CDF options for elliptical copulas inside the PIT.
  CdfOptions cdf{2048, 1e-10, 0x5EEDC0DE};
};

/// V = K(C(.)) for each child of the root (single-column children pass through).
RowMatrix nesting_pit(const HierarchicalModel& m, const RowMatrix& u, const DensityOptions& options = {});
/// V-values of the children of an arbitrary node.
RowMatrix node_pit(const ModelNode& node, const RowMatrix& u, const DensityOptions& options = {});

double model_log_density(const HierarchicalModel& m, std::span<const double> u, const DensityOptions& options = {});
double model_density(const HierarchicalModel& m, std::span<const double> u, const DensityOptions& options = {});

/// Densities below this are clamped in the log-likelihood.
inline constexpr double kDensityFloor = 1e-300;

struct LogLik {
  double value = 0.0;
  std::size_t clamped_rows = 0;
};

LogLik model_loglik(const HierarchicalModel& m, const RowMatrix& u, const DensityOptions& options = {},
                    int threads = 1);

enum class SampleMethod { automatic, exact, rejection };

struct SampleOptions {
  SampleMethod method = SampleMethod::automatic;
  ToleranceRule tolerance{};
  std::size_t max_attempts = kDefaultMaxAttempts;
  CdfOptions cdf{2048, 1e-9, 0x5EEDC0DE};
};

/// True when every non-root node with more than one argument is Archimedean.
bool exact_sampling_available(const HierarchicalModel& m);

/// Draws n rows: sample the root copula, then level by level map each V to
/// z = K^{-1}(V) and draw the node's arguments on the level set C = z,
/// exactly for Archimedean nodes and by batch rejection otherwise.
RowMatrix model_sample(const HierarchicalModel& m, std::size_t n, RngStream& rng, const SampleOptions& options = {});

struct MarginDensity {
  double value = 0.0;
  double std_error = 0.0;
};

/// Bivariate density of (U_k, U_l) for variables in different clusters under
/// the root: E[c0_ij(V_i, V_j)] over the cluster laws conditioned on U_k, U_l.
MarginDensity cross_cluster_margin_pdf(const HierarchicalModel& m, std::size_t k, std::size_t l, double uk, double ul,
                                       std::size_t mc, RngStream& rng);

/// Number of free parameters: theta per Archimedean node, correlations and nu
/// for elliptical nodes.
std::size_t parameter_count(const HierarchicalModel& m);

/// Preorder visit of all nodes.
template <class F>
void for_each_node(const ModelNode& node, F&& f, const std::string& path = "") {
  const std::string here = path.empty() ? node.name : path + "/" + node.name;
  f(node, here);
  for (const auto& c : node.children) for_each_node(c, f, here);
}

}  // namespace hkc
