#pragma once

#include <utility>
#include <vector>

#include "hkc/copulas.hpp"
#include "hkc/model.hpp"

namespace fixtures {

inline hkc::ModelNode leaf(std::string name, hkc::Copula c, std::vector<std::size_t> cols) {
  hkc::ModelNode n;
  n.name = std::move(name);
  n.copula = std::move(c);
  n.columns = std::move(cols);
  return n;
}

inline hkc::Copula arch(hkc::Family f, double theta, int d = 2) {
  return hkc::Copula::archimedean(hkc::Generator(f, theta), d);
}

/// Clusters {0,1} and {2,3} under a bivariate nesting copula, Kendall functions prepared.
inline hkc::HierarchicalModel two_clusters(hkc::Copula c1, hkc::Copula c2, hkc::Copula nest) {
  hkc::HierarchicalModel m;
  m.n_vars = 4;
  m.root.name = "root";
  m.root.copula = std::move(nest);
  m.root.children = {leaf("a", std::move(c1), {0, 1}), leaf("b", std::move(c2), {2, 3})};
  hkc::prepare_kendall(m, hkc::KendallPolicy{});
  return m;
}

}  // namespace fixtures
