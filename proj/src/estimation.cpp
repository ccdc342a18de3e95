#include "hkc/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <thread>

#include "hkc/errors.hpp"
#include "hkc/rng.hpp"
#include "hkc/stats.hpp"

namespace hkc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFrankDeadZone = 1e-8;
// Start values come from tau inversion, kept away from the boundary.
constexpr double kStartTauMin = 0.02;
constexpr double kStartTauMax = 0.95;
// Upper end of nu; larger values are indistinguishable from the Gaussian.
constexpr double kMaxNuExcess = 1e4;
constexpr std::uint64_t kStudyStream = 0x53545544;  // "STUD"

Family generator_family(CopulaFamily f) {
  switch (f) {
    case CopulaFamily::clayton:
      return Family::clayton;
    case CopulaFamily::gumbel:
      return Family::gumbel;
    case CopulaFamily::frank:
      return Family::frank;
    default:
      throw ParameterError("not an Archimedean family: " + std::string(to_string(f)));
  }
}

bool is_archimedean_family(CopulaFamily f) {
  return f == CopulaFamily::clayton || f == CopulaFamily::gumbel || f == CopulaFamily::frank;
}

// Unconstrained coordinate of an Archimedean parameter and back.
double theta_to_eta(CopulaFamily f, int dim, double theta) {
  switch (f) {
    case CopulaFamily::clayton:
      return std::log(theta);
    case CopulaFamily::gumbel:
      return std::log(std::max(theta - 1.0, 1e-12));
    case CopulaFamily::frank:
      return dim == 2 ? theta : std::log(theta);
    default:
      throw ParameterError("no parameter transform for " + std::string(to_string(f)));
  }
}

double eta_to_theta(CopulaFamily f, int dim, double eta) {
  switch (f) {
    case CopulaFamily::clayton:
      return std::exp(eta);
    case CopulaFamily::gumbel:
      return 1.0 + std::exp(eta);
    case CopulaFamily::frank:
      if (dim > 2) return std::exp(eta);
      if (std::abs(eta) < kFrankDeadZone) return eta < 0.0 ? -kFrankDeadZone : kFrankDeadZone;
      return eta;
    default:
      throw ParameterError("no parameter transform for " + std::string(to_string(f)));
  }
}

double nu_to_eta(double nu) { return std::log(nu - 2.0); }

double eta_to_nu(double eta) {
  const double excess = std::exp(eta);
  if (!(excess > 0.0) || excess > kMaxNuExcess) return kInf;
  return 2.0 + excess;
}

double copula_loglik(const Copula& c, const RowMatrix& u) {
  const double floor = std::log(kDensityFloor);
  const auto d = static_cast<std::size_t>(u.cols());
  double acc = 0.0;
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    const double ld = c.log_pdf(std::span<const double>(u.row(r).data(), d));
    acc += ld >= floor ? ld : floor;
  }
  return acc;
}

double mean_pairwise_tau(const RowMatrix& u) {
  const Eigen::MatrixXd t = kendall_tau_matrix(u);
  const auto d = t.rows();
  double s = 0.0;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j) s += t(i, j);
  return s / static_cast<double>(d * (d - 1) / 2);
}

Eigen::MatrixXd correlation_from_tau(const RowMatrix& u) {
  Eigen::MatrixXd r = kendall_tau_matrix(u);
  for (Eigen::Index i = 0; i < r.rows(); ++i)
    for (Eigen::Index j = 0; j < r.cols(); ++j)
      r(i, j) = i == j ? 1.0 : std::sin(std::numbers::pi / 2.0 * r(i, j));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
  if (es.eigenvalues().minCoeff() < 1e-6) r = nearest_correlation(r, 1e-6);
  return r;
}

double start_tau(CopulaFamily f, int dim, double tau) {
  const double mag = std::clamp(std::abs(tau), kStartTauMin, kStartTauMax);
  if (f == CopulaFamily::frank && dim == 2 && tau < 0.0) return -mag;
  return mag;
}

NodeReport describe_node(const ModelNode& node, const std::string& path, bool is_root) {
  NodeReport r;
  r.path = path;
  r.family = family_of(node.copula);
  r.dim = node.copula.dim();
  if (node.copula.kind() == CopulaKind::archimedean) r.theta = node.copula.generator().theta();
  if (node.copula.is_elliptical()) r.corr = node.copula.correlation();
  if (node.copula.kind() == CopulaKind::student_t) r.nu = node.copula.nu();
  r.kendall = is_root ? "none" : node.kendall.provenance();
  r.method = node.fixed ? "fixed" : "none";
  return r;
}

KendallPolicy policy_of(const FitOptions& o) {
  KendallPolicy p;
  p.force_empirical = o.kendall_mode == KendallMode::empirical;
  p.build = o.kendall_build;
  p.seed = o.seed;
  return p;
}

struct TwoStepState {
  const RowMatrix& u;
  const FitOptions& options;
  KendallPolicy policy;
  std::vector<NodeReport> reports;
  std::size_t index = 0;
};

void fit_node(ModelNode& node, const std::string& parent_path, bool is_root, TwoStepState& st) {
  const std::size_t my_index = st.index++;
  const std::string path = parent_path.empty() ? node.name : parent_path + "/" + node.name;
  const std::size_t slot = st.reports.size();
  st.reports.emplace_back();
  for (auto& c : node.children) fit_node(c, path, false, st);

  const RowMatrix args = node_pit(node, st.u, st.options.density);
  std::string method = "fixed";
  double ll = 0.0;
  std::size_t evals = 0;
  bool converged = true;
  if (!node.fixed && node.arity() > 1) {
    ClusterFit f = fit_cluster(family_of(node.copula), args, st.options.optimizer);
    node.copula = std::move(f.copula);
    method = f.method;
    ll = f.loglik;
    evals = f.evals;
    converged = f.converged;
  } else if (node.arity() > 1) {
    ll = copula_loglik(node.copula, args);
  } else {
    method = "none";
  }
  if (!is_root) prepare_kendall(node, my_index, st.policy);
  NodeReport r = describe_node(node, path, is_root);
  r.method = method;
  r.loglik = ll;
  r.evals = evals;
  r.converged = converged;
  st.reports[slot] = std::move(r);
}

// A free coordinate of the joint likelihood.
struct Slot {
  std::vector<std::size_t> path;  // child indices from the root
  bool nu = false;                // student_t degrees of freedom, else Archimedean theta
};

ModelNode& node_at(HierarchicalModel& m, const std::vector<std::size_t>& path) {
  ModelNode* n = &m.root;
  for (std::size_t i : path) n = &n->children[i];
  return *n;
}

void collect_slots(const ModelNode& node, std::vector<std::size_t>& path, bool is_root, bool frozen,
                   std::vector<Slot>& slots) {
  if (!is_root && node.arity() > 1 && node.copula.is_elliptical() && !frozen)
    throw ParameterError("joint MLE: elliptical cluster '" + node.name +
                         "' has an uncertain Kendall function; force frozen Kendall mode to proceed");
  if (!node.fixed && node.arity() > 1) {
    if (node.copula.kind() == CopulaKind::archimedean) slots.push_back({path, false});
    if (node.copula.kind() == CopulaKind::student_t && is_root) slots.push_back({path, true});
  }
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    path.push_back(i);
    collect_slots(node.children[i], path, false, frozen, slots);
    path.pop_back();
  }
}

// Archimedean nodes get closed-form Kendall functions for the joint likelihood.
void use_closed_kendall(ModelNode& node, bool is_root) {
  if (!is_root && node.arity() > 1 && node.copula.is_archimedean()) node.kendall = node.copula.closed_kendall();
  for (auto& c : node.children) use_closed_kendall(c, false);
}

void apply(ModelNode& node, const Slot& s, double eta, bool is_root) {
  if (s.nu) {
    const double nu = eta_to_nu(eta);
    if (!std::isfinite(nu)) throw ParameterError("nu out of range");
    node.copula = Copula::student_t(node.copula.correlation(), nu);
    return;
  }
  const CopulaFamily f = family_of(node.copula);
  const int d = node.copula.dim();
  node.copula = Copula::archimedean(Generator(generator_family(f), eta_to_theta(f, d, eta)), d);
  if (!is_root) node.kendall = node.copula.closed_kendall();
}

double eta_of(const ModelNode& node, const Slot& s) {
  if (s.nu) return nu_to_eta(node.copula.nu());
  return theta_to_eta(family_of(node.copula), node.copula.dim(), node.copula.generator().theta());
}

}  // namespace

RowMatrix pseudo_observations(const RowMatrix& x) {
  const Eigen::Index n = x.rows();
  if (n < 2) throw DimensionError("pseudo-observations need at least two rows");
  RowMatrix out(n, x.cols());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::isfinite(x(i, j)))
        throw DomainError("pseudo-observations: non-finite value in column " + std::to_string(j + 1) + ", row " +
                          std::to_string(i + 1));
    }
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return x(a, j) < x(b, j); });
    if (x(order.front(), j) == x(order.back(), j))
      throw DomainError("pseudo-observations: column " + std::to_string(j + 1) + " is constant");
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t k = i;
      while (k + 1 < order.size() && x(order[k + 1], j) == x(order[i], j)) ++k;
      const double rank = 0.5 * static_cast<double>(i + k) + 1.0;
      for (std::size_t t = i; t <= k; ++t) out(order[t], j) = rank / static_cast<double>(n + 1);
      i = k + 1;
    }
  }
  return out;
}

std::string_view to_string(CopulaFamily f) noexcept {
  switch (f) {
    case CopulaFamily::independence:
      return "independence";
    case CopulaFamily::clayton:
      return "clayton";
    case CopulaFamily::gumbel:
      return "gumbel";
    case CopulaFamily::frank:
      return "frank";
    case CopulaFamily::gaussian:
      return "gaussian";
    case CopulaFamily::student_t:
      return "student_t";
  }
  return "unknown";
}

CopulaFamily copula_family_from_string(std::string_view s) {
  for (auto f : {CopulaFamily::independence, CopulaFamily::clayton, CopulaFamily::gumbel, CopulaFamily::frank,
                 CopulaFamily::gaussian, CopulaFamily::student_t})
    if (to_string(f) == s) return f;
  throw ParameterError("unknown copula family '" + std::string(s) + "'");
}

CopulaFamily family_of(const Copula& c) noexcept {
  switch (c.kind()) {
    case CopulaKind::independence:
      return CopulaFamily::independence;
    case CopulaKind::gaussian:
      return CopulaFamily::gaussian;
    case CopulaKind::student_t:
      return CopulaFamily::student_t;
    case CopulaKind::archimedean:
      switch (c.generator().family()) {
        case Family::clayton:
          return CopulaFamily::clayton;
        case Family::gumbel:
          return CopulaFamily::gumbel;
        case Family::frank:
          return CopulaFamily::frank;
        case Family::independence:
          return CopulaFamily::independence;
      }
  }
  return CopulaFamily::independence;
}

ClusterFit fit_cluster(CopulaFamily family, const RowMatrix& u, const NelderMeadOptions& nm) {
  const int d = static_cast<int>(u.cols());
  if (d < 1) throw DimensionError("fit_cluster: no columns");
  if (u.rows() < 2) throw DimensionError("fit_cluster: need at least two rows");
  ClusterFit out;
  if (family == CopulaFamily::independence || d == 1) {
    out.copula = Copula::independence(d);
    out.method = "none";
    return out;
  }
  if (is_archimedean_family(family)) {
    const Family g = generator_family(family);
    const double tau0 = start_tau(family, d, mean_pairwise_tau(u));
    const double eta0 = theta_to_eta(family, d, Generator::from_tau(g, tau0).theta());
    auto objective = [&](const std::vector<double>& x) {
      try {
        return -copula_loglik(Copula::archimedean(Generator(g, eta_to_theta(family, d, x[0])), d), u);
      } catch (const std::exception&) {
        return kInf;
      }
    };
    const NelderMeadResult r = nelder_mead(objective, {eta0}, nm);
    out.copula = Copula::archimedean(Generator(g, eta_to_theta(family, d, r.x[0])), d);
    out.loglik = -r.f;
    out.method = "mle";
    out.evals = r.evals;
    out.converged = r.converged;
    return out;
  }
  const Eigen::MatrixXd corr = correlation_from_tau(u);
  if (family == CopulaFamily::gaussian) {
    out.copula = Copula::gaussian(corr);
    out.loglik = copula_loglik(out.copula, u);
    out.method = "tau_inversion";
    return out;
  }
  auto objective = [&](const std::vector<double>& x) {
    const double nu = eta_to_nu(x[0]);
    if (!std::isfinite(nu)) return kInf;
    try {
      return -copula_loglik(Copula::student_t(corr, nu), u);
    } catch (const std::exception&) {
      return kInf;
    }
  };
  const NelderMeadResult r = nelder_mead(objective, {nu_to_eta(6.0)}, nm);
  out.copula = Copula::student_t(corr, eta_to_nu(r.x[0]));
  out.loglik = -r.f;
  out.method = "tau_inversion+mle_nu";
  out.evals = r.evals;
  out.converged = r.converged;
  return out;
}

bool FitReport::converged() const noexcept {
  if (joint_run && !joint_converged) return false;
  return std::all_of(nodes.begin(), nodes.end(), [](const NodeReport& n) { return n.converged; });
}

FitResult fit_two_step(const HierarchicalModel& skeleton, const RowMatrix& u, const FitOptions& options) {
  require_valid(skeleton, static_cast<std::size_t>(u.cols()));
  FitResult res;
  res.model = skeleton;
  TwoStepState st{u, options, policy_of(options), {}, 0};
  fit_node(res.model.root, "", true, st);
  res.report.nodes = std::move(st.reports);
  const LogLik ll = model_loglik(res.model, u, options.density, options.threads);
  res.report.loglik_two_step = ll.value;
  res.report.clamped_two_step = ll.clamped_rows;
  res.report.n_obs = static_cast<std::size_t>(u.rows());
  res.report.n_params = parameter_count(res.model);
  return res;
}

FitResult fit_joint_mle(const FitResult& start, const RowMatrix& u, const FitOptions& options) {
  std::vector<Slot> slots;
  std::vector<std::size_t> path;
  collect_slots(start.model.root, path, true, options.force_frozen_kendall, slots);

  FitResult res = start;
  FitReport& rep = res.report;
  rep.joint_run = true;
  HierarchicalModel work = start.model;
  use_closed_kendall(work.root, true);

  std::vector<double> x0;
  for (const auto& s : slots) x0.push_back(eta_of(node_at(work, s.path), s));

  std::size_t last_clamped = 0;
  auto objective = [&](const std::vector<double>& x) {
    try {
      for (std::size_t i = 0; i < slots.size(); ++i) apply(node_at(work, slots[i].path), slots[i], x[i], slots[i].path.empty());
      const LogLik ll = model_loglik(work, u, options.density, options.threads);
      last_clamped = ll.clamped_rows;
      return -ll.value;
    } catch (const std::exception&) {
      return kInf;
    }
  };

  if (slots.empty()) {
    rep.loglik_joint_start = rep.loglik_two_step;
    rep.loglik_joint = rep.loglik_two_step;
    rep.clamped_joint = rep.clamped_two_step;
    rep.joint_evals = 0;
    rep.joint_converged = true;
    return res;
  }

  rep.loglik_joint_start = -objective(x0);
  const NelderMeadResult r = nelder_mead(objective, x0, options.optimizer);
  rep.joint_evals = r.evals + 1;
  rep.joint_iterations = r.iterations;
  rep.joint_converged = r.converged;

  // The result must never fall below the two-step value; when the search does
  // not improve on it the two-step model is kept unchanged.
  if (!(-r.f > rep.loglik_two_step)) {
    rep.loglik_joint = rep.loglik_two_step;
    rep.clamped_joint = rep.clamped_two_step;
    return res;
  }
  objective(r.x);
  rep.clamped_joint = last_clamped;
  rep.loglik_joint = -r.f;
  res.model = std::move(work);
  rep.n_params = parameter_count(res.model);

  std::vector<NodeReport> nodes;
  bool root = true;
  for_each_node(res.model.root, [&](const ModelNode& node, const std::string& p) {
    nodes.push_back(describe_node(node, p, root));
    root = false;
  });
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i].method = rep.nodes[i].method;
    nodes[i].loglik = rep.nodes[i].loglik;
    nodes[i].evals = rep.nodes[i].evals;
    nodes[i].converged = rep.nodes[i].converged;
  }
  // Mark the nodes the joint search moved.
  std::size_t idx = 0;
  std::vector<std::size_t> cur;
  std::function<void(const ModelNode&)> mark = [&](const ModelNode& node) {
    const std::size_t here = idx++;
    for (const auto& s : slots)
      if (s.path == cur) nodes[here].method = "joint_mle";
    for (std::size_t i = 0; i < node.children.size(); ++i) {
      cur.push_back(i);
      mark(node.children[i]);
      cur.pop_back();
    }
  };
  mark(res.model.root);
  rep.nodes = std::move(nodes);
  return res;
}

void refresh_kendall(HierarchicalModel& m, const FitOptions& options) { prepare_kendall(m, policy_of(options)); }

std::string_view to_string(StudyMethod m) noexcept {
  switch (m) {
    case StudyMethod::two_step_closed:
      return "two_step_closed";
    case StudyMethod::two_step_empirical:
      return "two_step_empirical";
    case StudyMethod::joint_mle:
      return "joint_mle";
  }
  return "unknown";
}

double copula_tau(const Copula& c) {
  if (c.dim() < 2) throw DimensionError("copula_tau: needs dimension >= 2");
  return c.pair_tau(0, 1);
}

Copula copula_from_tau(CopulaFamily family, double tau, int dim) {
  switch (family) {
    case CopulaFamily::independence:
      return Copula::independence(dim);
    case CopulaFamily::clayton:
    case CopulaFamily::gumbel:
    case CopulaFamily::frank:
      return Copula::archimedean(Generator::from_tau(generator_family(family), tau), dim);
    case CopulaFamily::gaussian: {
      const double rho = std::sin(std::numbers::pi / 2.0 * tau);
      Eigen::MatrixXd r = Eigen::MatrixXd::Constant(dim, dim, rho);
      r.diagonal().setOnes();
      return Copula::gaussian(r);
    }
    case CopulaFamily::student_t:
      break;
  }
  throw ParameterError("copula_from_tau: tau does not determine a student_t copula");
}

namespace {

HierarchicalModel study_model(CopulaFamily nest, double tau0, CopulaFamily f1, double tau1, CopulaFamily f2,
                              double tau2) {
  HierarchicalModel m;
  m.n_vars = 4;
  m.root.name = "nesting";
  m.root.copula = copula_from_tau(nest, tau0, 2);
  ModelNode a, b;
  a.name = "cluster1";
  a.copula = copula_from_tau(f1, tau1, 2);
  a.columns = {0, 1};
  b.name = "cluster2";
  b.copula = copula_from_tau(f2, tau2, 2);
  b.columns = {2, 3};
  m.root.children = {std::move(a), std::move(b)};
  prepare_kendall(m, KendallPolicy{});
  return m;
}

struct StudyTask {
  std::size_t cell = 0;  // index into the cell grid without the method axis
  CopulaFamily nesting;
  double tau0, tau1, tau2;
  std::size_t n;
};

}  // namespace

std::vector<StudyCell> simulation_study(const StudyConfig& config) {
  std::vector<StudyTask> grid;
  for (auto nest : config.nesting)
    for (double t0 : config.tau0)
      for (const auto& [t1, t2] : config.cluster_taus)
        for (std::size_t n : config.sizes) grid.push_back({grid.size(), nest, t0, t1, t2, n});

  const std::size_t reps = config.replications;
  const std::size_t nm = config.methods.size();
  // estimates[(cell * reps + r) * nm + method], NaN on failure
  std::vector<double> estimates(grid.size() * reps * nm, std::numeric_limits<double>::quiet_NaN());

  auto run_one = [&](std::size_t job) {
    const StudyTask& task = grid[job / reps];
    const std::size_t r = job % reps;
    double* out = &estimates[job * nm];
    HierarchicalModel truth;
    RowMatrix u;
    try {
      truth = study_model(task.nesting, task.tau0, config.cluster1, task.tau1, config.cluster2, task.tau2);
      RngStream rng = RngStream::derive(config.seed, {kStudyStream, task.cell, r});
      SampleOptions so;
      so.method = SampleMethod::exact;
      u = model_sample(truth, task.n, rng, so);
    } catch (const std::exception&) {
      return;
    }
    FitOptions fo;
    fo.seed = derive_seed(config.seed, {kStudyStream, task.cell, r, 1});
    fo.kendall_build.mc_size = config.kendall_mc;
    std::optional<FitResult> closed;
    auto closed_fit = [&]() -> const FitResult& {
      if (!closed) closed = fit_two_step(truth, u, fo);
      return *closed;
    };
    for (std::size_t k = 0; k < nm; ++k) {
      try {
        switch (config.methods[k]) {
          case StudyMethod::two_step_closed:
            out[k] = copula_tau(closed_fit().model.root.copula);
            break;
          case StudyMethod::two_step_empirical: {
            FitOptions fe = fo;
            fe.kendall_mode = KendallMode::empirical;
            out[k] = copula_tau(fit_two_step(truth, u, fe).model.root.copula);
            break;
          }
          case StudyMethod::joint_mle:
            out[k] = copula_tau(fit_joint_mle(closed_fit(), u, fo).model.root.copula);
            break;
        }
      } catch (const std::exception&) {
      }
    }
  };

  const std::size_t jobs = grid.size() * reps;
  const std::size_t t = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(config.threads, 1)), 1,
                                                std::max<std::size_t>(jobs, 1));
  if (t == 1) {
    for (std::size_t j = 0; j < jobs; ++j) run_one(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < t; ++i)
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < jobs; j = next++) run_one(j);
      });
    for (auto& th : pool) th.join();
  }

  std::vector<StudyCell> cells;
  if (reps == 0) return cells;
  for (const auto& task : grid) {
    for (std::size_t k = 0; k < nm; ++k) {
      StudyCell c;
      c.nesting = task.nesting;
      c.tau0 = task.tau0;
      c.tau1 = task.tau1;
      c.tau2 = task.tau2;
      c.n = task.n;
      c.method = config.methods[k];
      double sum = 0.0, sum_sq = 0.0;
      for (std::size_t r = 0; r < reps; ++r) {
        const double e = estimates[(task.cell * reps + r) * nm + k];
        if (std::isnan(e)) {
          ++c.failed;
          continue;
        }
        ++c.ok;
        sum += e - task.tau0;
        sum_sq += (e - task.tau0) * (e - task.tau0);
      }
      if (c.ok > 0) {
        const double n = static_cast<double>(c.ok);
        c.bias = sum / n;
        c.mse = sum_sq / n;
        c.sd = c.ok > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * c.bias * c.bias) / (n - 1.0))) : 0.0;
      }
      cells.push_back(c);
    }
  }
  return cells;
}

}  // namespace hkc
