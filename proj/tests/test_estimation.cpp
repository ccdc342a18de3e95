#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fixtures.hpp"
#include "hkc/errors.hpp"
#include "hkc/estimation.hpp"
#include "hkc/rng.hpp"
#include "hkc/stats.hpp"

using fixtures::arch;
using fixtures::leaf;
using fixtures::two_clusters;
using hkc::Copula;
using hkc::CopulaFamily;
using hkc::Family;

namespace {

hkc::HierarchicalModel four_dim(double tau0) {
  return two_clusters(arch(Family::clayton, 2), arch(Family::gumbel, 2),
                      hkc::copula_from_tau(CopulaFamily::frank, tau0));
}

hkc::RowMatrix sample(const hkc::HierarchicalModel& m, std::size_t n, std::uint64_t seed) {
  hkc::RngStream rng(seed);
  return hkc::model_sample(m, n, rng);
}

}  // namespace

TEST_CASE("pseudo-observations") {
  hkc::RowMatrix x(3, 2);
  x << 3.2, 1, -1.0, 1, 0.5, 2;
  const auto u = hkc::pseudo_observations(x);
  CHECK(u(0, 0) == 0.75);
  CHECK(u(1, 0) == 0.25);
  CHECK(u(2, 0) == 0.5);
  CHECK(u(0, 1) == 0.375);
  CHECK(u(1, 1) == 0.375);
  CHECK(u(2, 1) == 0.75);

  hkc::RowMatrix c(3, 1);
  c << 2, 2, 2;
  CHECK_THROWS_AS(hkc::pseudo_observations(c), hkc::DomainError);
  CHECK_THROWS_AS(hkc::pseudo_observations(hkc::RowMatrix(1, 2)), hkc::DimensionError);
}

TEST_CASE("property: pseudo-observations of uniform noise look uniform") {
  int pass = 0;
  for (int run = 0; run < 40; ++run) {
    hkc::RngStream rng = hkc::RngStream::derive(5, {static_cast<std::uint64_t>(run)});
    hkc::RowMatrix x(10000, 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = rng.uniform();
    const auto u = hkc::pseudo_observations(x);
    pass += hkc::ks_uniform(std::span<const double>(u.data(), 10000)).p_value > 0.01;
  }
  CHECK(pass >= 38);
}

TEST_CASE("property: fits are invariant under increasing marginal transforms") {
  const auto m = four_dim(0.4);
  const hkc::RowMatrix u = sample(m, 300, 17);
  hkc::RowMatrix x = u;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = std::log(u(i, 0));
    x(i, 1) = std::exp(5 * u(i, 1));
    x(i, 2) = std::pow(u(i, 2), 3);
    x(i, 3) = -1.0 / u(i, 3);
  }
  const auto a = hkc::fit_two_step(m, hkc::pseudo_observations(u));
  const auto b = hkc::fit_two_step(m, hkc::pseudo_observations(x));
  CHECK(a.report.loglik_two_step == b.report.loglik_two_step);
  for (std::size_t i = 0; i < a.report.nodes.size(); ++i) CHECK(a.report.nodes[i].theta == b.report.nodes[i].theta);
}

TEST_CASE("fit_cluster: clayton recovery over replications") {
  const Copula c = arch(Family::clayton, 2);
  int inside = 0;
  for (int r = 0; r < 100; ++r) {
    hkc::RngStream rng = hkc::RngStream::derive(31, {static_cast<std::uint64_t>(r)});
    const auto f = hkc::fit_cluster(CopulaFamily::clayton, c.sample(1000, rng));
    const double th = f.copula.generator().theta();
    inside += th >= 1.7 && th <= 2.3;
    CHECK(f.method == "mle");
  }
  CHECK(inside >= 90);
}

TEST_CASE("fit_cluster: independence and student_t") {
  hkc::RngStream rng(1);
  const auto f = hkc::fit_cluster(CopulaFamily::independence, Copula::independence(3).sample(50, rng));
  CHECK(f.loglik == 0.0);
  CHECK(f.copula.kind() == hkc::CopulaKind::independence);

  const Copula t = Copula::student_t((Eigen::MatrixXd(2, 2) << 1, 0.5, 0.5, 1).finished(), 5);
  const auto g = hkc::fit_cluster(CopulaFamily::student_t, t.sample(2000, rng));
  CHECK(std::abs(g.copula.correlation()(0, 1) - 0.5) < 0.05);
  CHECK(g.copula.nu() >= 3.5);
  CHECK(g.copula.nu() <= 8.0);
  CHECK(g.method == "tau_inversion+mle_nu");
}

TEST_CASE("fit_cluster: frank with negative dependence in two dimensions") {
  hkc::RngStream rng(4);
  const Copula c = arch(Family::frank, -4);
  const auto f = hkc::fit_cluster(CopulaFamily::frank, c.sample(2000, rng));
  CHECK(f.copula.generator().theta() == doctest::Approx(-4).epsilon(0.1));
}

TEST_CASE("two-step: nesting tau recovery over replications") {
  const auto m = four_dim(0.4);
  int inside = 0;
  for (int r = 0; r < 100; ++r) {
    const auto fit = hkc::fit_two_step(m, sample(m, 1000, 1000 + r));
    inside += std::abs(hkc::copula_tau(fit.model.root.copula) - 0.4) <= 0.05;
  }
  CHECK(inside >= 90);
}

TEST_CASE("two-step: report structure and independence") {
  const auto ind = two_clusters(Copula::independence(2), Copula::independence(2), Copula::independence(2));
  const auto fit = hkc::fit_two_step(ind, sample(ind, 200, 3));
  CHECK(fit.report.loglik_two_step == 0.0);
  CHECK(fit.report.nodes.size() == 3);
  CHECK(fit.report.nodes[0].path == "root");
  CHECK(fit.report.nodes[1].path == "root/a");
  CHECK(fit.report.nodes[0].kendall == "none");
  CHECK(fit.report.n_params == 0);

  const auto joint = hkc::fit_joint_mle(fit, sample(ind, 200, 3));
  CHECK(joint.report.loglik_joint == 0.0);
  CHECK(joint.report.joint_evals == 0);
}

TEST_CASE("two-step: closed form and empirical Kendall agree") {
  const auto m = four_dim(0.4);
  const hkc::RowMatrix u = sample(m, 1000, 77);
  const auto a = hkc::fit_two_step(m, u);
  hkc::FitOptions emp;
  emp.kendall_mode = hkc::KendallMode::empirical;
  const auto b = hkc::fit_two_step(m, u, emp);
  CHECK(b.report.nodes[1].kendall == "empirical(100000)");
  CHECK(a.report.nodes[1].kendall == "closed_form");
  CHECK(std::abs(hkc::copula_tau(a.model.root.copula) - hkc::copula_tau(b.model.root.copula)) < 0.02);
}

TEST_CASE("two-step: fixed nodes keep their parameters") {
  auto m = four_dim(0.4);
  m.root.children[0].fixed = true;
  const auto fit = hkc::fit_two_step(m, sample(m, 300, 9));
  CHECK(fit.model.root.children[0].copula.generator().theta() == 2.0);
  CHECK(fit.report.nodes[1].method == "fixed");
  CHECK(fit.report.nodes[2].method == "mle");
}

TEST_CASE("joint MLE dominates the two-step fit") {
  const auto m = four_dim(0.4);
  for (std::uint64_t seed : {1, 2, 3}) {
    const hkc::RowMatrix u = sample(m, 500, seed);
    const auto two = hkc::fit_two_step(m, u);
    const auto joint = hkc::fit_joint_mle(two, u);
    CHECK(joint.report.loglik_joint >= two.report.loglik_two_step);
    CHECK(joint.report.joint_run);
    CHECK(joint.report.loglik() == joint.report.loglik_joint);
    CHECK(hkc::model_loglik(joint.model, u).value == joint.report.loglik_joint);

    hkc::FitOptions emp;
    emp.kendall_mode = hkc::KendallMode::empirical;
    emp.kendall_build.mc_size = 20000;
    const auto two_e = hkc::fit_two_step(m, u, emp);
    const auto joint_e = hkc::fit_joint_mle(two_e, u, emp);
    CHECK(joint_e.report.loglik_joint >= two_e.report.loglik_two_step);
  }
}

TEST_CASE("joint MLE from the true parameters moves little") {
  const auto m = four_dim(0.4);
  const hkc::RowMatrix u = sample(m, 10000, 2024);
  hkc::FitResult start;
  start.model = m;
  const auto ll = hkc::model_loglik(m, u);
  start.report.loglik_two_step = ll.value;
  bool root = true;
  hkc::for_each_node(m.root, [&](const hkc::ModelNode&, const std::string& p) {
    hkc::NodeReport r;
    r.path = p;
    start.report.nodes.push_back(r);
    root = false;
  });
  const auto joint = hkc::fit_joint_mle(start, u);
  CHECK(std::abs(hkc::copula_tau(joint.model.root.copula) - 0.4) < 0.1);
  CHECK(std::abs(hkc::copula_tau(joint.model.root.children[0].copula) - 0.5) < 0.1);
  CHECK(std::abs(hkc::copula_tau(joint.model.root.children[1].copula) - 0.5) < 0.1);
}

TEST_CASE("joint MLE refuses elliptical clusters unless frozen") {
  const Copula g = Copula::gaussian((Eigen::MatrixXd(2, 2) << 1, 0.5, 0.5, 1).finished());
  hkc::HierarchicalModel m;
  m.n_vars = 4;
  m.root.name = "root";
  m.root.copula = arch(Family::gumbel, 1.5);
  m.root.children = {leaf("a", g, {0, 1}), leaf("b", arch(Family::clayton, 2), {2, 3})};
  hkc::FitOptions o;
  o.kendall_build.mc_size = 5000;
  hkc::RngStream rng(6);
  hkc::prepare_kendall(m, {false, o.kendall_build, 0});
  const hkc::RowMatrix u = hkc::model_sample(m, 300, rng);
  const auto two = hkc::fit_two_step(m, u, o);
  CHECK_THROWS_AS(hkc::fit_joint_mle(two, u, o), hkc::ParameterError);
  o.force_frozen_kendall = true;
  const auto joint = hkc::fit_joint_mle(two, u, o);
  CHECK(joint.report.loglik_joint >= two.report.loglik_two_step);
  CHECK(joint.model.root.children[0].copula.correlation() == two.model.root.children[0].copula.correlation());
}

TEST_CASE("simulation study: structure and determinism") {
  hkc::StudyConfig cfg;
  cfg.nesting = {CopulaFamily::gumbel};
  cfg.tau0 = {0.4};
  cfg.sizes = {100};
  cfg.replications = 3;
  cfg.kendall_mc = 5000;
  const auto a = hkc::simulation_study(cfg);
  REQUIRE(a.size() == 3);
  CHECK(a[0].method == hkc::StudyMethod::two_step_closed);
  CHECK(a[0].ok + a[0].failed == 3);
  cfg.threads = 2;
  const auto b = hkc::simulation_study(cfg);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].mse == b[i].mse);

  cfg.replications = 0;
  CHECK(hkc::simulation_study(cfg).empty());
}
