#include <array>
#include <cmath>
#include <random>

#include "doctest.h"
#include "hkc/copulas.hpp"
#include "hkc/errors.hpp"
#include "hkc/levelset.hpp"
#include "hkc/rng.hpp"
#include "hkc/stats.hpp"

using hkc::Copula;
using hkc::Family;
using hkc::Generator;

TEST_CASE("conditional level-set cdf") {
  const Generator c(Family::clayton, 2.0);
  const double u = 1.0 / std::sqrt(13.0);
  CHECK(hkc::conditional_levelset_cdf(c, 2, {}, 0.2, u) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(hkc::conditional_levelset_cdf(c, 3, {}, 0.2, u) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(hkc::conditional_levelset_cdf(c, 2, {}, 0.2, 0.2773501) == doctest::Approx(0.5).epsilon(1e-6));
  const std::array<double, 1> pre{0.5};
  CHECK(hkc::conditional_levelset_cdf(Generator(Family::gumbel, 2.0), 4, pre, 0.2, 1.0) == 1.0);
  CHECK_THROWS_AS(hkc::conditional_levelset_cdf(c, 2, {}, 0.2, 0.2), hkc::SupportError);
  CHECK_THROWS_AS(hkc::conditional_levelset_cdf(c, 2, {}, 0.2, 0.1), hkc::SupportError);
}

TEST_CASE("property: conditional level-set cdf is a distribution function on its support") {
  const Generator g(Family::frank, 4.0);
  const std::array<double, 1> pre{0.6};
  const double z = 0.3;
  const double lower = g.inverse(g.value(z) - g.value(0.6));
  double prev = 0.0;
  for (double u = lower + 1e-9; u < 1.0; u += 0.01) {
    const double v = hkc::conditional_levelset_cdf(g, 3, pre, z, u);
    CHECK(v >= prev);
    CHECK(v <= 1.0);
    prev = v;
  }
  CHECK(hkc::conditional_levelset_cdf(g, 3, pre, z, lower * (1 + 1e-12)) < 1e-6);
}

TEST_CASE("conditional inverse traces") {
  const Generator c(Family::clayton, 2.0);
  std::array<double, 2> u{};
  const std::array<double, 1> v{0.5};
  hkc::levelset_conditional_from_uniforms(c, 2, 0.2, v, u);
  CHECK(u[0] == doctest::Approx(0.2773501).epsilon(1e-6));
  CHECK(u[1] == doctest::Approx(0.2773501).epsilon(1e-6));

  // v -> 1 leaves no generator mass to the first coordinate, v -> 0 all of it.
  const std::array<double, 1> top{1.0 - 1e-15};
  hkc::levelset_conditional_from_uniforms(c, 2, 0.2, top, u);
  CHECK(u[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(u[1] == doctest::Approx(0.2).epsilon(1e-9));
  const std::array<double, 1> bottom{1e-300};
  hkc::levelset_conditional_from_uniforms(c, 2, 0.2, bottom, u);
  CHECK(u[0] == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(u[1] == 1.0);

  hkc::levelset_conditional_from_uniforms(Generator::independence(), 2, 0.25, v, u);
  CHECK(u[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(u[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("projected traces") {
  const Generator c(Family::clayton, 2.0);
  std::array<double, 2> u{};
  const std::array<double, 2> s{0.5, 0.5};
  hkc::levelset_projected_from_simplex(c, 0.2, s, u);
  CHECK(u[0] == doctest::Approx(0.2773501).epsilon(1e-6));
  CHECK(u[1] == doctest::Approx(0.2773501).epsilon(1e-6));
  std::array<double, 3> w{};
  const std::array<double, 3> vertex{1.0, 0.0, 0.0};
  hkc::levelset_projected_from_simplex(Generator(Family::gumbel, 3.0), 0.4, vertex, w);
  CHECK(w[0] == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(w[1] == 1.0);
  CHECK(w[2] == 1.0);
}

TEST_CASE("conditional inverse consumes exactly d-1 uniforms") {
  hkc::RngStream a(5), b(5);
  (void)hkc::sample_levelset_conditional(Generator(Family::gumbel, 2.0), 4, 0.3, a);
  for (int i = 0; i < 3; ++i) (void)b.uniform();
  CHECK(a.uniform() == b.uniform());
}

TEST_CASE("property: level-set samples lie on the level set") {
  std::mt19937_64 eng(12);
  std::uniform_real_distribution<double> un(0.0, 1.0);
  hkc::RngStream rng(12);
  for (int i = 0; i < 2000; ++i) {
    const int d = 2 + static_cast<int>(un(eng) * 4);
    const double z = 0.001 + 0.998 * un(eng);
    const double t = 0.05 + 0.85 * un(eng);
    const auto f = std::array{Family::clayton, Family::gumbel, Family::frank}[static_cast<std::size_t>(un(eng) * 3)];
    const Generator g = Generator::from_tau(f, t);
    const Copula c = Copula::archimedean(g, d);
    const auto s1 = hkc::sample_levelset_conditional(g, d, z, rng);
    const auto s2 = hkc::sample_levelset_projected(g, d, z, rng);
    CHECK_MESSAGE(std::abs(c.cdf(s1.u) - z) < 1e-9, hkc::to_string(f) << " d=" << d << " theta=" << g.theta() << " z=" << z);
    CHECK_MESSAGE(std::abs(c.cdf(s2.u) - z) < 1e-9, hkc::to_string(f) << " d=" << d << " theta=" << g.theta() << " z=" << z);
    CHECK(std::abs(s1.z_achieved - s1.z_target) < 1e-9);
    for (double x : s1.u) CHECK(x >= z - 1e-12);
  }
}

TEST_CASE("conditional and projected samplers agree in distribution") {
  const Generator g(Family::gumbel, 2.0);
  hkc::RngStream ra(1), rb(2);
  const int n = 10000;
  for (int j = 0; j < 3; ++j) {
    std::vector<double> a(n), b(n);
    hkc::RngStream r1 = hkc::RngStream::derive(90, {static_cast<std::uint64_t>(j), 0});
    hkc::RngStream r2 = hkc::RngStream::derive(90, {static_cast<std::uint64_t>(j), 1});
    for (int i = 0; i < n; ++i) {
      a[static_cast<std::size_t>(i)] = hkc::sample_levelset_conditional(g, 3, 0.3, r1).u[static_cast<std::size_t>(j)];
      b[static_cast<std::size_t>(i)] = hkc::sample_levelset_projected(g, 3, 0.3, r2).u[static_cast<std::size_t>(j)];
    }
    CHECK(hkc::ks_two_sample(a, b).p_value > 0.01);
  }
}

TEST_CASE("composition with the Kendall inverse reproduces the copula") {
  const Generator g(Family::frank, 7.0);
  const auto k = Copula::archimedean(g, 2).closed_kendall();
  hkc::RngStream rng(71);
  std::vector<double> a(10000), b(10000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto s = hkc::sample_levelset_conditional(g, 2, k.inverse(rng.uniform()), rng);
    a[i] = s.u[0];
    b[i] = s.u[1];
  }
  CHECK(std::abs(hkc::kendall_tau(a, b) - g.tau()) < 0.02);
}

TEST_CASE("tolerance rule band membership") {
  hkc::ToleranceRule abs{hkc::ToleranceRule::Mode::absolute, 0.01};
  CHECK(abs.accepts(0.195, 0.2));
  CHECK_FALSE(abs.accepts(0.25, 0.2));
  hkc::ToleranceRule rel{hkc::ToleranceRule::Mode::relative, 0.01};
  CHECK(rel.band(0.2) == doctest::Approx(0.002));
  CHECK_FALSE(rel.accepts(0.195, 0.2));
}

TEST_CASE("rejection sampling respects its band") {
  const Copula c = Copula::archimedean(Generator(Family::clayton, 2.0), 2);
  hkc::RngStream rng(3);
  const hkc::ToleranceRule rel{hkc::ToleranceRule::Mode::relative, 0.01};
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto s = hkc::sample_levelset_rejection(c, 0.2, rel, rng);
    worst = std::max(worst, std::abs(s.z_achieved - 0.2) / 0.2);
    CHECK(s.method == hkc::LevelSetMethod::rejection);
    CHECK(s.attempts >= 1);
  }
  CHECK(worst <= 0.01);
  const hkc::ToleranceRule tiny{hkc::ToleranceRule::Mode::absolute, 1e-15};
  CHECK_THROWS_AS(hkc::sample_levelset_rejection(c, 0.2, tiny, rng, 1000), hkc::AttemptCapError);
}

TEST_CASE("batch rejection assigns the nearest admissible pending target") {
  const Copula c = Copula::independence(2);
  const hkc::ToleranceRule abs{hkc::ToleranceRule::Mode::absolute, 0.05};
  std::vector<double> z{0.2, 0.21, 0.5, 0.5, 0.8};
  hkc::RngStream rng(4);
  std::size_t draws = 0;
  const auto out = hkc::sample_levelset_batch(c, z, abs, rng, 100000, {}, &draws);
  CHECK(draws >= z.size());
  for (std::size_t j = 0; j < z.size(); ++j) {
    const std::array<double, 2> u{out(static_cast<Eigen::Index>(j), 0), out(static_cast<Eigen::Index>(j), 1)};
    CHECK(std::abs(c.cdf(u) - z[j]) < 0.05);
  }
}

TEST_CASE("batch rejection is deterministic and follows the nearest-target rule") {
  // Replay the draw stream and check each assignment against a brute-force search.
  const Copula c = Copula::archimedean(Generator(Family::gumbel, 1.5), 2);
  const hkc::ToleranceRule rel{hkc::ToleranceRule::Mode::relative, 0.05};
  std::vector<double> z;
  for (int i = 1; i < 40; ++i) z.push_back(i / 40.0);
  hkc::RngStream a(8);
  const auto out = hkc::sample_levelset_batch(c, z, rel, a);

  hkc::RngStream b(8);
  std::vector<bool> pending(z.size(), true);
  std::size_t left = z.size();
  std::array<double, 2> u{};
  while (left > 0) {
    c.sample_into(b, u);
    const double v = c.cdf(u);
    std::size_t best = z.size();
    for (std::size_t j = 0; j < z.size(); ++j)
      if (pending[j] && rel.accepts(v, z[j]) && (best == z.size() || std::abs(v - z[j]) < std::abs(v - z[best]))) best = j;
    if (best == z.size()) continue;
    CHECK(out(static_cast<Eigen::Index>(best), 0) == u[0]);
    CHECK(out(static_cast<Eigen::Index>(best), 1) == u[1]);
    pending[best] = false;
    --left;
  }
}
