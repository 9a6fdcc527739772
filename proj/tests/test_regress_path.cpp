#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "lipreg/oracle.hpp"
#include "lipreg/regress_path.hpp"

using namespace lipreg;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

bool near(double a, double b, double tol = 1e-12) {
  return std::fabs(a - b) <= tol;
}

bool same_chain(const PwlMonotone& a, const PwlMonotone& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!near(a.vertices[i].x, b.vertices[i].x, tol)) return false;
    if (!near(a.vertices[i].y, b.vertices[i].y, tol)) return false;
  }
  return near(a.mu_minus, b.mu_minus, tol) && near(a.mu_plus, b.mu_plus, tol);
}

PathInstance random_path(std::mt19937_64& rng, std::size_t n, int mode) {
  std::uniform_real_distribution<double> step(-1.0, 1.0);
  std::uniform_real_distribution<double> g(0.0, 4.0), d(0.0, 1.0);
  std::uniform_real_distribution<double> w(0.1, 8.0);
  PathInstance pi;
  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    t += step(rng);
    pi.t.push_back(t);
    pi.lambda.push_back(mode >= 2 ? w(rng) : 1.0);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    switch (mode % 4) {
      case 0: pi.gamma.push_back(inf); pi.delta.push_back(0.0); break;
      case 1: pi.gamma.push_back(g(rng)); pi.delta.push_back(-d(rng)); break;
      case 2: pi.gamma.push_back(0.0); pi.delta.push_back(0.0); break;
      default:
        // per-edge mix, infinite caps included
        if (i % 3 == 0) {
          pi.gamma.push_back(inf);
          pi.delta.push_back(-d(rng));
        } else {
          const double dd = d(rng) - 0.5;
          pi.gamma.push_back(dd + g(rng));
          pi.delta.push_back(dd);
        }
    }
  }
  return pi;
}

}  // namespace

TEST_CASE("first update builds the windowed parabola frontier") {
  Act f(0.0, 0.0);
  const UpdateRecord rec = act_update(f, 1.0, 0.5, 0.0, 1.0);
  CHECK(rec.first);
  CHECK(near(rec.s_star, 1.0));
  REQUIRE(f.size() == 2);
  CHECK(near(f.vertex_at(0).x, 1.0));
  CHECK(near(f.vertex_at(1).x, 1.5));
  CHECK(near(f.mu_minus(), 2.0));
  CHECK(near(f.mu_plus(), 2.0));
  CHECK(near(f.integrate(1.0), 0.0));   // the window keeps the minimum at 0
  CHECK(near(f.integrate(0.0), 1.0));

  const UpdateRecord rec2 = act_update(f, 0.0, 0.5, 0.0, 1.0);
  CHECK(near(rec2.s_star, 0.5));
}

TEST_CASE("terminal update skips the window") {
  Act f(0.0, 0.0);
  act_update(f, 2.0, 0.0, 0.0, 3.0, false);
  REQUIRE(f.size() == 1);
  CHECK(near(f.vertex_at(0).x, 2.0));
  CHECK(near(f.integrate(3.0), 3.0));
}

TEST_CASE("backsolve clamps the stored minimizer into the edge window") {
  CHECK(near(backsolve_step(1.0, 0.5, 0.5, 0.0), 0.5));
  CHECK(near(backsolve_step(0.0, 5.0, 1.0, -1.0), 1.0));
  CHECK(near(backsolve_step(0.0, -5.0, 1.0, -1.0), -1.0));
  CHECK(near(backsolve_step(0.0, -5.0, inf, -1.0), -5.0));
}

TEST_CASE("two-point cap splits the gap") {
  const RegressionResult r = lir_path(PathInstance::uniform({0.0, 10.0}, 1.0));
  CHECK(near(r.s[0], 4.5, 1e-12));
  CHECK(near(r.s[1], 5.5, 1e-12));
  CHECK(near(r.energy, 40.5, 1e-12));
}

TEST_CASE("monotone fit pools violating blocks") {
  const RegressionResult r =
      lir_path(PathInstance::uniform({3.0, 1.0, 2.0}, inf));
  for (double v : r.s) CHECK(near(v, 2.0, 1e-12));
  CHECK(near(r.energy, 2.0, 1e-12));
}

TEST_CASE("single vertex fits exactly") {
  const RegressionResult r = lir_path(PathInstance::uniform({7.5}, 1.0));
  CHECK(near(r.s[0], 7.5));
  CHECK(near(r.energy, 0.0));
  const RegressionResult u = lur_path(PathInstance::uniform({7.5}, 1.0));
  CHECK(u.root == 0);
  CHECK(near(u.s[0], 7.5));
}

TEST_CASE("matches the quadratic dp across parameter regimes") {
  std::mt19937_64 rng(43);
  for (int round = 0; round < 150; ++round) {
    const std::size_t n = 1 + rng() % 60;
    const PathInstance pi = random_path(rng, n, round % 5);
    const RegressionResult fast = lir_path(pi);
    const RegressionResult ref = oracle::dp_lir_path(pi);
    REQUIRE(fast.s.size() == n);
    CHECK(oracle::feasible_path(pi, fast.s, 1e-9));
    CHECK(near(fast.energy, ref.energy, 1e-8 * (1.0 + ref.energy)));
    for (std::size_t i = 0; i < n; ++i) CHECK(near(fast.s[i], ref.s[i], 1e-6));
  }
}

TEST_CASE("unconstrained rise cap reproduces pava") {
  std::mt19937_64 rng(47);
  for (int round = 0; round < 40; ++round) {
    const std::size_t n = 1 + rng() % 80;
    PathInstance pi = random_path(rng, n, 0);
    std::uniform_real_distribution<double> w(0.2, 5.0);
    for (auto& l : pi.lambda) l = w(rng);
    const RegressionResult r = lir_path(pi);
    const auto p = oracle::pava_isotonic(pi.t, pi.lambda);
    for (std::size_t i = 0; i < n; ++i) CHECK(near(r.s[i], p[i], 1e-9));
  }
}

TEST_CASE("final frontier derivative carries the full weight") {
  std::mt19937_64 rng(53);
  const PathInstance pi = random_path(rng, 24, 3);
  PwlMonotone frontier;
  SolveStats stats;
  lir_path(pi, &stats, &frontier);
  frontier.validate();
  double lam = 0.0;
  for (double l : pi.lambda) lam += l;
  // infinite caps truncate the right ray but never the left one
  CHECK(near(frontier.mu_minus, 2.0 * lam, 1e-9));
  CHECK(stats.updates == pi.n());
  CHECK(stats.rotations > 0);

  const PathInstance pe = random_path(rng, 16, 2);
  PwlMonotone fe;
  lir_path(pe, nullptr, &fe);
  lam = 0.0;
  for (double l : pe.lambda) lam += l;
  CHECK(near(fe.mu_minus, 2.0 * lam, 1e-9));
  CHECK(near(fe.mu_plus, 2.0 * lam, 1e-9));
}

TEST_CASE("update sequences unwind to the exact starting state") {
  std::mt19937_64 rng(59);
  for (int by_x = 0; by_x < 2; ++by_x) {
    for (int round = 0; round < 20; ++round) {
      const PathInstance pi = random_path(rng, 12, 1 + round % 3);
      Act f(0.0, 0.0);
      std::vector<PwlMonotone> snaps;
      std::vector<UpdateRecord> recs;
      for (std::size_t i = 0; i < pi.n(); ++i) {
        snaps.push_back(f.extract());
        const bool last = i + 1 == pi.n();
        recs.push_back(act_update(f, pi.t[i], last ? 0.0 : pi.gamma[i],
                                  last ? 0.0 : pi.delta[i], pi.lambda[i],
                                  !last));
      }
      for (std::size_t i = pi.n(); i-- > 0;) {
        if (by_x)
          act_unupdate_by_x(f, recs[i]);
        else
          act_unupdate(f, recs[i]);
        CHECK(same_chain(f.extract(), snaps[i], 1e-9));
      }
      CHECK(f.empty());
      CHECK(near(f.energy().a, 0.0, 1e-12));
      CHECK(near(f.energy().b, 0.0, 1e-9));
      CHECK(near(f.energy().c, 0.0, 1e-9));
    }
  }
}

TEST_CASE("apex scan matches the exhaustive reference") {
  std::mt19937_64 rng(61);
  for (int round = 0; round < 100; ++round) {
    const std::size_t n = 1 + rng() % 40;
    const PathInstance pi = random_path(rng, n, 1 + round % 4);
    const RegressionResult fast = lur_path(pi);
    const RegressionResult ref = oracle::brute_lur_path(pi);
    REQUIRE(fast.s.size() == n);
    CHECK(oracle::feasible_unimodal_tree(oracle::path_as_tree(pi), fast.s,
                                         fast.root));
    CHECK(near(fast.energy, ref.energy, 1e-8 * (1.0 + ref.energy)));
    if (fast.root == ref.root)
      for (std::size_t i = 0; i < n; ++i)
        CHECK(near(fast.s[i], ref.s[i], 1e-6));
  }
}

TEST_CASE("apex scan on a small ridge") {
  // unimodal data: the middle vertex should win outright
  PathInstance pi = PathInstance::uniform({0.0, 2.0, 0.0}, 1.0);
  const RegressionResult r = lur_path(pi);
  CHECK(r.root == 1);
  CHECK(near(r.s[0], 1.0 / 3.0, 1e-9));
  CHECK(near(r.s[1], 4.0 / 3.0, 1e-9));
  CHECK(near(r.s[2], 1.0 / 3.0, 1e-9));
  CHECK(near(r.energy, 2.0 / 3.0, 1e-9));
}
