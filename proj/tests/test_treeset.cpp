#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "lipreg/regress_path.hpp"
#include "lipreg/treeset.hpp"

using namespace lipreg;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

bool near(double a, double b, double tol = 1e-12) {
  return std::fabs(a - b) <= tol;
}

Act line(double slope, double x0) {
  PwlMonotone p;
  p.vertices = {{x0, 0.0}};
  p.mu_minus = slope;
  p.mu_plus = slope;
  return Act::from_pwl(p);
}

bool same_chain(const PwlMonotone& a, const PwlMonotone& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!near(a.vertices[i].x, b.vertices[i].x, tol)) return false;
    if (!near(a.vertices[i].y, b.vertices[i].y, tol)) return false;
  }
  return near(a.mu_minus, b.mu_minus, tol) && near(a.mu_plus, b.mu_plus, tol);
}

}  // namespace

TEST_CASE("sum queries add member functions") {
  TreeSet s;
  s.include(line(1.0, 1.0));   // x - 1
  s.include(line(1.0, -1.0));  // x + 1
  CHECK(s.members() == 2);
  CHECK(near(s.evaluate(3.0), 6.0));
  CHECK(near(s.evaluate_inverse(0.0), 0.0));
  const Act back = s.uninclude();
  CHECK(near(back.evaluate(3.0), 4.0));
  CHECK(s.members() == 1);
}

TEST_CASE("free sum helpers skip empty members") {
  const Act a = line(2.0, 0.0);
  const Act empty;
  std::vector<const Act*> fs{&a, &empty};
  CHECK(near(sum_evaluate(fs, 2.0), 4.0));
  CHECK(near(sum_evaluate_inverse(fs, 4.0), 2.0));
  // E(b1)=0 anchor: integral of 2x from 0 to 3 is 9
  CHECK(near(sum_integrate(fs, 3.0), 9.0));
}

TEST_CASE("sum inverse narrows across several members") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> off(-4.0, 4.0);
  for (int round = 0; round < 30; ++round) {
    TreeSet s;
    const int k = 2 + round % 4;
    for (int j = 0; j < k; ++j) s.include(line(0.5 + 0.25 * j, off(rng)));
    const double target = off(rng);
    const double x = s.evaluate_inverse(target);
    CHECK(near(s.evaluate(x), target, 1e-9));
    for (int j = 0; j < k; ++j) s.uninclude();
  }
}

TEST_CASE("integrate sums member antiderivatives") {
  TreeSet s;
  PwlMonotone p;
  p.vertices = {{1.0, 0.0}};
  p.mu_minus = 2.0;
  p.mu_plus = 2.0;
  s.include(Act::from_pwl(p, {1.0, -2.0, 1.0}));  // (x-1)^2
  PwlMonotone q;
  q.vertices = {{0.0, 0.0}};
  q.mu_minus = 4.0;
  q.mu_plus = 4.0;
  s.include(Act::from_pwl(q, {2.0, 0.0, 0.0}));  // 2 x^2
  CHECK(near(s.integrate(2.0), 1.0 + 8.0));
  CHECK(near(s.integrate(-1.0), 4.0 + 2.0));
}

TEST_CASE("update windows every member at the shared minimizer") {
  TreeSet s;
  s.include(line(2.0, 1.0));   // 2(x-1)
  s.include(line(2.0, -1.0));  // 2(x+1)
  // sum = 4x, zero at 0; window [delta, gamma] = [-0.5, 2]
  const double s_star = s.update(0.0, 2.0, -0.5, 0.0);
  CHECK(near(s_star, 0.0));
  // each member is flat on [s* + delta, s* + gamma] at its own value
  CHECK(near(s.member(0).evaluate(0.7), -2.0));
  CHECK(near(s.member(1).evaluate(0.7), 2.0));
  CHECK(near(s.evaluate(0.7), 0.0));
  CHECK(near(s.evaluate(3.0), 4.0 * (3.0 - 2.0)));
  s.unupdate();
  CHECK(near(s.evaluate(0.7), 4.0 * 0.7));
  s.uninclude();
  s.uninclude();
  CHECK(s.empty());
}

TEST_CASE("update with a weight shears the base member only") {
  TreeSet s;
  s.include(line(2.0, 1.0));
  s.include(line(2.0, 3.0));
  const double s_star = s.update(5.0, 1.0, 0.0, 1.0);
  // sum after shear: 2(x-1) + 2(x-3) + 2(x-5) = 6x - 18
  CHECK(near(s_star, 3.0));
  CHECK(near(s.member(0).mu_plus(), 4.0));
  CHECK(near(s.member(1).mu_plus(), 2.0));
  s.unupdate();
  CHECK(near(s.evaluate(0.0), -8.0));
  CHECK(near(s.member(0).mu_plus(), 2.0));
}

TEST_CASE("first update on an empty set builds the windowed parabola") {
  TreeSet s;
  const double s_star = s.update(2.0, 0.5, -0.25, 1.0);
  CHECK(near(s_star, 2.0));
  CHECK(s.members() == 1);
  CHECK(near(s.evaluate(1.0), 2.0 * (1.0 - 1.75)));
  CHECK(near(s.evaluate(2.0), 0.0));  // inside the plateau
  CHECK(near(s.evaluate(3.0), 2.0 * (3.0 - 2.5)));
  CHECK(near(s.integrate(1.75), 0.0, 1e-12));
  CHECK(near(s.integrate(1.0), 0.75 * 0.75, 1e-12));
  s.unupdate();
  CHECK(s.empty());
}

TEST_CASE("weightless update on a fully capped sum uses the flat tail") {
  TreeSet s;
  Act a = line(2.0, 0.0);
  UpdateRecord ra = act_update(a, 0.0, inf, 0.0, 1.0);  // caps a at its zero
  s.include(std::move(a));
  Act b = line(2.0, 4.0);
  UpdateRecord rb = act_update(b, 4.0, inf, 0.0, 1.0);
  s.include(std::move(b));
  CHECK(s.member(0).mu_plus() == 0.0);
  CHECK(s.member(1).mu_plus() == 0.0);
  const double s_star = s.update(0.0, inf, -0.5, 0.0);
  // rightmost cap anchor wins
  CHECK(near(s_star, 4.0, 1e-9));
  s.unupdate();
  CHECK(s.members() == 2);
}

TEST_CASE("update round trips restore every member exactly") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> off(-3.0, 3.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int round = 0; round < 25; ++round) {
    TreeSet s;
    const int k = 1 + round % 3;
    std::vector<PwlMonotone> snaps;
    for (int j = 0; j < k; ++j) {
      Act m = line(1.0 + unit(rng), off(rng));
      act_update(m, off(rng), 1.0 + unit(rng), -unit(rng), 1.0);
      snaps.push_back(m.extract());
      s.include(std::move(m));
    }
    const int updates = 1 + round % 4;
    for (int u = 0; u < updates; ++u) {
      double gamma, delta;
      switch (u % 3) {
        case 0: gamma = 1.0 + unit(rng); delta = -unit(rng); break;
        case 1: gamma = inf; delta = -unit(rng); break;
        default: gamma = delta = 0.5 * unit(rng); break;
      }
      s.update(off(rng), gamma, delta, u % 2 ? 0.0 : 1.0 + unit(rng));
    }
    for (int u = 0; u < updates; ++u) s.unupdate();
    for (int j = k; j-- > 0;) {
      const Act m = s.uninclude();
      CHECK(same_chain(m.extract(), snaps[j], 1e-9));
    }
    CHECK(s.empty());
  }
}

TEST_CASE("merge folds into the base member and unmerge removes it") {
  TreeSet s;
  s.include(line(1.0, 0.0));
  PwlMonotone g;
  g.vertices = {{-1.0, 0.0}, {1.0, 2.0}};
  g.mu_minus = 1.0;
  g.mu_plus = 1.0;
  const PwlMonotone before = s.member(0).extract();
  s.merge(g, {0.5, 0.0, 0.0});
  CHECK(s.members() == 1);
  CHECK(near(s.evaluate(2.0), 2.0 + 3.0));
  s.unmerge(g, {0.5, 0.0, 0.0});
  CHECK(same_chain(s.member(0).extract(), before, 1e-9));
}

TEST_CASE("affine distributes translations and targets vertical maps") {
  TreeSet s;
  s.include(line(1.0, 0.0));
  s.include(line(1.0, 2.0));
  s.affine(AffineMap2::translate(1.0, 0.0));
  CHECK(near(s.evaluate(2.0), (2.0 - 1.0) + (2.0 - 3.0)));
  s.affine(AffineMap2::vshear(2.0, 0.0));
  // the shear lands on one member; the sum gains 2x
  CHECK(near(s.evaluate(2.0), 4.0));
  CHECK_THROWS(s.affine(AffineMap2{2.0, 0.0, 0.0, 1.0, 0.0, 0.0}));
}
