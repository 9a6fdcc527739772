#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "lipreg/act.hpp"
#include "lipreg/oracle.hpp"

using namespace lipreg;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

bool near(double a, double b, double tol = 1e-12) {
  return std::fabs(a - b) <= tol;
}

PwlMonotone ramp() {
  PwlMonotone f;
  f.vertices = {{0.0, 0.0}, {2.0, 4.0}};
  f.mu_minus = 1.0;
  f.mu_plus = 3.0;
  return f;
}

PwlMonotone random_chain(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> gap(0.05, 1.0);
  std::uniform_real_distribution<double> rise(0.0, 1.0);
  PwlMonotone f;
  double x = -3.0, y = -2.0;
  for (std::size_t i = 0; i < n; ++i) {
    f.vertices.push_back({x, y});
    x += gap(rng);
    y += rise(rng);
  }
  f.mu_minus = rise(rng);
  f.mu_plus = rise(rng);
  return f;
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

TEST_CASE("evaluate matches the explicit chain") {
  const Act f = Act::from_pwl(ramp());
  CHECK(f.size() == 2);
  CHECK(near(f.evaluate(1.0), 2.0));
  CHECK(near(f.evaluate(-1.0), -1.0));
  CHECK(near(f.evaluate(3.0), 7.0));
  CHECK(near(f.evaluate_inverse(2.0), 1.0));
  CHECK(near(f.evaluate_inverse(7.0), 3.0));
}

TEST_CASE("evaluate_inverse resolves plateaus to the left endpoint") {
  PwlMonotone p;
  p.vertices = {{0.0, 1.0}, {2.0, 1.0}, {3.0, 2.0}};
  p.mu_minus = 1.0;
  p.mu_plus = 0.0;
  const Act f = Act::from_pwl(p);
  CHECK(near(f.evaluate_inverse(1.0), 0.0));
  CHECK_THROWS_AS(f.evaluate_inverse(5.0), std::domain_error);
}

TEST_CASE("extract reproduces the source chain") {
  std::mt19937_64 rng(7);
  const PwlMonotone p = random_chain(rng, 37);
  const Act f = Act::from_pwl(p);
  f.validate();
  CHECK(same_chain(f.extract(), p, 1e-12));
}

TEST_CASE("insert returns the rank and keeps order") {
  Act f = Act::from_pwl(ramp());
  const std::size_t r = f.insert({1.0, 2.0});
  CHECK(r == 1);
  CHECK(f.size() == 3);
  CHECK(near(f.vertex_at(1).x, 1.0));
  CHECK(near(f.vertex_at(1).y, 2.0));
  // the chain is unchanged as a function
  for (double x : {-0.5, 0.3, 1.0, 1.9, 2.7}) CHECK(near(f.evaluate(x), Act::from_pwl(ramp()).evaluate(x)));
  f.validate();
}

TEST_CASE("insert rejects points that break monotonicity") {
  Act f = Act::from_pwl(ramp());
  CHECK_THROWS_AS(f.insert({1.0, 5.0}), std::invalid_argument);
  CHECK_THROWS_AS(f.insert({1.0, -1.0}), std::invalid_argument);
}

TEST_CASE("insert_at_rank places equal-x twins deterministically") {
  PwlMonotone p;
  p.vertices = {{0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}};
  p.mu_minus = 1.0;
  p.mu_plus = 1.0;
  Act f = Act::from_pwl(p);
  const std::size_t r = f.insert_at_rank(1, {1.0, 1.0});
  CHECK(r == 1);
  REQUIRE(f.size() == 4);
  CHECK(near(f.vertex_at(1).x, 1.0));
  CHECK(near(f.vertex_at(2).x, 1.0));
  f.validate();
  f.erase_rank(1);
  CHECK(same_chain(f.extract(), p, 1e-12));
  CHECK_THROWS_AS(f.insert_at_rank(9, {5.0, 5.0}), std::invalid_argument);
}

TEST_CASE("erase_x finds a vertex by coordinate") {
  Act f = Act::from_pwl(ramp());
  f.insert({1.0, 2.0});
  f.erase_x(1.0 + 1e-12);
  CHECK(f.size() == 2);
  CHECK_THROWS_AS(f.erase_x(1.0), std::invalid_argument);
}

TEST_CASE("affine composes at the root in one step") {
  std::mt19937_64 rng(11);
  PwlMonotone p = random_chain(rng, 20);
  Act f = Act::from_pwl(p);
  f.affine(AffineMap2::translate(2.0, -0.5));
  p = apply_affine(p, AffineMap2::translate(2.0, -0.5));
  CHECK(same_chain(f.extract(), p, 1e-12));
  f.affine(AffineMap2::vshear(0.5, 1.0));
  p = apply_affine(p, AffineMap2::vshear(0.5, 1.0));
  CHECK(same_chain(f.extract(), p, 1e-12));
  f.validate();
}

TEST_CASE("interval_ranks transforms exactly the addressed range") {
  std::mt19937_64 rng(13);
  PwlMonotone p = random_chain(rng, 25);
  Act f = Act::from_pwl(p);

  f.interval_ranks(10, 24, AffineMap2::translate(0.4, 0.0));
  oracle::model_interval_ranks(p, 10, 24, AffineMap2::translate(0.4, 0.0));
  CHECK(same_chain(f.extract(), p, 1e-12));

  f.interval_ranks(0, 5, AffineMap2::translate(-0.3, -0.2));
  oracle::model_interval_ranks(p, 0, 5, AffineMap2::translate(-0.3, -0.2));
  CHECK(same_chain(f.extract(), p, 1e-12));

  f.interval_ranks(0, 24, AffineMap2::vshear(0.7, 0.1));
  oracle::model_interval_ranks(p, 0, 24, AffineMap2::vshear(0.7, 0.1));
  CHECK(same_chain(f.extract(), p, 1e-11));
  f.validate();
}

TEST_CASE("interval_x addresses vertices by coordinate") {
  PwlMonotone p;
  p.vertices = {{0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}};
  p.mu_minus = 1.0;
  p.mu_plus = 1.0;
  Act f = Act::from_pwl(p);
  f.interval_x(AffineMap2::translate(0.5, 0.0), 2.0 - 1e-9, inf);
  const PwlMonotone q = f.extract();
  CHECK(near(q.vertices[1].x, 1.0));
  CHECK(near(q.vertices[2].x, 2.5));
  CHECK(near(q.vertices[3].x, 3.5));
}

TEST_CASE("integrate matches the quadratic anchor plus chain areas") {
  PwlMonotone p;
  p.vertices = {{1.0, 0.0}};
  p.mu_minus = 2.0;
  p.mu_plus = 2.0;
  // F = 2(x-1), E = (x-1)^2
  const Act f = Act::from_pwl(p, {1.0, -2.0, 1.0});
  CHECK(near(f.integrate(1.0), 0.0));
  CHECK(near(f.integrate(3.0), 4.0));
  CHECK(near(f.integrate(0.0), 1.0));
  CHECK(near(f.integrate(-2.0), 9.0));
}

TEST_CASE("integrate agrees with the reference prefix integral") {
  std::mt19937_64 rng(17);
  for (int round = 0; round < 20; ++round) {
    const PwlMonotone p = random_chain(rng, 1 + round);
    const Act f = Act::from_pwl(p, {0.5, 0.25, -1.0});
    std::uniform_real_distribution<double> px(-6.0, 30.0);
    const double b1 = p.vertices.front().x;
    const double e_base = 0.5 * b1 * b1 + 0.25 * b1 - 1.0;
    for (int k = 0; k < 6; ++k) {
      const double a = px(rng);
      CHECK(near(f.integrate(a), p.integrate_prefix(a, e_base), 1e-9));
    }
  }
}

TEST_CASE("energy_accumulate adds a squared-loss antiderivative") {
  PwlMonotone p;
  p.vertices = {{1.0, 0.0}};
  p.mu_minus = 2.0;
  p.mu_plus = 2.0;
  Act f = Act::from_pwl(p);
  f.energy_accumulate(1.0, 1.0);
  CHECK(near(f.integrate(3.0), 4.0));
  CHECK_THROWS_AS(f.energy_accumulate(0.0, 0.0), std::invalid_argument);
}

TEST_CASE("merge_add sums functions, unmerge_subtract restores") {
  std::mt19937_64 rng(23);
  for (int round = 0; round < 12; ++round) {
    PwlMonotone pf = random_chain(rng, 12 + round);
    PwlMonotone pg = random_chain(rng, 4 + round / 2);
    const EnergyCoeffs ef{1.0, -0.5, 2.0}, eg{0.25, 1.0, -0.75};
    Act f = Act::from_pwl(pf, ef);
    const Act g = Act::from_pwl(pg, eg);
    const PwlMonotone before = f.extract();
    std::vector<double> probes = {-5.0, -1.0, 0.0, 0.7, 2.2, 9.0};
    std::vector<double> fg_int;
    for (double a : probes) fg_int.push_back(f.integrate(a) + g.integrate(a));

    f.merge_add(pg, eg);
    f.validate();
    const PwlMonotone fv = f.extract();
    CHECK(near(f.mu_minus(), pf.mu_minus + pg.mu_minus));
    CHECK(near(f.mu_plus(), pf.mu_plus + pg.mu_plus));
    for (std::size_t k = 0; k < probes.size(); ++k) {
      CHECK(near(f.evaluate(probes[k]), pf.eval(probes[k]) + pg.eval(probes[k]),
                 1e-9));
      CHECK(near(f.integrate(probes[k]), fg_int[k], 1e-9));
    }

    f.unmerge_subtract(pg, eg);
    f.validate();
    CHECK(same_chain(f.extract(), before, 1e-9));
    CHECK(near(f.energy().a, ef.a, 1e-12));
    CHECK(near(f.energy().b, ef.b, 1e-12));
    CHECK(near(f.energy().c, ef.c, 1e-12));
  }
}

TEST_CASE("plateau surgery splits, shifts, and bridges; undo reverses") {
  std::mt19937_64 rng(29);
  for (int round = 0; round < 10; ++round) {
    const PwlMonotone p = random_chain(rng, 15);
    std::uniform_real_distribution<double> pick(p.vertices[3].x,
                                                p.vertices[11].x);
    const double s_star = pick(rng);
    const double y_at = p.eval(s_star);

    const auto check_undo = [&](double gamma, double delta, bool by_x) {
      Act f = Act::from_pwl(p);
      const SurgeryRecord rec = plateau_surgery(f, s_star, y_at, gamma, delta);
      f.validate();
      // shifted left part, plateau, shifted right part
      CHECK(near(f.evaluate(s_star + delta - 1.0), p.eval(s_star - 1.0), 1e-9));
      if (gamma != inf) {
        CHECK(near(f.evaluate(s_star + gamma + 1.0), p.eval(s_star + 1.0), 1e-9));
        if (gamma > delta)
          CHECK(near(f.evaluate(0.5 * (s_star + delta + s_star + gamma)), y_at,
                     1e-9));
      } else {
        CHECK(near(f.evaluate(s_star + delta + 50.0), y_at, 1e-9));
        CHECK(f.mu_plus() == 0.0);
      }
      if (by_x)
        undo_plateau_surgery_by_x(f, rec);
      else
        undo_plateau_surgery(f, rec);
      f.validate();
      CHECK(same_chain(f.extract(), p, 1e-9));
    };

    check_undo(0.8, -0.3, false);
    check_undo(0.8, -0.3, true);
    check_undo(inf, -0.1, false);
    check_undo(inf, -0.1, true);
    check_undo(0.4, 0.4, false);
    check_undo(0.4, 0.4, true);
  }
}

TEST_CASE("random operation stream stays consistent with the chain model") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PwlMonotone model;
  model.mu_minus = 0.3;
  model.mu_plus = 0.7;
  model.vertices = {{0.0, 0.0}};
  Act f = Act::from_pwl(model);

  const auto probe = [&](double tol) {
    std::uniform_real_distribution<double> px(-8.0, 20.0);
    for (int k = 0; k < 3; ++k) {
      const double x = px(rng);
      CHECK(near(f.evaluate(x), model.eval(x), tol));
    }
    CHECK(f.size() == model.size());
    CHECK(near(f.mu_minus(), model.mu_minus, tol));
    CHECK(near(f.mu_plus(), model.mu_plus, tol));
  };

  for (int op = 0; op < 1200; ++op) {
    const double roll = unit(rng);
    const std::size_t n = model.size();
    if (roll < 0.45 && n < 220) {
      const double lo = model.vertices.front().x - 2.0;
      const double hi = model.vertices.back().x + 2.0;
      std::uniform_real_distribution<double> px(lo, hi);
      const double x = px(rng);
      bool close = false;
      for (const Point2& q : model.vertices)
        if (std::fabs(q.x - x) < 1e-7) close = true;
      if (close) continue;
      const double y = model.eval(x);
      f.insert({x, y});
      std::size_t at = 0;
      while (at < n && model.vertices[at].x < x) ++at;
      model.vertices.insert(model.vertices.begin() + at, {x, y});
    } else if (roll < 0.6 && n > 1) {
      std::uniform_int_distribution<std::size_t> pr(0, n - 1);
      const std::size_t r = pr(rng);
      f.erase_rank(r);
      model.vertices.erase(model.vertices.begin() + r);
    } else if (roll < 0.72) {
      const AffineMap2 psi =
          AffineMap2::translate(unit(rng) - 0.5, unit(rng) - 0.5);
      f.affine(psi);
      model = apply_affine(model, psi);
    } else if (roll < 0.84) {
      const AffineMap2 psi = AffineMap2::vshear(unit(rng), unit(rng) - 0.5);
      f.affine(psi);
      model = apply_affine(model, psi);
    } else if (n > 2) {
      std::uniform_int_distribution<std::size_t> pr(1, n - 1);
      const std::size_t k = pr(rng);
      if (unit(rng) < 0.5) {
        const AffineMap2 psi = AffineMap2::translate(unit(rng), unit(rng));
        f.interval_ranks(k, n - 1, psi);
        oracle::model_interval_ranks(model, k, n - 1, psi);
      } else {
        const AffineMap2 psi = AffineMap2::translate(-unit(rng), -unit(rng));
        f.interval_ranks(0, k - 1, psi);
        oracle::model_interval_ranks(model, 0, k - 1, psi);
      }
    }
    probe(1e-9);
    if (op % 50 == 49) {
      f.validate();
      CHECK(same_chain(f.extract(), model, 1e-9));
    }
  }
  f.validate();
  CHECK(same_chain(f.extract(), model, 1e-9));
}

TEST_CASE("height stays logarithmic") {
  std::mt19937_64 rng(37);
  const std::size_t n = 5000;
  PwlMonotone p = random_chain(rng, n);
  Act f = Act::from_pwl(p);
  const double bound = 2.0 * std::log2(static_cast<double>(n + 1)) + 2.0;
  CHECK(static_cast<double>(f.height()) <= bound);
  // grow it further by on-chain inserts
  std::uniform_real_distribution<double> px(p.vertices.front().x,
                                            p.vertices.back().x);
  for (int k = 0; k < 2000; ++k) {
    const double x = px(rng);
    f.insert({x, f.evaluate(x)});
  }
  f.validate();
  CHECK(static_cast<double>(f.height()) <=
        2.0 * std::log2(static_cast<double>(f.size() + 1)) + 2.0);
}

TEST_CASE("stats counters move") {
  ActStats st;
  std::mt19937_64 rng(41);
  PwlMonotone p = random_chain(rng, 64);
  Act f = Act::from_pwl(p, {}, &st);
  std::uniform_real_distribution<double> px(p.vertices.front().x,
                                            p.vertices.back().x);
  for (int k = 0; k < 50; ++k) {
    const double x = px(rng);
    f.insert({x, f.evaluate(x)});
  }
  CHECK(st.rotations > 0);
  const PwlMonotone g = random_chain(rng, 8);
  const std::uint64_t before = st.merged_breakpoints;
  f.merge_add(g);
  CHECK(st.merged_breakpoints >= before + g.size());
}
