#pragma once

// Plain piecewise-linear monotone functions and 2D affine maps.
//
// PwlMonotone is the explicit (reference) representation: a strictly
// x-increasing vertex chain with linear interpolation between vertices and
// unbounded rays of slope mu_minus / mu_plus beyond the first / last vertex.
// It is the ground truth the composition-tree structure is checked against.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace lipreg {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline bool operator==(const Point2& a, const Point2& b) { return a.x == b.x && a.y == b.y; }

// q |-> M q + c with M = ((m11, m12), (m21, m22)), c = (cx, cy).
struct AffineMap2 {
  double m11 = 1.0, m12 = 0.0;
  double m21 = 0.0, m22 = 1.0;
  double cx = 0.0, cy = 0.0;

  Point2 operator()(Point2 q) const {
    return {m11 * q.x + m12 * q.y + cx, m21 * q.x + m22 * q.y + cy};
  }
  double det() const { return m11 * m22 - m12 * m21; }
  bool is_identity() const {
    return m11 == 1.0 && m12 == 0.0 && m21 == 0.0 && m22 == 1.0 && cx == 0.0 && cy == 0.0;
  }
  // Pure x-translation composed with a vertical shear; the only family the
  // solvers emit.  Keeps several hot paths on closed-form shortcuts.
  bool is_unipotent() const { return m11 == 1.0 && m12 == 0.0 && m22 == 1.0; }

  AffineMap2 inverse() const;

  static AffineMap2 translate(double dx, double dy) { return {1, 0, 0, 1, dx, dy}; }
  // y' = y + a*x + b, x unchanged.
  static AffineMap2 vshear(double a, double b) { return {1, 0, a, 1, 0, b}; }
};

// Unipotent maps compose to unipotent maps without any arithmetic touching
// the fixed coefficients, so solver workloads stay on these shortcuts for
// every composition in a descent.
inline AffineMap2 AffineMap2::inverse() const {
  if (is_unipotent()) {
    AffineMap2 r;
    r.m21 = -m21;
    r.cx = -cx;
    r.cy = m21 * cx - cy;
    return r;
  }
  const double d = det();
  if (std::fabs(d) < 1e-12) throw std::invalid_argument("AffineMap2: singular map");
  AffineMap2 r;
  r.m11 = m22 / d;
  r.m12 = -m12 / d;
  r.m21 = -m21 / d;
  r.m22 = m11 / d;
  r.cx = -(r.m11 * cx + r.m12 * cy);
  r.cy = -(r.m21 * cx + r.m22 * cy);
  return r;
}

// (a o b)(q) = a(b(q)).
inline AffineMap2 compose(const AffineMap2& a, const AffineMap2& b) {
  if (a.is_unipotent() && b.is_unipotent()) {
    AffineMap2 r;
    r.m21 = a.m21 + b.m21;
    r.cx = a.cx + b.cx;
    r.cy = a.m21 * b.cx + b.cy + a.cy;
    return r;
  }
  AffineMap2 r;
  r.m11 = a.m11 * b.m11 + a.m12 * b.m21;
  r.m12 = a.m11 * b.m12 + a.m12 * b.m22;
  r.m21 = a.m21 * b.m11 + a.m22 * b.m21;
  r.m22 = a.m21 * b.m12 + a.m22 * b.m22;
  r.cx = a.m11 * b.cx + a.m12 * b.cy + a.cx;
  r.cy = a.m21 * b.cx + a.m22 * b.cy + a.cy;
  return r;
}

struct PwlMonotone {
  std::vector<Point2> vertices;  // strictly increasing x, nondecreasing y
  double mu_minus = 0.0;         // slope left of vertices.front(), >= 0
  double mu_plus = 0.0;          // slope right of vertices.back(), >= 0

  bool empty() const { return vertices.empty(); }
  std::size_t size() const { return vertices.size(); }

  // Throws std::invalid_argument when the chain is not xy-monotone or a slope
  // is negative.
  void validate() const;

  double eval(double x) const;
  // Leftmost preimage; plateaus resolve to their left endpoint.  Throws when
  // y lies below (above) all values and mu_minus (mu_plus) is zero.
  double eval_inverse(double y) const;
  // e_base + integral of the function from its first breakpoint to a.
  double integrate_prefix(double a, double e_base) const;
};

// Image of the graph under psi; throws if the image is not xy-monotone.
PwlMonotone apply_affine(const PwlMonotone& f, const AffineMap2& psi);

// Pointwise sum; breakpoint set is the union of both.
PwlMonotone add(const PwlMonotone& f, const PwlMonotone& g);

// JSON round trip: {"mu_minus": ..., "mu_plus": ..., "vertices": [[x,y],...]}.
std::string to_json(const PwlMonotone& f);
PwlMonotone pwl_from_json(const std::string& text);

}  // namespace lipreg
