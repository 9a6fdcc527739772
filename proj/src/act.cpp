#include "lipreg/act.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace lipreg {

namespace {

constexpr std::uint32_t kNil = 0;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxDepth = 128;

double dir_slope(const AffineMap2& m, double mu) {
  const double dx = m.m11 + m.m12 * mu;
  const double dy = m.m21 + m.m22 * mu;
  if (!(dx > 0.0))
    throw std::invalid_argument("act: map does not preserve x-monotonicity of end ray");
  return dy / dx;
}

// Area between a monotone chain and the horizontal baseline through its first
// endpoint, after applying the linear part of m to the chain.  Scales by det,
// with a correction equal to the signed area of the quadrilateral spanned by
// the images of the chain's bounding box corners (the baseline itself maps to
// a slanted segment).
double transform_area(double area, double w, double h, const AffineMap2& m) {
  if (m.m11 == 1.0 && m.m12 == 0.0 && m.m22 == 1.0)
    return area + 0.5 * m.m21 * w * w;
  const double p1x = m.m11 * w + m.m12 * h, p1y = m.m21 * w + m.m22 * h;
  const double qx = m.m11 * w, qy = m.m21 * w;
  // shoelace over (p1) (p1x, 0) (0, 0) (q)
  const double sa = 0.5 * (-p1x * p1y + qx * p1y - p1x * qy);
  return m.det() * area - sa;
}

double trap(const Point2& p, const Point2& q, double base_y) {
  return 0.5 * (q.x - p.x) * ((p.y - base_y) + (q.y - base_y));
}

}  // namespace

Act::Act(double mu_minus, double mu_plus, ActStats* stats, bool with_integrals)
    : mu_minus_(mu_minus),
      mu_plus_(mu_plus),
      stats_(stats),
      augmented_(with_integrals) {}

std::uint32_t Act::alloc(Point2 local) {
  std::uint32_t n;
  if (!free_.empty()) {
    n = free_.back();
    free_.pop_back();
    nodes_[n] = Node{};
  } else {
    n = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{});
  }
  nodes_[n].phi = AffineMap2::translate(local.x, local.y);
  nodes_[n].size = 1;
  nodes_[n].red = 1;
  return n;
}

void Act::release(std::uint32_t n) { free_.push_back(n); }

void Act::combine(std::uint32_t n) {
  Node& z = nodes_[n];
  const std::uint32_t l = z.left, r = z.right;
  z.size = nodes_[l].size + nodes_[r].size + 1;
  if (!augmented_) return;
  Point2 a{0.0, 0.0}, b{0.0, 0.0}, c{0.0, 0.0}, d{0.0, 0.0};
  double il = 0.0, ir = 0.0;
  if (l != kNil) {
    const Node& ln = nodes_[l];
    a = ln.phi(ln.first);
    b = ln.phi(ln.last);
    il = transform_area(ln.area, ln.last.x - ln.first.x, ln.last.y - ln.first.y,
                        ln.phi);
  }
  if (r != kNil) {
    const Node& rn = nodes_[r];
    c = rn.phi(rn.first);
    d = rn.phi(rn.last);
    ir = transform_area(rn.area, rn.last.x - rn.first.x, rn.last.y - rn.first.y,
                        rn.phi);
  }
  const double base = (l != kNil) ? a.y : 0.0;
  const Point2 self{0.0, 0.0};
  double area = il + ir + (c.y - base) * (d.x - c.x);
  if (l != kNil) area += trap(b, self, base);
  if (r != kNil) area += trap(self, c, base);
  z.area = area;
  z.first = (l != kNil) ? a : self;
  z.last = (r != kNil) ? d : self;
}

// Rotations rewrite the two repositioned maps (and the rehung subtree's map)
// so that every vertex's root-path composition is unchanged.
void Act::rotate_left(std::uint32_t x) {
  const std::uint32_t y = nodes_[x].right;
  const AffineMap2 alpha = nodes_[x].phi, beta = nodes_[y].phi;
  nodes_[y].phi = compose(alpha, beta);
  nodes_[x].phi = beta.inverse();
  const std::uint32_t b = nodes_[y].left;
  if (b != kNil) {
    nodes_[b].phi = compose(beta, nodes_[b].phi);
    nodes_[b].parent = x;
  }
  nodes_[x].right = b;
  const std::uint32_t p = nodes_[x].parent;
  nodes_[y].parent = p;
  if (p == kNil)
    root_ = y;
  else if (nodes_[p].left == x)
    nodes_[p].left = y;
  else
    nodes_[p].right = y;
  nodes_[y].left = x;
  nodes_[x].parent = y;
  combine(x);
  combine(y);
  if (stats_) ++stats_->rotations;
}

void Act::rotate_right(std::uint32_t x) {
  const std::uint32_t y = nodes_[x].left;
  const AffineMap2 alpha = nodes_[x].phi, beta = nodes_[y].phi;
  nodes_[y].phi = compose(alpha, beta);
  nodes_[x].phi = beta.inverse();
  const std::uint32_t b = nodes_[y].right;
  if (b != kNil) {
    nodes_[b].phi = compose(beta, nodes_[b].phi);
    nodes_[b].parent = x;
  }
  nodes_[x].left = b;
  const std::uint32_t p = nodes_[x].parent;
  nodes_[y].parent = p;
  if (p == kNil)
    root_ = y;
  else if (nodes_[p].left == x)
    nodes_[p].left = y;
  else
    nodes_[p].right = y;
  nodes_[y].right = x;
  nodes_[x].parent = y;
  combine(x);
  combine(y);
  if (stats_) ++stats_->rotations;
}

std::size_t Act::insert(Point2 q) {
  std::uint32_t parent = kNil;
  bool go_left = false;
  AffineMap2 above;  // maps of root..parent inclusive
  std::uint32_t cur = root_;
  std::size_t rank = 0;
  std::optional<Point2> pred, succ;
  while (cur != kNil) {
    const AffineMap2 here = compose(above, nodes_[cur].phi);
    const Point2 pos = here({0.0, 0.0});
    parent = cur;
    above = here;
    if (q.x < pos.x) {
      succ = pos;
      go_left = true;
      cur = nodes_[cur].left;
    } else {
      pred = pos;
      rank += nodes_[nodes_[cur].left].size + 1;
      go_left = false;
      cur = nodes_[cur].right;
    }
  }
  if (pred) {
    const double tol = 1e-6 * (1.0 + std::fabs(q.y) + std::fabs(pred->y));
    if (q.y < pred->y - tol)
      throw std::invalid_argument(
          "act: insert would break monotonicity (below predecessor)");
  }
  if (succ) {
    const double tol = 1e-6 * (1.0 + std::fabs(q.y) + std::fabs(succ->y));
    if (q.y > succ->y + tol)
      throw std::invalid_argument(
          "act: insert would break monotonicity (above successor)");
  }
  const std::uint32_t z = alloc(above.inverse()(q));
  nodes_[z].parent = parent;
  if (parent == kNil)
    root_ = z;
  else if (go_left)
    nodes_[parent].left = z;
  else
    nodes_[parent].right = z;
  if (augmented_) {
    combine(z);
    for (std::uint32_t w = parent; w != kNil; w = nodes_[w].parent) combine(w);
  } else {
    for (std::uint32_t w = parent; w != kNil; w = nodes_[w].parent)
      ++nodes_[w].size;
  }
  insert_fixup(z);
  return rank;
}

void Act::insert_fixup(std::uint32_t z) {
  while (nodes_[nodes_[z].parent].red) {
    std::uint32_t p = nodes_[z].parent;
    const std::uint32_t g = nodes_[p].parent;
    if (p == nodes_[g].left) {
      const std::uint32_t u = nodes_[g].right;
      if (nodes_[u].red) {
        nodes_[p].red = 0;
        nodes_[u].red = 0;
        nodes_[g].red = 1;
        z = g;
      } else {
        if (z == nodes_[p].right) {
          z = p;
          rotate_left(z);
          p = nodes_[z].parent;
        }
        nodes_[p].red = 0;
        nodes_[g].red = 1;
        rotate_right(g);
      }
    } else {
      const std::uint32_t u = nodes_[g].left;
      if (nodes_[u].red) {
        nodes_[p].red = 0;
        nodes_[u].red = 0;
        nodes_[g].red = 1;
        z = g;
      } else {
        if (z == nodes_[p].left) {
          z = p;
          rotate_right(z);
          p = nodes_[z].parent;
        }
        nodes_[p].red = 0;
        nodes_[g].red = 1;
        rotate_left(g);
      }
    }
  }
  nodes_[root_].red = 0;
}

void Act::transplant(std::uint32_t u, std::uint32_t v) {
  const std::uint32_t p = nodes_[u].parent;
  if (p == kNil)
    root_ = v;
  else if (nodes_[p].left == u)
    nodes_[p].left = v;
  else
    nodes_[p].right = v;
  if (v != kNil) nodes_[v].parent = p;
}

void Act::erase_node(std::uint32_t z) {
  std::uint32_t fix_x, fix_parent;
  bool removed_black;
  if (nodes_[z].left == kNil || nodes_[z].right == kNil) {
    const std::uint32_t x =
        (nodes_[z].left != kNil) ? nodes_[z].left : nodes_[z].right;
    if (x != kNil) nodes_[x].phi = compose(nodes_[z].phi, nodes_[x].phi);
    fix_x = x;
    fix_parent = nodes_[z].parent;
    removed_black = !nodes_[z].red;
    transplant(z, x);
    release(z);
  } else {
    // Keep z's node in place but rewrite its vertex to its rank-successor's
    // position, then splice that successor out (it has no left child).
    std::uint32_t y = nodes_[z].right;
    while (nodes_[y].left != kNil) y = nodes_[y].left;
    const Point2 qy = global_pos(y);
    const std::uint32_t x = nodes_[y].right;
    if (x != kNil) nodes_[x].phi = compose(nodes_[y].phi, nodes_[x].phi);
    fix_x = x;
    fix_parent = nodes_[y].parent;
    removed_black = !nodes_[y].red;
    transplant(y, x);
    release(y);

    const AffineMap2 above =
        (nodes_[z].parent != kNil) ? path_map(nodes_[z].parent) : AffineMap2{};
    const AffineMap2 old_phi = nodes_[z].phi;
    const Point2 local = above.inverse()(qy);
    nodes_[z].phi = AffineMap2::translate(local.x, local.y);
    const AffineMap2 adjust = compose(nodes_[z].phi.inverse(), old_phi);
    if (nodes_[z].left != kNil)
      nodes_[nodes_[z].left].phi = compose(adjust, nodes_[nodes_[z].left].phi);
    if (nodes_[z].right != kNil)
      nodes_[nodes_[z].right].phi = compose(adjust, nodes_[nodes_[z].right].phi);
  }
  if (augmented_) {
    for (std::uint32_t w = fix_parent; w != kNil; w = nodes_[w].parent) combine(w);
  } else {
    for (std::uint32_t w = fix_parent; w != kNil; w = nodes_[w].parent)
      --nodes_[w].size;
  }
  if (removed_black) erase_fixup(fix_x, fix_parent);
}

void Act::erase_fixup(std::uint32_t x, std::uint32_t xp) {
  while (x != root_ && !nodes_[x].red) {
    if (x == nodes_[xp].left) {
      std::uint32_t w = nodes_[xp].right;
      if (nodes_[w].red) {
        nodes_[w].red = 0;
        nodes_[xp].red = 1;
        rotate_left(xp);
        w = nodes_[xp].right;
      }
      if (!nodes_[nodes_[w].left].red && !nodes_[nodes_[w].right].red) {
        nodes_[w].red = 1;
        x = xp;
        xp = nodes_[x].parent;
      } else {
        if (!nodes_[nodes_[w].right].red) {
          nodes_[nodes_[w].left].red = 0;
          nodes_[w].red = 1;
          rotate_right(w);
          w = nodes_[xp].right;
        }
        nodes_[w].red = nodes_[xp].red;
        nodes_[xp].red = 0;
        nodes_[nodes_[w].right].red = 0;
        rotate_left(xp);
        x = root_;
      }
    } else {
      std::uint32_t w = nodes_[xp].left;
      if (nodes_[w].red) {
        nodes_[w].red = 0;
        nodes_[xp].red = 1;
        rotate_right(xp);
        w = nodes_[xp].left;
      }
      if (!nodes_[nodes_[w].left].red && !nodes_[nodes_[w].right].red) {
        nodes_[w].red = 1;
        x = xp;
        xp = nodes_[x].parent;
      } else {
        if (!nodes_[nodes_[w].left].red) {
          nodes_[nodes_[w].right].red = 0;
          nodes_[w].red = 1;
          rotate_left(w);
          w = nodes_[xp].left;
        }
        nodes_[w].red = nodes_[xp].red;
        nodes_[xp].red = 0;
        nodes_[nodes_[w].left].red = 0;
        rotate_right(xp);
        x = root_;
      }
    }
  }
  if (x != kNil) nodes_[x].red = 0;
}

std::uint32_t Act::node_at_rank(std::size_t rank) const {
  if (rank >= size()) throw std::out_of_range("act: rank out of range");
  std::uint32_t cur = root_;
  while (true) {
    const std::size_t nl = nodes_[nodes_[cur].left].size;
    if (rank < nl) {
      cur = nodes_[cur].left;
    } else if (rank == nl) {
      return cur;
    } else {
      rank -= nl + 1;
      cur = nodes_[cur].right;
    }
  }
}

std::size_t Act::rank_of(std::uint32_t n) const {
  std::size_t rank = nodes_[nodes_[n].left].size;
  for (std::uint32_t w = n; nodes_[w].parent != kNil; w = nodes_[w].parent) {
    const std::uint32_t p = nodes_[w].parent;
    if (nodes_[p].right == w) rank += nodes_[nodes_[p].left].size + 1;
  }
  return rank;
}

AffineMap2 Act::path_map(std::uint32_t n) const {
  std::uint32_t chain[kMaxDepth];
  int depth = 0;
  for (std::uint32_t w = n; w != kNil; w = nodes_[w].parent) {
    if (depth >= kMaxDepth) throw std::logic_error("act: path depth overflow");
    chain[depth++] = w;
  }
  AffineMap2 m;
  for (int i = depth - 1; i >= 0; --i) m = compose(m, nodes_[chain[i]].phi);
  return m;
}

Point2 Act::global_pos(std::uint32_t n) const { return path_map(n)({0.0, 0.0}); }

Point2 Act::vertex_at(std::size_t rank) const {
  return global_pos(node_at_rank(rank));
}

void Act::erase_rank(std::size_t rank) {
  erase_node(node_at_rank(rank));
  if (root_ != kNil) nodes_[root_].red = 0;
}

std::size_t Act::insert_at_rank(std::size_t rank, Point2 q) {
  if (rank > size()) throw std::invalid_argument("act: insert rank out of range");
  std::uint32_t parent = kNil;
  bool go_left = false;
  AffineMap2 above;
  std::uint32_t cur = root_;
  std::size_t skip = rank;
  while (cur != kNil) {
    above = compose(above, nodes_[cur].phi);
    parent = cur;
    const std::size_t left_size = nodes_[nodes_[cur].left].size;
    if (skip <= left_size) {
      go_left = true;
      cur = nodes_[cur].left;
    } else {
      skip -= left_size + 1;
      go_left = false;
      cur = nodes_[cur].right;
    }
  }
  const std::uint32_t z = alloc(above.inverse()(q));
  nodes_[z].parent = parent;
  if (parent == kNil)
    root_ = z;
  else if (go_left)
    nodes_[parent].left = z;
  else
    nodes_[parent].right = z;
  if (augmented_) {
    combine(z);
    for (std::uint32_t w = parent; w != kNil; w = nodes_[w].parent) combine(w);
  } else {
    for (std::uint32_t w = parent; w != kNil; w = nodes_[w].parent)
      ++nodes_[w].size;
  }
  insert_fixup(z);
  return rank;
}

void Act::erase_x(double b) {
  const double tol = 1e-9 * (1.0 + std::fabs(b));
  AffineMap2 above;
  std::uint32_t cur = root_;
  std::size_t rank = 0;
  bool found = false;
  std::size_t found_rank = 0;
  while (cur != kNil) {
    const AffineMap2 here = compose(above, nodes_[cur].phi);
    const Point2 pos = here({0.0, 0.0});
    above = here;
    if (pos.x <= b + tol) {
      if (std::fabs(pos.x - b) <= tol) {
        found = true;
        found_rank = rank + nodes_[nodes_[cur].left].size;
      }
      rank += nodes_[nodes_[cur].left].size + 1;
      cur = nodes_[cur].right;
    } else {
      cur = nodes_[cur].left;
    }
  }
  if (!found) throw std::invalid_argument("act: no breakpoint at requested x");
  erase_rank(found_rank);
}

double Act::evaluate(double x) const {
  if (root_ == kNil) {
    if (mu_minus_ == 0.0 && mu_plus_ == 0.0) return 0.0;
    throw std::domain_error("act: evaluate on empty function with nonzero end slopes");
  }
  std::optional<Point2> pred, succ;
  AffineMap2 above;
  std::uint32_t cur = root_;
  while (cur != kNil) {
    const AffineMap2 here = compose(above, nodes_[cur].phi);
    const Point2 pos = here({0.0, 0.0});
    above = here;
    if (pos.x <= x) {
      pred = pos;
      cur = nodes_[cur].right;
    } else {
      succ = pos;
      cur = nodes_[cur].left;
    }
  }
  if (pred && pred->x == x) return pred->y;
  if (!pred) return succ->y + mu_minus_ * (x - succ->x);
  if (!succ) return pred->y + mu_plus_ * (x - pred->x);
  return pred->y + (succ->y - pred->y) * (x - pred->x) / (succ->x - pred->x);
}

double Act::evaluate_inverse(double y) const {
  if (root_ == kNil)
    throw std::domain_error("act: evaluate_inverse on empty function");
  std::optional<Point2> below, at_or_above;
  AffineMap2 above;
  std::uint32_t cur = root_;
  while (cur != kNil) {
    const AffineMap2 here = compose(above, nodes_[cur].phi);
    const Point2 pos = here({0.0, 0.0});
    above = here;
    if (pos.y < y) {
      below = pos;
      cur = nodes_[cur].right;
    } else {
      at_or_above = pos;
      cur = nodes_[cur].left;
    }
  }
  if (at_or_above && at_or_above->y == y) return at_or_above->x;
  if (!at_or_above) {
    if (mu_plus_ <= 0.0)
      throw std::domain_error("act: value above range of function");
    return below->x + (y - below->y) / mu_plus_;
  }
  if (!below) {
    if (mu_minus_ <= 0.0)
      throw std::domain_error("act: value below range of function");
    return at_or_above->x + (y - at_or_above->y) / mu_minus_;
  }
  return below->x + (y - below->y) * (at_or_above->x - below->x) /
                        (at_or_above->y - below->y);
}

std::optional<Point2> Act::pred_x(double b) const {
  std::optional<Point2> pred;
  AffineMap2 above;
  std::uint32_t cur = root_;
  while (cur != kNil) {
    const AffineMap2 here = compose(above, nodes_[cur].phi);
    const Point2 pos = here({0.0, 0.0});
    above = here;
    if (pos.x <= b) {
      pred = pos;
      cur = nodes_[cur].right;
    } else {
      cur = nodes_[cur].left;
    }
  }
  return pred;
}

std::optional<Point2> Act::succ_x(double b) const {
  std::optional<Point2> succ;
  AffineMap2 above;
  std::uint32_t cur = root_;
  while (cur != kNil) {
    const AffineMap2 here = compose(above, nodes_[cur].phi);
    const Point2 pos = here({0.0, 0.0});
    above = here;
    if (pos.x >= b) {
      succ = pos;
      cur = nodes_[cur].left;
    } else {
      cur = nodes_[cur].right;
    }
  }
  return succ;
}

std::optional<Point2> Act::pred_y(double b) const {
  std::optional<Point2> pred;
  AffineMap2 above;
  std::uint32_t cur = root_;
  while (cur != kNil) {
    const AffineMap2 here = compose(above, nodes_[cur].phi);
    const Point2 pos = here({0.0, 0.0});
    above = here;
    if (pos.y <= b) {
      pred = pos;
      cur = nodes_[cur].right;
    } else {
      cur = nodes_[cur].left;
    }
  }
  return pred;
}

std::optional<Point2> Act::succ_y(double b) const {
  std::optional<Point2> succ;
  AffineMap2 above;
  std::uint32_t cur = root_;
  while (cur != kNil) {
    const AffineMap2 here = compose(above, nodes_[cur].phi);
    const Point2 pos = here({0.0, 0.0});
    above = here;
    if (pos.y >= b) {
      succ = pos;
      cur = nodes_[cur].left;
    } else {
      cur = nodes_[cur].right;
    }
  }
  return succ;
}

void Act::energy_add(double a, double b, double c) {
  energy_.a += a;
  energy_.b += b;
  energy_.c += c;
}

void Act::energy_accumulate(double t_v, double lambda) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("act: energy_accumulate needs positive weight");
  energy_add(lambda, -2.0 * lambda * t_v, lambda * t_v * t_v);
}

void Act::affine(const AffineMap2& psi) {
  if (std::fabs(psi.det()) < 1e-12)
    throw std::invalid_argument("act: affine map is singular");
  const bool triple_nonzero =
      (energy_.a != 0.0 || energy_.b != 0.0 || energy_.c != 0.0);
  const bool x_nontrivial =
      (psi.m11 != 1.0 || psi.m12 != 0.0 || psi.cx != 0.0);
  if (triple_nonzero && x_nontrivial) {
    // Re-express the antiderivative triple under psi's action on the left
    // ray: x' = a x + b there, so E'(x') = E((x' - b) / a).
    double a, b;
    if (psi.m12 == 0.0) {
      a = psi.m11;
      b = psi.cx;
    } else if (root_ != kNil) {
      std::uint32_t w = root_;
      while (nodes_[w].left != kNil) w = nodes_[w].left;
      const Point2 q1 = global_pos(w);
      const double intercept = q1.y - mu_minus_ * q1.x;
      a = psi.m11 + psi.m12 * mu_minus_;
      b = psi.m12 * intercept + psi.cx;
    } else {
      a = psi.m11;
      b = psi.cx;
    }
    if (!(a > 0.0))
      throw std::invalid_argument("act: affine map reverses x on the left ray");
    const double c1 = energy_.a, c2 = energy_.b, c3 = energy_.c;
    energy_.a = c1 / (a * a);
    energy_.b = c2 / a - 2.0 * c1 * b / (a * a);
    energy_.c = c1 * b * b / (a * a) - c2 * b / a + c3;
  }
  mu_minus_ = dir_slope(psi, mu_minus_);
  mu_plus_ = dir_slope(psi, mu_plus_);
  if (root_ != kNil) nodes_[root_].phi = compose(psi, nodes_[root_].phi);
}

void Act::interval_ranks(std::size_t lo, std::size_t hi, const AffineMap2& psi) {
  if (root_ == kNil) return;
  const std::size_t n = size();
  if (hi >= n) hi = n - 1;
  if (lo > hi) return;
  if (std::fabs(psi.det()) < 1e-12)
    throw std::invalid_argument("act: interval map is singular");
  if (lo == 0) mu_minus_ = dir_slope(psi, mu_minus_);
  if (hi == n - 1) mu_plus_ = dir_slope(psi, mu_plus_);
  range_apply(root_, 0, AffineMap2{}, lo, hi, psi);
}

void Act::range_apply(std::uint32_t nd, std::size_t base, const AffineMap2& above,
                      std::size_t lo, std::size_t hi, const AffineMap2& psi) {
  const std::size_t span_hi = base + nodes_[nd].size - 1;
  if (lo <= base && hi >= span_hi) {
    const AffineMap2 conj = compose(compose(above.inverse(), psi), above);
    nodes_[nd].phi = compose(conj, nodes_[nd].phi);
    return;
  }
  const std::uint32_t l = nodes_[nd].left, r = nodes_[nd].right;
  const std::size_t my = base + nodes_[l].size;
  if (lo <= my && my <= hi) {
    // The node's own vertex is in range: transform the whole subtree, then
    // undo on the out-of-range flanks.
    const AffineMap2 conj = compose(compose(above.inverse(), psi), above);
    nodes_[nd].phi = compose(conj, nodes_[nd].phi);
    const AffineMap2 self = compose(above, nodes_[nd].phi);
    const AffineMap2 inv = psi.inverse();
    if (lo > base && l != kNil) range_apply(l, base, self, base, lo - 1, inv);
    if (hi < span_hi && r != kNil)
      range_apply(r, my + 1, self, hi + 1, span_hi, inv);
  } else if (hi < my) {
    range_apply(l, base, compose(above, nodes_[nd].phi), lo, hi, psi);
  } else {
    range_apply(r, my + 1, compose(above, nodes_[nd].phi), lo, hi, psi);
  }
  // Interval maps reorder nothing, so sizes are untouched; only the
  // augmentation needs a refresh along the descent.
  if (augmented_) combine(nd);
}

void Act::interval_x(const AffineMap2& psi, double lo, double hi) {
  if (root_ == kNil || lo > hi) return;
  std::size_t first = size(), last = 0;
  bool any_last = false;
  {
    AffineMap2 above;
    std::uint32_t cur = root_;
    std::size_t rank = 0;
    while (cur != kNil) {
      const AffineMap2 here = compose(above, nodes_[cur].phi);
      const Point2 pos = here({0.0, 0.0});
      above = here;
      if (pos.x >= lo) {
        first = rank + nodes_[nodes_[cur].left].size;
        cur = nodes_[cur].left;
      } else {
        rank += nodes_[nodes_[cur].left].size + 1;
        cur = nodes_[cur].right;
      }
    }
  }
  {
    AffineMap2 above;
    std::uint32_t cur = root_;
    std::size_t rank = 0;
    while (cur != kNil) {
      const AffineMap2 here = compose(above, nodes_[cur].phi);
      const Point2 pos = here({0.0, 0.0});
      above = here;
      if (pos.x <= hi) {
        last = rank + nodes_[nodes_[cur].left].size;
        any_last = true;
        rank += nodes_[nodes_[cur].left].size + 1;
        cur = nodes_[cur].right;
      } else {
        cur = nodes_[cur].left;
      }
    }
  }
  if (!any_last || first >= size() || first > last) return;
  interval_ranks(first, last, psi);
}

void Act::interval_y(const AffineMap2& psi, double lo, double hi) {
  if (root_ == kNil || lo > hi) return;
  std::size_t first = size(), last = 0;
  bool any_last = false;
  {
    AffineMap2 above;
    std::uint32_t cur = root_;
    std::size_t rank = 0;
    while (cur != kNil) {
      const AffineMap2 here = compose(above, nodes_[cur].phi);
      const Point2 pos = here({0.0, 0.0});
      above = here;
      if (pos.y >= lo) {
        first = rank + nodes_[nodes_[cur].left].size;
        cur = nodes_[cur].left;
      } else {
        rank += nodes_[nodes_[cur].left].size + 1;
        cur = nodes_[cur].right;
      }
    }
  }
  {
    AffineMap2 above;
    std::uint32_t cur = root_;
    std::size_t rank = 0;
    while (cur != kNil) {
      const AffineMap2 here = compose(above, nodes_[cur].phi);
      const Point2 pos = here({0.0, 0.0});
      above = here;
      if (pos.y <= hi) {
        last = rank + nodes_[nodes_[cur].left].size;
        any_last = true;
        rank += nodes_[nodes_[cur].left].size + 1;
        cur = nodes_[cur].right;
      } else {
        cur = nodes_[cur].left;
      }
    }
  }
  if (!any_last || first >= size() || first > last) return;
  interval_ranks(first, last, psi);
}

double Act::integrate(double a) const {
  if (!augmented_)
    throw std::logic_error("act: integrate without integral tracking");
  if (root_ == kNil) {
    if (mu_minus_ == 0.0 && mu_plus_ == 0.0)
      return energy_.a * a * a + energy_.b * a + energy_.c;
    throw std::domain_error(
        "act: integrate on empty function with nonzero end slopes");
  }
  Point2 q1;
  {
    AffineMap2 m;
    std::uint32_t w = root_;
    while (true) {
      m = compose(m, nodes_[w].phi);
      if (nodes_[w].left == kNil) break;
      w = nodes_[w].left;
    }
    q1 = m({0.0, 0.0});
  }
  const double e_b1 = energy_.a * q1.x * q1.x + energy_.b * q1.x + energy_.c;
  if (a <= q1.x) {
    const double fa = q1.y + mu_minus_ * (a - q1.x);
    return e_b1 + 0.5 * (a - q1.x) * (fa + q1.y);
  }
  // fold the in-order prefix of breakpoints with x <= a, left to right
  const double base = q1.y;
  double acc = 0.0;
  Point2 prev{0.0, 0.0};
  bool has_prev = false;
  AffineMap2 above;
  std::uint32_t cur = root_;
  while (cur != kNil) {
    const AffineMap2 here = compose(above, nodes_[cur].phi);
    const Point2 pos = here({0.0, 0.0});
    if (pos.x <= a) {
      const std::uint32_t l = nodes_[cur].left;
      if (l != kNil) {
        const Node& ln = nodes_[l];
        const AffineMap2 lm = compose(here, ln.phi);
        const Point2 cf = lm(ln.first), cl = lm(ln.last);
        const double ci = transform_area(
            ln.area, ln.last.x - ln.first.x, ln.last.y - ln.first.y, lm);
        if (has_prev) acc += trap(prev, cf, base);
        acc += ci + (cf.y - base) * (cl.x - cf.x);
        prev = cl;
        has_prev = true;
      }
      if (has_prev) acc += trap(prev, pos, base);
      prev = pos;
      has_prev = true;
      above = here;
      cur = nodes_[cur].right;
    } else {
      above = here;
      cur = nodes_[cur].left;
    }
  }
  const double fa = evaluate(a);
  acc += trap(prev, {a, fa}, base);
  return e_b1 + acc + base * (a - q1.x);
}

std::vector<std::size_t> Act::merge_add(const PwlMonotone& g,
                                        const EnergyCoeffs& ge) {
  energy_add(ge.a, ge.b, ge.c);
  if (g.vertices.empty()) {
    if (g.mu_minus != 0.0 || g.mu_plus != 0.0)
      throw std::invalid_argument("act: cannot merge an unanchored linear function");
    return {};
  }
  if (root_ == kNil) {
    if (mu_minus_ != 0.0 || mu_plus_ != 0.0)
      throw std::logic_error("act: merge into unanchored nonzero function");
    Act built = from_pwl(g, energy_, stats_, augmented_);
    nodes_ = std::move(built.nodes_);
    free_ = std::move(built.free_);
    root_ = built.root_;
    mu_minus_ = g.mu_minus;
    mu_plus_ = g.mu_plus;
    if (stats_) stats_->merged_breakpoints += g.vertices.size();
    std::vector<std::size_t> ranks(g.vertices.size());
    for (std::size_t i = 0; i < ranks.size(); ++i) ranks[i] = i;
    return ranks;
  }
  const double base_mu_minus = mu_minus_, base_mu_plus = mu_plus_;
  const std::size_t m = g.vertices.size();
  std::vector<std::size_t> ranks(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double fy = evaluate(g.vertices[i].x);
    ranks[i] = insert({g.vertices[i].x, fy});
  }
  // Degenerate inserts done; now shear each gap by g's segment there.  All
  // the maps fix x, so the ranks just computed stay valid throughout.
  const auto& v = g.vertices;
  const std::size_t n = size();
  {
    const double a0 = g.mu_minus, b0 = v[0].y - g.mu_minus * v[0].x;
    if (a0 != 0.0 || b0 != 0.0)
      interval_ranks(0, ranks[0], AffineMap2::vshear(a0, b0));
  }
  for (std::size_t i = 1; i < m; ++i) {
    // zero-width gaps (duplicate breakpoints in an uncollapsed g) hold only
    // the duplicate itself; a flat map through its value is the right shear
    const double alpha =
        v[i].x == v[i - 1].x
            ? 0.0
            : (v[i].y - v[i - 1].y) / (v[i].x - v[i - 1].x);
    const double beta = v[i].y - alpha * v[i].x;
    if ((alpha != 0.0 || beta != 0.0) && ranks[i - 1] + 1 <= ranks[i])
      interval_ranks(ranks[i - 1] + 1, ranks[i], AffineMap2::vshear(alpha, beta));
  }
  {
    const double am = g.mu_plus, bm = v[m - 1].y - g.mu_plus * v[m - 1].x;
    if (ranks[m - 1] + 1 <= n - 1 && (am != 0.0 || bm != 0.0))
      interval_ranks(ranks[m - 1] + 1, n - 1, AffineMap2::vshear(am, bm));
  }
  // A shear interval that reaches an end of the chain also transforms that
  // ray through the interval op, which is not what a sum of functions does;
  // the sum's rays are just the slope sums, so pin them directly.
  mu_minus_ = base_mu_minus + g.mu_minus;
  mu_plus_ = base_mu_plus + g.mu_plus;
  if (stats_) stats_->merged_breakpoints += m;
  return ranks;
}

void Act::unmerge_subtract(const PwlMonotone& g, const EnergyCoeffs& ge,
                           const std::vector<std::size_t>* rec_ranks) {
  energy_add(-ge.a, -ge.b, -ge.c);
  if (g.vertices.empty()) {
    if (g.mu_minus != 0.0 || g.mu_plus != 0.0)
      throw std::invalid_argument("act: cannot unmerge an unanchored linear function");
    return;
  }
  if (root_ == kNil) throw std::logic_error("act: unmerge from empty function");
  const std::size_t m = g.vertices.size();
  const std::size_t n = size();
  const auto& v = g.vertices;
  std::vector<std::size_t> located;
  if (rec_ranks) {
    if (rec_ranks->size() != m)
      throw std::logic_error("act: unmerge rank record has wrong length");
    for (std::size_t i = 0; i < m; ++i)
      if ((*rec_ranks)[i] >= n ||
          (i > 0 && (*rec_ranks)[i] <= (*rec_ranks)[i - 1]))
        throw std::logic_error("act: unmerge rank record out of order");
  } else {
    located.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double bx = v[i].x;
      const double tol = 1e-6 * (1.0 + std::fabs(bx));
      AffineMap2 above;
      std::uint32_t cur = root_;
      std::size_t rank = 0;
      bool found = false;
      std::size_t found_rank = 0;
      while (cur != kNil) {
        const AffineMap2 here = compose(above, nodes_[cur].phi);
        const Point2 pos = here({0.0, 0.0});
        above = here;
        if (pos.x <= bx + tol) {
          if (std::fabs(pos.x - bx) <= tol) {
            found = true;
            found_rank = rank + nodes_[nodes_[cur].left].size;
          }
          rank += nodes_[nodes_[cur].left].size + 1;
          cur = nodes_[cur].right;
        } else {
          cur = nodes_[cur].left;
        }
      }
      if (!found)
        throw std::logic_error("act: unmerge record mismatch (missing breakpoint)");
      located[i] = found_rank;
    }
  }
  const std::vector<std::size_t>& ranks = rec_ranks ? *rec_ranks : located;
  const double base_mu_minus = mu_minus_, base_mu_plus = mu_plus_;
  {
    const double am = g.mu_plus, bm = v[m - 1].y - g.mu_plus * v[m - 1].x;
    if (ranks[m - 1] + 1 <= n - 1 && (am != 0.0 || bm != 0.0))
      interval_ranks(ranks[m - 1] + 1, n - 1, AffineMap2::vshear(-am, -bm));
  }
  for (std::size_t i = m - 1; i >= 1; --i) {
    const double alpha =
        v[i].x == v[i - 1].x
            ? 0.0
            : (v[i].y - v[i - 1].y) / (v[i].x - v[i - 1].x);
    const double beta = v[i].y - alpha * v[i].x;
    if ((alpha != 0.0 || beta != 0.0) && ranks[i - 1] + 1 <= ranks[i])
      interval_ranks(ranks[i - 1] + 1, ranks[i],
                     AffineMap2::vshear(-alpha, -beta));
  }
  {
    const double a0 = g.mu_minus, b0 = v[0].y - g.mu_minus * v[0].x;
    if (a0 != 0.0 || b0 != 0.0)
      interval_ranks(0, ranks[0], AffineMap2::vshear(-a0, -b0));
  }
  for (std::size_t i = m; i-- > 0;) erase_rank(ranks[i]);
  mu_minus_ = base_mu_minus - g.mu_minus;
  mu_plus_ = base_mu_plus - g.mu_plus;
}

Act Act::from_pwl(const PwlMonotone& f, const EnergyCoeffs& e, ActStats* stats,
                  bool with_integrals) {
  Act out(f.mu_minus, f.mu_plus, stats, with_integrals);
  out.energy_ = e;
  const std::size_t n = f.vertices.size();
  if (n == 0) return out;
  out.nodes_.reserve(n + 1);
  // Midpoint splitting gives a minimal-height shape; coloring the deepest
  // level red and everything else black satisfies the red-black rules.
  int max_depth = 0;
  for (std::size_t span = n; span > 1; span >>= 1) ++max_depth;
  struct Frame {
    std::size_t lo, hi;
    std::uint32_t parent;
    bool left;
    int depth;
  };
  std::vector<Frame> stack;
  stack.push_back({0, n, kNil, false, 0});
  while (!stack.empty()) {
    const Frame fr = stack.back();
    stack.pop_back();
    if (fr.lo >= fr.hi) continue;
    const std::size_t mid = fr.lo + (fr.hi - fr.lo) / 2;
    const std::uint32_t idx = static_cast<std::uint32_t>(out.nodes_.size());
    out.nodes_.push_back(Node{});
    Node& nd = out.nodes_[idx];
    nd.size = 1;
    nd.red = (fr.depth == max_depth) ? 1 : 0;
    nd.parent = fr.parent;
    if (fr.parent == kNil)
      out.root_ = idx;
    else if (fr.left)
      out.nodes_[fr.parent].left = idx;
    else
      out.nodes_[fr.parent].right = idx;
    // global position for now; re-expressed relative to the parent below
    nd.phi = AffineMap2::translate(f.vertices[mid].x, f.vertices[mid].y);
    stack.push_back({fr.lo, mid, idx, true, fr.depth + 1});
    stack.push_back({mid + 1, fr.hi, idx, false, fr.depth + 1});
  }
  out.nodes_[out.root_].red = 0;
  // Children were created after their parents, so a reverse index sweep
  // converts maps child-first and then folds the augmentation post-order.
  for (std::size_t i = out.nodes_.size(); i-- > 1;) {
    const std::uint32_t p = out.nodes_[i].parent;
    if (p != kNil) {
      const Point2 gp = out.nodes_[i].phi({0.0, 0.0});
      const Point2 pp = out.nodes_[p].phi({0.0, 0.0});
      out.nodes_[i].phi = AffineMap2::translate(gp.x - pp.x, gp.y - pp.y);
    }
  }
  for (std::size_t i = out.nodes_.size(); i-- > 1;)
    out.combine(static_cast<std::uint32_t>(i));
  return out;
}

PwlMonotone Act::extract(bool collapse_duplicates) const {
  PwlMonotone out;
  out.mu_minus = mu_minus_;
  out.mu_plus = mu_plus_;
  out.vertices.reserve(size());
  struct Frame {
    std::uint32_t node;
    AffineMap2 above;
    bool expanded;
  };
  std::vector<Frame> stack;
  if (root_ != kNil) stack.push_back({root_, AffineMap2{}, false});
  while (!stack.empty()) {
    Frame fr = stack.back();
    stack.pop_back();
    const AffineMap2 here = compose(fr.above, nodes_[fr.node].phi);
    if (!fr.expanded) {
      if (nodes_[fr.node].right != kNil)
        stack.push_back({nodes_[fr.node].right, here, false});
      stack.push_back({fr.node, fr.above, true});
      if (nodes_[fr.node].left != kNil)
        stack.push_back({nodes_[fr.node].left, here, false});
      continue;
    }
    const Point2 pos = here({0.0, 0.0});
    if (collapse_duplicates && !out.vertices.empty()) {
      const Point2& back = out.vertices.back();
      const double tol = 1e-12 * (1.0 + std::fabs(pos.x));
      if (pos.x - back.x <= tol) continue;  // collapse transient duplicates
    }
    out.vertices.push_back(pos);
  }
  return out;
}

std::size_t Act::height() const {
  if (root_ == kNil) return 0;
  std::size_t h = 0;
  std::vector<std::pair<std::uint32_t, std::size_t>> stack{{root_, 1}};
  while (!stack.empty()) {
    const auto [n, d] = stack.back();
    stack.pop_back();
    h = std::max(h, d);
    if (nodes_[n].left != kNil) stack.push_back({nodes_[n].left, d + 1});
    if (nodes_[n].right != kNil) stack.push_back({nodes_[n].right, d + 1});
  }
  return h;
}

double Act::validate_rec(std::uint32_t n, const AffineMap2& above,
                         int* black_height, Point2* first, Point2* last,
                         const Point2** prev) const {
  // returns the recomputed area of n's subtree in n's local frame; *prev
  // carries the previous in-order vertex across the traversal
  static thread_local Point2 prev_slot;
  const Node& nd = nodes_[n];
  if (nd.left != kNil && nodes_[nd.left].parent != n)
    throw std::logic_error("act: broken parent pointer (left)");
  if (nd.right != kNil && nodes_[nd.right].parent != n)
    throw std::logic_error("act: broken parent pointer (right)");
  if (nd.red && (nodes_[nd.left].red || nodes_[nd.right].red))
    throw std::logic_error("act: red node with red child");
  if (nd.size != nodes_[nd.left].size + nodes_[nd.right].size + 1)
    throw std::logic_error("act: bad subtree size");
  const AffineMap2 here = compose(above, nd.phi);
  int bl = 0, br = 0;
  Point2 cf{0, 0}, cl{0, 0};
  double area_l = 0.0, area_r = 0.0;
  if (nd.left != kNil)
    area_l = validate_rec(nd.left, here, &bl, &cf, &cl, prev);
  const Point2 pos = here({0.0, 0.0});
  if (*prev) {
    const Point2& p = **prev;
    const double xtol = 1e-9 * (1.0 + std::fabs(pos.x));
    const double ytol = 1e-6 * (1.0 + std::fabs(pos.y) + std::fabs(p.y));
    if (pos.x < p.x - xtol)
      throw std::logic_error("act: breakpoints out of x order");
    if (pos.y < p.y - ytol)
      throw std::logic_error("act: breakpoint values decrease");
  }
  prev_slot = pos;
  *prev = &prev_slot;
  if (nd.right != kNil)
    area_r = validate_rec(nd.right, here, &br, &cf, &cl, prev);
  if (bl != br) throw std::logic_error("act: unequal black heights");
  *black_height = bl + (nd.red ? 0 : 1);
  if (!augmented_) return 0.0;

  Point2 a{0, 0}, b{0, 0}, c{0, 0}, d{0, 0};
  double il = 0.0, ir = 0.0;
  if (nd.left != kNil) {
    const Node& ln = nodes_[nd.left];
    a = ln.phi(ln.first);
    b = ln.phi(ln.last);
    il = transform_area(area_l, ln.last.x - ln.first.x, ln.last.y - ln.first.y,
                        ln.phi);
  }
  if (nd.right != kNil) {
    const Node& rn = nodes_[nd.right];
    c = rn.phi(rn.first);
    d = rn.phi(rn.last);
    ir = transform_area(area_r, rn.last.x - rn.first.x, rn.last.y - rn.first.y,
                        rn.phi);
  }
  const double base = (nd.left != kNil) ? a.y : 0.0;
  double area = il + ir + (c.y - base) * (d.x - c.x);
  if (nd.left != kNil) area += trap(b, {0.0, 0.0}, base);
  if (nd.right != kNil) area += trap({0.0, 0.0}, c, base);
  const Point2 want_first = (nd.left != kNil) ? a : Point2{0.0, 0.0};
  const Point2 want_last = (nd.right != kNil) ? d : Point2{0.0, 0.0};
  const double atol = 1e-6 * (1.0 + std::fabs(area));
  const double etol =
      1e-6 * (1.0 + std::fabs(want_first.x) + std::fabs(want_first.y) +
              std::fabs(want_last.x) + std::fabs(want_last.y));
  if (std::fabs(nd.area - area) > atol)
    throw std::logic_error("act: stale augmentation (area)");
  if (std::fabs(nd.first.x - want_first.x) > etol ||
      std::fabs(nd.first.y - want_first.y) > etol ||
      std::fabs(nd.last.x - want_last.x) > etol ||
      std::fabs(nd.last.y - want_last.y) > etol)
    throw std::logic_error("act: stale augmentation (endpoints)");
  *first = want_first;
  *last = want_last;
  return area;
}

void Act::validate() const {
  if (root_ == kNil) return;
  if (nodes_[root_].red) throw std::logic_error("act: red root");
  if (nodes_[root_].parent != kNil)
    throw std::logic_error("act: root has parent");
  int bh = 0;
  Point2 f{0, 0}, l{0, 0};
  const Point2* prev = nullptr;
  validate_rec(root_, AffineMap2{}, &bh, &f, &l, &prev);
  const double n = static_cast<double>(size());
  if (static_cast<double>(height()) > 2.0 * std::log2(n + 1.0) + 2.0)
    throw std::logic_error("act: height exceeds red-black bound");
}

SurgeryRecord plateau_surgery(Act& f, double s_star, double y_at, double gamma,
                              double delta) {
  SurgeryRecord rec;
  rec.s_star = s_star;
  rec.y_at = y_at;
  rec.gamma = gamma;
  rec.delta = delta;
  if (gamma == kInf) {
    rec.infinite = true;
    rec.rank_a = f.insert({s_star, y_at});
    rec.old_mu_plus = f.mu_plus();
    while (f.size() > rec.rank_a + 1) {
      rec.truncated.push_back(f.vertex_at(rec.rank_a + 1));
      f.erase_rank(rec.rank_a + 1);
    }
    f.set_mu_plus(0.0);
    if (delta != 0.0) f.affine(AffineMap2::translate(delta, 0.0));
  } else if (gamma == delta) {
    // pure shift; inserting a marker here would risk colliding with a
    // breakpoint of an earlier record when the minimizer lands on one
    if (delta != 0.0) f.affine(AffineMap2::translate(delta, 0.0));
  } else {
    rec.pair = true;
    rec.rank_a = f.insert({s_star, y_at});
    f.interval_ranks(rec.rank_a, f.size() - 1,
                     AffineMap2::translate(gamma - delta, 0.0));
    if (delta != 0.0) f.affine(AffineMap2::translate(delta, 0.0));
    f.insert_at_rank(rec.rank_a, {s_star + delta, y_at});
  }
  return rec;
}

namespace {

void expect_x(const Act& f, std::size_t rank, double want) {
  const double got = f.vertex_at(rank).x;
  if (std::fabs(got - want) > 1e-6 * (1.0 + std::fabs(want)))
    throw std::logic_error("act: surgery record mismatch at x=" +
                           std::to_string(want));
}

}  // namespace

void undo_plateau_surgery_by_x(Act& f, const SurgeryRecord& rec) {
  if (rec.infinite) {
    if (rec.delta != 0.0) f.affine(AffineMap2::translate(-rec.delta, 0.0));
    f.set_mu_plus(rec.old_mu_plus);
    for (const Point2& p : rec.truncated) f.insert(p);
    f.erase_x(rec.s_star);
  } else if (!rec.pair) {
    if (rec.delta != 0.0) f.affine(AffineMap2::translate(-rec.delta, 0.0));
  } else {
    f.erase_x(rec.s_star + rec.delta);
    if (rec.delta != 0.0) f.affine(AffineMap2::translate(-rec.delta, 0.0));
    const double a_now = rec.s_star + rec.gamma - rec.delta;
    const double pad = 1e-9 * (1.0 + std::fabs(a_now));
    f.interval_x(AffineMap2::translate(rec.delta - rec.gamma, 0.0), a_now - pad,
                 kInf);
    f.erase_x(rec.s_star);
  }
}

void undo_plateau_surgery(Act& f, const SurgeryRecord& rec) {
  if (rec.infinite) {
    if (rec.delta != 0.0) f.affine(AffineMap2::translate(-rec.delta, 0.0));
    f.set_mu_plus(rec.old_mu_plus);
    for (const Point2& p : rec.truncated) f.insert(p);
    expect_x(f, rec.rank_a, rec.s_star);
    f.erase_rank(rec.rank_a);
  } else if (!rec.pair) {
    if (rec.delta != 0.0) f.affine(AffineMap2::translate(-rec.delta, 0.0));
  } else {
    expect_x(f, rec.rank_a, rec.s_star + rec.delta);
    f.erase_rank(rec.rank_a);
    if (rec.delta != 0.0) f.affine(AffineMap2::translate(-rec.delta, 0.0));
    f.interval_ranks(rec.rank_a, f.size() - 1,
                     AffineMap2::translate(rec.delta - rec.gamma, 0.0));
    expect_x(f, rec.rank_a, rec.s_star);
    f.erase_rank(rec.rank_a);
  }
}

}  // namespace lipreg
