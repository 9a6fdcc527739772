#pragma once

// Balanced-tree representation of a piecewise-linear monotone function whose
// vertex coordinates are stored implicitly: each node holds an affine map, and
// a node's vertex is the composition of the maps along its root path applied
// to the origin.  This makes three whole-function operations cheap:
//
//   affine(psi)            O(1)       compose psi at the root
//   interval_*(psi, lo,hi) O(log n)   compose conjugated maps onto the
//                                     maximal subtrees covering the range
//   insert/erase/queries   O(log n)   red-black balanced descents
//
// The tree is a red-black tree ordered by vertex x (equal-x duplicates are
// permitted transiently and ordered by insertion).  Rotations rewrite the
// three affected maps so every vertex keeps its position exactly.
//
// Each node additionally stores, in its local frame (descendant maps applied,
// its own map not), the subtree chain's first and last endpoints and the area
// between the chain and the horizontal baseline through the first endpoint.
// integrate() folds these up a root path to evaluate the antiderivative.
//
// energy_c = (a, b, c) pins the antiderivative's constant: on the ray left of
// the first breakpoint, E(x) = a x^2 + b x + c.  affine() re-expresses the
// triple under the map's x-action along that ray; the quadratic added by an
// update's vertical shear enters separately through energy_accumulate(), and
// interval ops never touch the triple (merge adds the small side's triple
// explicitly).

#include <cstdint>
#include <optional>
#include <vector>

#include "lipreg/pwl.hpp"

namespace lipreg {

// E(x) = a x^2 + b x + c on the ray left of the first breakpoint.
struct EnergyCoeffs {
  double a = 0.0, b = 0.0, c = 0.0;
};

struct ActStats {
  std::uint64_t rotations = 0;
  std::uint64_t merged_breakpoints = 0;
};

class Act {
 public:
  Act() = default;
  // with_integrals = false skips the endpoint/area augmentation on every
  // structural change; integrate() then throws.  The rooted solvers never
  // integrate, and the augmentation is most of their combine cost.
  Act(double mu_minus, double mu_plus, ActStats* stats = nullptr,
      bool with_integrals = true);

  // Balanced O(n) construction; f's vertices become the tree in order.
  static Act from_pwl(const PwlMonotone& f, const EnergyCoeffs& e = {},
                      ActStats* stats = nullptr, bool with_integrals = true);

  std::size_t size() const { return nodes_[root_].size; }
  bool empty() const { return root_ == 0; }
  // Grows the node pool up front; one pool slot per expected vertex.
  void reserve(std::size_t vertices) { nodes_.reserve(vertices + 1); }

  double mu_minus() const { return mu_minus_; }
  double mu_plus() const { return mu_plus_; }
  void set_mu_minus(double m) { mu_minus_ = m; }
  void set_mu_plus(double m) { mu_plus_ = m; }

  const EnergyCoeffs& energy() const { return energy_; }
  void energy_add(double a, double b, double c);
  // Adds lambda (x - t_v)^2; lambda must be positive.
  void energy_accumulate(double t_v, double lambda);

  void set_stats(ActStats* s) { stats_ = s; }
  ActStats* stats() const { return stats_; }

  double evaluate(double x) const;
  // Leftmost preimage; plateaus resolve to their left endpoint.
  double evaluate_inverse(double y) const;

  std::optional<Point2> pred_x(double b) const;
  std::optional<Point2> succ_x(double b) const;
  std::optional<Point2> pred_y(double b) const;
  std::optional<Point2> succ_y(double b) const;

  Point2 vertex_at(std::size_t rank) const;

  // Returns the new vertex's rank.  q must sit on the current chain within a
  // small monotonicity slack; violating inserts throw.
  std::size_t insert(Point2 q);
  // Places q at a caller-chosen rank.  Coordinate descents can put a point on
  // either side of a breakpoint less than a rounding step away; callers that
  // know the rank exactly use this instead.
  std::size_t insert_at_rank(std::size_t rank, Point2 q);
  void erase_rank(std::size_t rank);
  // Erases the vertex with x within 1e-9 of b; throws when absent.
  void erase_x(double b);

  // Whole-graph image under psi (nonsingular; image must stay xy-monotone).
  void affine(const AffineMap2& psi);
  // Applies psi to exactly the vertices in the closed range; end slopes
  // transform when the range touches the corresponding end.  Shape of the
  // tree is unchanged.
  void interval_ranks(std::size_t lo, std::size_t hi, const AffineMap2& psi);
  void interval_x(const AffineMap2& psi, double lo, double hi);
  void interval_y(const AffineMap2& psi, double lo, double hi);

  // E(first breakpoint) + integral of the function up to a.
  double integrate(double a) const;

  // f += g (resp. f -= g) by degenerate-breakpoint insertion plus per-gap
  // interval shears; ge is g's antiderivative triple.  merge_add returns the
  // rank each vertex of g landed at.  unmerge_subtract locates the vertices
  // by coordinate unless the caller passes those ranks back in; the rank form
  // stays correct even when breakpoints sit closer than the search tolerance.
  std::vector<std::size_t> merge_add(const PwlMonotone& g,
                                     const EnergyCoeffs& ge = {});
  void unmerge_subtract(const PwlMonotone& g, const EnergyCoeffs& ge = {},
                        const std::vector<std::size_t>* ranks = nullptr);

  // Collapsing drops the transient equal-x duplicates that inserts at an
  // existing breakpoint leave behind.  Pass false when the chain will seed a
  // rebuilt structure that must replay rank-addressed records.
  PwlMonotone extract(bool collapse_duplicates = true) const;

  std::size_t height() const;
  // Full structural audit: pointers, sizes, red-black properties, the height
  // bound 2 log2(n+1) + O(1), chain monotonicity, and augmentation
  // consistency against bottom-up recomputation.  Throws on violation.
  void validate() const;

 private:
  struct Node {
    AffineMap2 phi;
    Point2 first, last;  // subtree chain endpoints, local frame
    double area = 0.0;   // integral of (chain - first.y) over the chain span
    std::uint32_t left = 0, right = 0, parent = 0;
    std::uint32_t size = 0;
    std::uint8_t red = 0;
  };

  std::uint32_t alloc(Point2 local);
  void release(std::uint32_t n);
  void combine(std::uint32_t n);
  void rotate_left(std::uint32_t x);
  void rotate_right(std::uint32_t x);
  void insert_fixup(std::uint32_t z);
  void erase_fixup(std::uint32_t x, std::uint32_t x_parent);
  void transplant(std::uint32_t u, std::uint32_t v);
  void erase_node(std::uint32_t z);
  std::uint32_t node_at_rank(std::size_t rank) const;
  std::size_t rank_of(std::uint32_t n) const;
  Point2 global_pos(std::uint32_t n) const;
  AffineMap2 path_map(std::uint32_t n) const;  // maps root..n inclusive
  void range_apply(std::uint32_t nd, std::size_t base, const AffineMap2& above,
                   std::size_t lo, std::size_t hi, const AffineMap2& psi);
  double validate_rec(std::uint32_t n, const AffineMap2& above, int* black_height,
                      Point2* first, Point2* last, const Point2** prev) const;

  std::vector<Node> nodes_{Node{}};  // index 0 is the nil sentinel
  std::vector<std::uint32_t> free_;
  std::uint32_t root_ = 0;
  double mu_minus_ = 0.0, mu_plus_ = 0.0;
  EnergyCoeffs energy_;
  ActStats* stats_ = nullptr;
  bool augmented_ = true;

  friend double sum_evaluate_inverse(const std::vector<const Act*>& fs, double y);
};

// Frontier surgery shared by the single-structure and tree-set update paths:
// splits f at s_star (function value y_at there), shifts the left part by
// delta and the right part by gamma, and bridges with a flat plateau.  With
// gamma = +inf the right part is removed and saved in the record instead.
struct SurgeryRecord {
  double s_star = 0.0, y_at = 0.0;
  double gamma = 0.0, delta = 0.0;
  bool infinite = false;
  bool pair = false;  // two plateau vertices were inserted (finite, gamma > delta)
  std::size_t rank_a = 0;
  std::vector<Point2> truncated;  // gamma = +inf: removed suffix, pre-delta frame
  double old_mu_plus = 0.0;
};

SurgeryRecord plateau_surgery(Act& f, double s_star, double y_at, double gamma,
                              double delta);
void undo_plateau_surgery(Act& f, const SurgeryRecord& rec);
// Rank-free variant that locates the inserted vertices by coordinate; for
// structures rebuilt from a collapsed extract, where dropped duplicate
// breakpoints shift the ranks recorded earlier.
void undo_plateau_surgery_by_x(Act& f, const SurgeryRecord& rec);

}  // namespace lipreg
