#pragma once

// Reference solvers used by the test suite.  Everything here favors clarity
// over speed and shares no machinery with the production path: energies are
// explicit piecewise quadratics, minimized and window-transformed directly.

#include <cstddef>
#include <utility>
#include <vector>

#include "lipreg/instance.hpp"
#include "lipreg/pwl.hpp"

namespace lipreg::oracle {

struct QuadPiece {
  double lo, hi;      // piece domain [lo, hi]
  double a, b, c;     // a x^2 + b x + c
};

// Convex piecewise quadratic on the whole line, pieces contiguous and sorted.
class PiecewiseQuad {
 public:
  static PiecewiseQuad quadratic(double lambda, double t);

  double eval(double x) const;
  void add_quadratic(double lambda, double t);
  // leftmost global minimizer and the minimum value
  std::pair<double, double> minimize() const;

  const std::vector<QuadPiece>& pieces() const { return pieces_; }
  static PiecewiseQuad from_pieces(std::vector<QuadPiece> pieces);

 private:
  std::vector<QuadPiece> pieces_;
};

// Emin(x) = min over y in [x - gamma, x - delta] of e(y).
PiecewiseQuad min_window(const PiecewiseQuad& e, double gamma, double delta);
PiecewiseQuad sum(const PiecewiseQuad& a, const PiecewiseQuad& b);

RegressionResult dp_lir_path(const PathInstance& inst);
RegressionResult dp_lir_tree(const TreeInstance& inst);  // rooted

// Try every apex, solve the rooted problem, keep the best (smallest id wins
// ties).  The instance's parent array is read as an arbitrary orientation.
RegressionResult brute_lur_tree(const TreeInstance& inst);
RegressionResult brute_lur_path(const PathInstance& inst);

// Path instance viewed as a tree with vertex 0 as the stored root.
TreeInstance path_as_tree(const PathInstance& inst);
// Re-orient all edges toward new_root, keeping each undirected edge's bounds.
TreeInstance reroot(const TreeInstance& inst, int new_root);

// Weighted nondecreasing least-squares fit (pool adjacent violators).
std::vector<double> pava_isotonic(const std::vector<double>& t,
                                  const std::vector<double>& w);

double weighted_sse(const std::vector<double>& t,
                    const std::vector<double>& lambda,
                    const std::vector<double>& s);

bool feasible_path(const PathInstance& inst, const std::vector<double>& s,
                   double tol = 1e-9);
bool feasible_tree(const TreeInstance& inst, const std::vector<double>& s,
                   double tol = 1e-9);
bool feasible_unimodal_tree(const TreeInstance& inst,
                            const std::vector<double>& s, int apex,
                            double tol = 1e-9);

// Plain-vector mutation mirroring Act::interval_ranks for model-based tests.
void model_interval_ranks(PwlMonotone& f, std::size_t lo, std::size_t hi,
                          const AffineMap2& psi);

}  // namespace lipreg::oracle
