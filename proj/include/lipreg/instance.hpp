#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace lipreg {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Path problem over vertices 0..n-1.  Edge i sits between vertices i and
// i+1; the fitted values must satisfy delta[i] <= s[i+1] - s[i] <= gamma[i].
struct PathInstance {
  std::vector<double> t;
  std::vector<double> lambda;
  std::vector<double> gamma;  // n-1 entries; +infinity allowed
  std::vector<double> delta;  // n-1 entries; finite, delta[i] <= gamma[i]

  static PathInstance uniform(std::vector<double> targets, double gamma,
                              double delta = 0.0);
  void check() const;  // throws std::invalid_argument on malformed input
  std::size_t n() const { return t.size(); }
};

// Tree problem over vertices 0..n-1.  parent[v] = -1 marks the root when
// rooted; otherwise parent[] encodes any fixed orientation of the tree and
// solvers choose their own root.  Edge constraints are keyed by the child
// endpoint: for v with parent u, delta[v] <= s[u] - s[v] <= gamma[v] when
// rooted (constraints point from each vertex toward the root).
struct TreeInstance {
  std::vector<int> parent;
  std::vector<double> t;
  std::vector<double> lambda;
  std::vector<double> gamma;
  std::vector<double> delta;
  bool rooted = true;

  void check() const;
  std::size_t n() const { return t.size(); }
  int root() const;  // rooted instances: the unique parent[v] == -1
};

struct SolveStats {
  std::uint64_t rotations = 0;
  std::uint64_t merged_breakpoints = 0;
  std::uint64_t updates = 0;
  std::uint64_t max_rotations_per_update = 0;
  std::size_t max_set_members = 0;
};

struct RegressionResult {
  std::vector<double> s;
  double energy = 0.0;
  int root = -1;  // chosen apex for the unimodal solvers
  SolveStats stats;
};

}  // namespace lipreg
