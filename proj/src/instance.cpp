#include "lipreg/instance.hpp"

#include <cmath>
#include <stdexcept>

namespace lipreg {

PathInstance PathInstance::uniform(std::vector<double> targets, double gamma,
                                   double delta) {
  PathInstance p;
  const std::size_t n = targets.size();
  p.t = std::move(targets);
  p.lambda.assign(n, 1.0);
  if (n > 0) {
    p.gamma.assign(n - 1, gamma);
    p.delta.assign(n - 1, delta);
  }
  return p;
}

void PathInstance::check() const {
  const std::size_t m = t.size();
  if (m == 0) throw std::invalid_argument("path instance: empty");
  if (lambda.size() != m)
    throw std::invalid_argument("path instance: weight count mismatch");
  if (gamma.size() + 1 != m || delta.size() + 1 != m)
    throw std::invalid_argument("path instance: edge bound count mismatch");
  for (double w : lambda)
    if (!(w > 0.0) || !std::isfinite(w))
      throw std::invalid_argument("path instance: weights must be positive");
  for (double x : t)
    if (!std::isfinite(x))
      throw std::invalid_argument("path instance: targets must be finite");
  for (std::size_t i = 0; i + 1 < m; ++i) {
    if (std::isnan(gamma[i]) || !std::isfinite(delta[i]))
      throw std::invalid_argument("path instance: bad edge bounds");
    if (delta[i] > gamma[i])
      throw std::invalid_argument("path instance: delta exceeds gamma");
  }
}

void TreeInstance::check() const {
  const std::size_t m = t.size();
  if (m == 0) throw std::invalid_argument("tree instance: empty");
  if (parent.size() != m || lambda.size() != m || gamma.size() != m ||
      delta.size() != m)
    throw std::invalid_argument("tree instance: array size mismatch");
  int roots = 0;
  for (std::size_t v = 0; v < m; ++v) {
    if (parent[v] == -1) {
      ++roots;
      continue;
    }
    if (parent[v] < 0 || static_cast<std::size_t>(parent[v]) >= m ||
        parent[v] == static_cast<int>(v))
      throw std::invalid_argument("tree instance: bad parent index");
  }
  if (roots != 1)
    throw std::invalid_argument("tree instance: exactly one root required");
  // acyclicity: walk each vertex to the root, bounded by n steps
  for (std::size_t v = 0; v < m; ++v) {
    int w = static_cast<int>(v);
    std::size_t steps = 0;
    while (w != -1) {
      w = parent[w];
      if (++steps > m)
        throw std::invalid_argument("tree instance: parent array has a cycle");
    }
  }
  for (double w : lambda)
    if (!(w > 0.0) || !std::isfinite(w))
      throw std::invalid_argument("tree instance: weights must be positive");
  for (double x : t)
    if (!std::isfinite(x))
      throw std::invalid_argument("tree instance: targets must be finite");
  for (std::size_t v = 0; v < m; ++v) {
    if (parent[v] == -1) continue;
    if (std::isnan(gamma[v]) || !std::isfinite(delta[v]))
      throw std::invalid_argument("tree instance: bad edge bounds");
    if (delta[v] > gamma[v])
      throw std::invalid_argument("tree instance: delta exceeds gamma");
  }
}

int TreeInstance::root() const {
  for (std::size_t v = 0; v < parent.size(); ++v)
    if (parent[v] == -1) return static_cast<int>(v);
  throw std::logic_error("tree instance: no root");
}

}  // namespace lipreg
