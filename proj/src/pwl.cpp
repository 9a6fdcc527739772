#include "lipreg/pwl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace lipreg {

void PwlMonotone::validate() const {
  if (mu_minus < 0.0 || mu_plus < 0.0)
    throw std::invalid_argument("PwlMonotone: negative end slope");
  for (std::size_t i = 1; i < vertices.size(); ++i) {
    if (!(vertices[i].x > vertices[i - 1].x))
      throw std::invalid_argument("PwlMonotone: vertex x not strictly increasing");
    if (vertices[i].y < vertices[i - 1].y)
      throw std::invalid_argument("PwlMonotone: vertex y decreasing");
  }
}

double PwlMonotone::eval(double x) const {
  if (vertices.empty()) {
    if (mu_minus == 0.0 && mu_plus == 0.0) return 0.0;
    throw std::logic_error("PwlMonotone: eval on empty unanchored function");
  }
  if (x <= vertices.front().x)
    return vertices.front().y + mu_minus * (x - vertices.front().x);
  if (x >= vertices.back().x)
    return vertices.back().y + mu_plus * (x - vertices.back().x);
  auto it = std::lower_bound(vertices.begin(), vertices.end(), x,
                             [](const Point2& p, double v) { return p.x < v; });
  // it->x >= x and it is not begin().
  if (it->x == x) return it->y;
  const Point2& b = *it;
  const Point2& a = *(it - 1);
  return a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x);
}

double PwlMonotone::eval_inverse(double y) const {
  if (vertices.empty()) throw std::logic_error("PwlMonotone: eval_inverse on empty function");
  // succ = leftmost vertex with value >= y.
  auto succ = std::lower_bound(vertices.begin(), vertices.end(), y,
                               [](const Point2& p, double v) { return p.y < v; });
  if (succ != vertices.end() && succ->y == y) return succ->x;  // plateau -> left endpoint
  if (succ == vertices.begin()) {
    if (mu_minus == 0.0) throw std::domain_error("PwlMonotone: no preimage below range");
    return vertices.front().x + (y - vertices.front().y) / mu_minus;
  }
  if (succ == vertices.end()) {
    if (mu_plus == 0.0) throw std::domain_error("PwlMonotone: no preimage above range");
    return vertices.back().x + (y - vertices.back().y) / mu_plus;
  }
  const Point2& a = *(succ - 1);
  const Point2& b = *succ;
  return a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
}

double PwlMonotone::integrate_prefix(double a, double e_base) const {
  if (vertices.empty()) throw std::logic_error("PwlMonotone: integrate_prefix on empty function");
  const double b1 = vertices.front().x;
  if (a <= b1) {
    const double fa = eval(a);
    return e_base + 0.5 * (a - b1) * (fa + vertices.front().y);
  }
  double acc = 0.0;
  Point2 prev = vertices.front();
  for (std::size_t i = 1; i < vertices.size() && vertices[i].x <= a; ++i) {
    acc += 0.5 * (vertices[i].x - prev.x) * (vertices[i].y + prev.y);
    prev = vertices[i];
  }
  if (a > prev.x) acc += 0.5 * (a - prev.x) * (eval(a) + prev.y);
  return e_base + acc;
}

PwlMonotone apply_affine(const PwlMonotone& f, const AffineMap2& psi) {
  if (std::fabs(psi.det()) < 1e-12) throw std::invalid_argument("apply_affine: singular map");
  PwlMonotone r;
  r.vertices.reserve(f.vertices.size());
  for (const Point2& p : f.vertices) r.vertices.push_back(psi(p));
  auto dir_slope = [&psi](double mu) {
    const double dx = psi.m11 + psi.m12 * mu;
    const double dy = psi.m21 + psi.m22 * mu;
    if (dx <= 0.0) throw std::invalid_argument("apply_affine: image ray not x-increasing");
    return dy / dx;
  };
  r.mu_minus = f.empty() ? f.mu_minus : dir_slope(f.mu_minus);
  r.mu_plus = f.empty() ? f.mu_plus : dir_slope(f.mu_plus);
  r.validate();
  return r;
}

PwlMonotone add(const PwlMonotone& f, const PwlMonotone& g) {
  if (f.empty()) return g;
  if (g.empty()) return f;
  PwlMonotone r;
  r.mu_minus = f.mu_minus + g.mu_minus;
  r.mu_plus = f.mu_plus + g.mu_plus;
  std::vector<double> xs;
  xs.reserve(f.size() + g.size());
  std::size_t i = 0, j = 0;
  while (i < f.size() || j < g.size()) {
    double x;
    if (j == g.size() || (i < f.size() && f.vertices[i].x <= g.vertices[j].x)) {
      x = f.vertices[i++].x;
      if (j < g.size() && g.vertices[j].x == x) ++j;
    } else {
      x = g.vertices[j++].x;
    }
    xs.push_back(x);
  }
  r.vertices.reserve(xs.size());
  for (double x : xs) r.vertices.push_back({x, f.eval(x) + g.eval(x)});
  return r;
}

std::string to_json(const PwlMonotone& f) {
  nlohmann::json j;
  j["mu_minus"] = f.mu_minus;
  j["mu_plus"] = f.mu_plus;
  auto& arr = j["vertices"] = nlohmann::json::array();
  for (const Point2& p : f.vertices) arr.push_back({p.x, p.y});
  return j.dump();
}

PwlMonotone pwl_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  PwlMonotone f;
  f.mu_minus = j.at("mu_minus").get<double>();
  f.mu_plus = j.at("mu_plus").get<double>();
  for (const auto& v : j.at("vertices")) f.vertices.push_back({v.at(0), v.at(1)});
  f.validate();
  return f;
}

}  // namespace lipreg
