#include "lipreg/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace lipreg::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

QuadPiece shifted(const QuadPiece& p, double d) {
  // q(x) = p(x - d)
  return {p.lo + d, p.hi + d, p.a, p.b - 2.0 * p.a * d,
          p.a * d * d - p.b * d + p.c};
}

void push_compact(std::vector<QuadPiece>& out, QuadPiece p) {
  if (!(p.hi > p.lo)) return;
  if (!out.empty()) {
    QuadPiece& back = out.back();
    if (back.a == p.a && back.b == p.b && back.c == p.c) {
      back.hi = p.hi;
      return;
    }
    p.lo = back.hi;
  }
  out.push_back(p);
}

}  // namespace

PiecewiseQuad PiecewiseQuad::quadratic(double lambda, double t) {
  PiecewiseQuad e;
  e.pieces_.push_back(
      {-kInf, kInf, lambda, -2.0 * lambda * t, lambda * t * t});
  return e;
}

PiecewiseQuad PiecewiseQuad::from_pieces(std::vector<QuadPiece> pieces) {
  PiecewiseQuad e;
  e.pieces_ = std::move(pieces);
  return e;
}

double PiecewiseQuad::eval(double x) const {
  auto it = std::lower_bound(
      pieces_.begin(), pieces_.end(), x,
      [](const QuadPiece& p, double v) { return p.hi < v; });
  if (it == pieces_.end()) --it;
  return it->a * x * x + it->b * x + it->c;
}

void PiecewiseQuad::add_quadratic(double lambda, double t) {
  for (QuadPiece& p : pieces_) {
    p.a += lambda;
    p.b += -2.0 * lambda * t;
    p.c += lambda * t * t;
  }
}

std::pair<double, double> PiecewiseQuad::minimize() const {
  double best_x = 0.0, best_v = kInf;
  bool have = false;
  for (const QuadPiece& p : pieces_) {
    double x;
    if (p.a > 0.0) {
      x = std::min(std::max(-p.b / (2.0 * p.a), p.lo), p.hi);
    } else if (p.b > 0.0) {
      x = p.lo;
    } else if (p.b < 0.0) {
      x = p.hi;
    } else {
      x = std::isfinite(p.lo) ? p.lo : p.hi;
    }
    if (!std::isfinite(x)) continue;
    const double v = p.a * x * x + p.b * x + p.c;
    if (!have || v < best_v) {
      have = true;
      best_v = v;
      best_x = x;
    }
  }
  if (!have) throw std::logic_error("oracle: energy has no finite minimizer");
  return {best_x, best_v};
}

PiecewiseQuad min_window(const PiecewiseQuad& e, double gamma, double delta) {
  if (!(delta <= gamma))
    throw std::invalid_argument("oracle: window bounds reversed");
  const auto& src = e.pieces();
  if (gamma == delta) {
    std::vector<QuadPiece> out;
    out.reserve(src.size());
    for (const QuadPiece& p : src) push_compact(out, shifted(p, delta));
    return PiecewiseQuad::from_pieces(std::move(out));
  }
  const auto [star, mval] = e.minimize();
  std::vector<QuadPiece> out;
  out.reserve(src.size() + 2);
  for (const QuadPiece& p : src) {
    if (p.hi <= star)
      push_compact(out, shifted(p, delta));
    else if (p.lo < star)
      push_compact(out, shifted({p.lo, star, p.a, p.b, p.c}, delta));
  }
  push_compact(out, {star + delta, star + gamma, 0.0, 0.0, mval});
  if (gamma != kInf) {
    for (const QuadPiece& p : src) {
      if (p.lo >= star)
        push_compact(out, shifted(p, gamma));
      else if (p.hi > star)
        push_compact(out, shifted({star, p.hi, p.a, p.b, p.c}, gamma));
    }
  }
  return PiecewiseQuad::from_pieces(std::move(out));
}

PiecewiseQuad sum(const PiecewiseQuad& a, const PiecewiseQuad& b) {
  std::vector<double> cuts;
  for (const QuadPiece& p : a.pieces()) {
    if (std::isfinite(p.lo)) cuts.push_back(p.lo);
    if (std::isfinite(p.hi)) cuts.push_back(p.hi);
  }
  for (const QuadPiece& p : b.pieces()) {
    if (std::isfinite(p.lo)) cuts.push_back(p.lo);
    if (std::isfinite(p.hi)) cuts.push_back(p.hi);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<QuadPiece> out;
  const std::size_t k = cuts.size();
  for (std::size_t i = 0; i <= k; ++i) {
    const double lo = (i == 0) ? -kInf : cuts[i - 1];
    const double hi = (i == k) ? kInf : cuts[i];
    if (!(hi > lo)) continue;
    double mid;
    if (!std::isfinite(lo))
      mid = std::isfinite(hi) ? hi - 1.0 : 0.0;
    else if (!std::isfinite(hi))
      mid = lo + 1.0;
    else
      mid = 0.5 * (lo + hi);
    const auto pick = [mid](const PiecewiseQuad& e) -> const QuadPiece& {
      const auto& ps = e.pieces();
      auto it = std::lower_bound(
          ps.begin(), ps.end(), mid,
          [](const QuadPiece& p, double v) { return p.hi < v; });
      if (it == ps.end()) --it;
      return *it;
    };
    const QuadPiece& pa = pick(a);
    const QuadPiece& pb = pick(b);
    push_compact(out, {lo, hi, pa.a + pb.a, pa.b + pb.b, pa.c + pb.c});
  }
  return PiecewiseQuad::from_pieces(std::move(out));
}

double weighted_sse(const std::vector<double>& t,
                    const std::vector<double>& lambda,
                    const std::vector<double>& s) {
  double e = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    e += lambda[i] * (s[i] - t[i]) * (s[i] - t[i]);
  return e;
}

namespace {

double clamp_to(double x, double lo, double hi) {
  return std::min(std::max(x, lo), hi);
}

}  // namespace

RegressionResult dp_lir_path(const PathInstance& inst) {
  inst.check();
  const std::size_t n = inst.n();
  std::vector<double> star(n);
  PiecewiseQuad e = PiecewiseQuad::quadratic(inst.lambda[0], inst.t[0]);
  star[0] = e.minimize().first;
  for (std::size_t i = 1; i < n; ++i) {
    e = min_window(e, inst.gamma[i - 1], inst.delta[i - 1]);
    e.add_quadratic(inst.lambda[i], inst.t[i]);
    star[i] = e.minimize().first;
  }
  RegressionResult r;
  r.s.resize(n);
  r.s[n - 1] = star[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    const double lo =
        (inst.gamma[i] == kInf) ? -kInf : r.s[i + 1] - inst.gamma[i];
    r.s[i] = clamp_to(star[i], lo, r.s[i + 1] - inst.delta[i]);
  }
  r.energy = weighted_sse(inst.t, inst.lambda, r.s);
  return r;
}

RegressionResult dp_lir_tree(const TreeInstance& inst) {
  inst.check();
  const std::size_t n = inst.n();
  const int root = inst.root();
  std::vector<std::vector<int>> kids(n);
  for (std::size_t v = 0; v < n; ++v)
    if (inst.parent[v] != -1) kids[inst.parent[v]].push_back(static_cast<int>(v));

  std::vector<int> order;  // post-order
  order.reserve(n);
  {
    std::vector<std::pair<int, std::size_t>> stack{{root, 0}};
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      if (next < kids[v].size()) {
        const int c = kids[v][next++];
        stack.push_back({c, 0});
      } else {
        order.push_back(v);
        stack.pop_back();
      }
    }
  }

  std::vector<PiecewiseQuad> energy(n);
  std::vector<double> star(n);
  for (int v : order) {
    PiecewiseQuad e =
        PiecewiseQuad::quadratic(inst.lambda[v], inst.t[v]);
    for (int c : kids[v])
      e = sum(e, min_window(energy[c], inst.gamma[c], inst.delta[c]));
    star[v] = e.minimize().first;
    energy[v] = std::move(e);
  }

  RegressionResult r;
  r.s.assign(n, 0.0);
  r.s[root] = star[root];
  r.root = root;
  {
    std::vector<int> stack{root};
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int c : kids[v]) {
        const double lo =
            (inst.gamma[c] == kInf) ? -kInf : r.s[v] - inst.gamma[c];
        r.s[c] = clamp_to(star[c], lo, r.s[v] - inst.delta[c]);
        stack.push_back(c);
      }
    }
  }
  r.energy = weighted_sse(inst.t, inst.lambda, r.s);
  return r;
}

TreeInstance path_as_tree(const PathInstance& inst) {
  inst.check();
  const std::size_t n = inst.n();
  TreeInstance tr;
  tr.t = inst.t;
  tr.lambda = inst.lambda;
  tr.parent.assign(n, -1);
  tr.gamma.assign(n, 0.0);
  tr.delta.assign(n, 0.0);
  for (std::size_t v = 1; v < n; ++v) {
    tr.parent[v] = static_cast<int>(v) - 1;
    tr.gamma[v] = inst.gamma[v - 1];
    tr.delta[v] = inst.delta[v - 1];
  }
  return tr;
}

TreeInstance reroot(const TreeInstance& inst, int new_root) {
  const std::size_t n = inst.n();
  struct Half {
    int to;
    double gamma, delta;
  };
  std::vector<std::vector<Half>> adj(n);
  for (std::size_t v = 0; v < n; ++v) {
    const int p = inst.parent[v];
    if (p == -1) continue;
    adj[v].push_back({p, inst.gamma[v], inst.delta[v]});
    adj[p].push_back({static_cast<int>(v), inst.gamma[v], inst.delta[v]});
  }
  TreeInstance out;
  out.t = inst.t;
  out.lambda = inst.lambda;
  out.parent.assign(n, -2);
  out.gamma.assign(n, 0.0);
  out.delta.assign(n, 0.0);
  out.rooted = true;
  out.parent[new_root] = -1;
  std::queue<int> q;
  q.push(new_root);
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (const Half& h : adj[v]) {
      if (out.parent[h.to] != -2) continue;
      out.parent[h.to] = v;
      out.gamma[h.to] = h.gamma;
      out.delta[h.to] = h.delta;
      q.push(h.to);
    }
  }
  return out;
}

RegressionResult brute_lur_tree(const TreeInstance& inst) {
  const std::size_t n = inst.n();
  RegressionResult best;
  bool have = false;
  for (std::size_t r = 0; r < n; ++r) {
    RegressionResult cand = dp_lir_tree(reroot(inst, static_cast<int>(r)));
    cand.root = static_cast<int>(r);
    // same tie rule as the sweep solvers: keep the lowest root id among
    // candidates within a small energy margin
    if (!have ||
        cand.energy < best.energy - 1e-9 * (1.0 + std::fabs(best.energy))) {
      have = true;
      best = std::move(cand);
    }
  }
  return best;
}

RegressionResult brute_lur_path(const PathInstance& inst) {
  return brute_lur_tree(path_as_tree(inst));
}

std::vector<double> pava_isotonic(const std::vector<double>& t,
                                  const std::vector<double>& w) {
  struct Block {
    double sum_wt, sum_w;
    std::size_t count;
    double mean() const { return sum_wt / sum_w; }
  };
  std::vector<Block> blocks;
  blocks.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    blocks.push_back({w[i] * t[i], w[i], 1});
    while (blocks.size() >= 2 &&
           blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
      blocks[blocks.size() - 2].sum_wt += blocks.back().sum_wt;
      blocks[blocks.size() - 2].sum_w += blocks.back().sum_w;
      blocks[blocks.size() - 2].count += blocks.back().count;
      blocks.pop_back();
    }
  }
  std::vector<double> s;
  s.reserve(t.size());
  for (const Block& b : blocks)
    for (std::size_t k = 0; k < b.count; ++k) s.push_back(b.mean());
  return s;
}

bool feasible_path(const PathInstance& inst, const std::vector<double>& s,
                   double tol) {
  if (s.size() != inst.n()) return false;
  for (std::size_t i = 0; i + 1 < inst.n(); ++i) {
    const double d = s[i + 1] - s[i];
    if (d < inst.delta[i] - tol) return false;
    if (inst.gamma[i] != kInf && d > inst.gamma[i] + tol) return false;
  }
  return true;
}

bool feasible_tree(const TreeInstance& inst, const std::vector<double>& s,
                   double tol) {
  if (s.size() != inst.n()) return false;
  for (std::size_t v = 0; v < inst.n(); ++v) {
    const int p = inst.parent[v];
    if (p == -1) continue;
    const double d = s[p] - s[v];
    if (d < inst.delta[v] - tol) return false;
    if (inst.gamma[v] != kInf && d > inst.gamma[v] + tol) return false;
  }
  return true;
}

bool feasible_unimodal_tree(const TreeInstance& inst,
                            const std::vector<double>& s, int apex,
                            double tol) {
  return feasible_tree(reroot(inst, apex), s, tol);
}

void model_interval_ranks(PwlMonotone& f, std::size_t lo, std::size_t hi,
                          const AffineMap2& psi) {
  if (f.vertices.empty()) return;
  const std::size_t n = f.vertices.size();
  if (hi >= n) hi = n - 1;
  if (lo > hi) return;
  for (std::size_t i = lo; i <= hi; ++i) f.vertices[i] = psi(f.vertices[i]);
  const auto slope = [&psi](double mu) {
    const double dx = psi.m11 + psi.m12 * mu;
    const double dy = psi.m21 + psi.m22 * mu;
    if (!(dx > 0.0))
      throw std::invalid_argument("model: map reverses ray direction");
    return dy / dx;
  };
  if (lo == 0) f.mu_minus = slope(f.mu_minus);
  if (hi == n - 1) f.mu_plus = slope(f.mu_plus);
}

}  // namespace lipreg::oracle
