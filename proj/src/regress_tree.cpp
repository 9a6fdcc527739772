#include "lipreg/regress_tree.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "lipreg/regress_path.hpp"
#include "lipreg/treeset.hpp"

namespace lipreg {

namespace {

// The solvers work on trees whose vertices have at most two children.  Wider
// vertices are expanded through weightless structural vertices joined to
// their parent by equality edges (window [0, 0]); each original child keeps
// its own edge parameters on the edge to whatever it ends up hanging from.
struct BinTree {
  std::size_t n_real = 0;
  std::vector<int> parent;               // toward root, -1 at the root
  std::vector<std::array<int, 2>> kids;  // -1 marks an empty slot
  std::vector<double> t, lambda;
  std::vector<double> gamma, delta;  // keyed by the child endpoint
  int root = -1;
  std::vector<int> post;

  std::size_t m() const { return parent.size(); }
};

int wrap(BinTree& b, const std::vector<int>& cs, std::size_t lo,
         std::size_t hi) {
  if (hi - lo == 1) return cs[lo];
  const int d = static_cast<int>(b.m());
  b.parent.push_back(-1);
  b.kids.push_back({-1, -1});
  b.t.push_back(0.0);
  b.lambda.push_back(0.0);
  b.gamma.push_back(0.0);
  b.delta.push_back(0.0);
  const std::size_t mid = lo + (hi - lo) / 2;
  const int a = wrap(b, cs, lo, mid);
  const int c = wrap(b, cs, mid, hi);
  b.kids[d] = {a, c};
  b.parent[a] = d;
  b.parent[c] = d;
  return d;
}

void fill_post_order(BinTree& b) {
  b.post.clear();
  b.post.reserve(b.m());
  std::vector<std::pair<int, int>> stk{{b.root, 0}};
  while (!stk.empty()) {
    auto& [v, next] = stk.back();
    if (next < 2) {
      const int c = b.kids[v][next++];
      if (c >= 0) stk.push_back({c, 0});
      continue;
    }
    b.post.push_back(v);
    stk.pop_back();
  }
}

BinTree binarize(const TreeInstance& inst, int root) {
  const std::size_t n = inst.n();
  BinTree b;
  b.n_real = n;
  b.parent.assign(n, -1);
  b.kids.assign(n, {{-1, -1}});
  b.t = inst.t;
  b.lambda = inst.lambda;
  b.gamma = inst.gamma;
  b.delta = inst.delta;
  b.root = root;
  std::vector<std::vector<int>> ch(n);
  for (std::size_t v = 0; v < n; ++v)
    if (inst.parent[v] >= 0) ch[inst.parent[v]].push_back(static_cast<int>(v));
  for (std::size_t v = 0; v < n; ++v) {
    const auto& cs = ch[v];
    if (cs.empty()) continue;
    if (cs.size() <= 2) {
      b.kids[v] = {cs[0], cs.size() == 2 ? cs[1] : -1};
      for (int c : cs) b.parent[c] = static_cast<int>(v);
    } else {
      const std::size_t mid = cs.size() / 2;
      const int a = wrap(b, cs, 0, mid);
      const int c = wrap(b, cs, mid, cs.size());
      b.kids[v] = {a, c};
      b.parent[a] = static_cast<int>(v);
      b.parent[c] = static_cast<int>(v);
    }
  }
  fill_post_order(b);
  return b;
}

// Re-hangs a binarized tree from a new root.  Edge parameters ride along
// with their undirected edge and end up keyed by the new child endpoint.
BinTree reorient(const BinTree& b, int new_root) {
  const std::size_t m = b.m();
  struct Half {
    int to;
    double gamma, delta;
  };
  std::vector<std::vector<Half>> adj(m);
  for (std::size_t v = 0; v < m; ++v) {
    const int p = b.parent[v];
    if (p < 0) continue;
    adj[v].push_back({p, b.gamma[v], b.delta[v]});
    adj[p].push_back({static_cast<int>(v), b.gamma[v], b.delta[v]});
  }
  BinTree r;
  r.n_real = b.n_real;
  r.parent.assign(m, -2);
  r.kids.assign(m, {{-1, -1}});
  r.t = b.t;
  r.lambda = b.lambda;
  r.gamma.assign(m, 0.0);
  r.delta.assign(m, 0.0);
  r.root = new_root;
  std::vector<int> order{new_root};
  r.parent[new_root] = -1;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int v = order[i];
    for (const Half& h : adj[v]) {
      if (r.parent[h.to] != -2) continue;
      r.parent[h.to] = v;
      r.gamma[h.to] = h.gamma;
      r.delta[h.to] = h.delta;
      if (r.kids[v][0] < 0)
        r.kids[v][0] = h.to;
      else if (r.kids[v][1] < 0)
        r.kids[v][1] = h.to;
      else
        throw std::logic_error("reorient: vertex degree exceeds three");
      order.push_back(h.to);
    }
  }
  fill_post_order(r);
  return r;
}

// Rooted instance oriented toward the chosen apex, edge parameters re-keyed
// by the new child endpoints.
TreeInstance orient_instance(const TreeInstance& inst, int root) {
  const std::size_t n = inst.n();
  struct Half {
    int to;
    double gamma, delta;
  };
  std::vector<std::vector<Half>> adj(n);
  for (std::size_t v = 0; v < n; ++v) {
    const int p = inst.parent[v];
    if (p < 0) continue;
    adj[v].push_back({p, inst.gamma[v], inst.delta[v]});
    adj[p].push_back({static_cast<int>(v), inst.gamma[v], inst.delta[v]});
  }
  TreeInstance out;
  out.parent.assign(n, -2);
  out.t = inst.t;
  out.lambda = inst.lambda;
  out.gamma.assign(n, 0.0);
  out.delta.assign(n, 0.0);
  out.rooted = true;
  out.parent[root] = -1;
  std::vector<int> order{root};
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int v = order[i];
    for (const Half& h : adj[v]) {
      if (out.parent[h.to] != -2) continue;
      out.parent[h.to] = v;
      out.gamma[h.to] = h.gamma;
      out.delta[h.to] = h.delta;
      order.push_back(h.to);
    }
  }
  return out;
}

}  // namespace

RegressionResult lir_tree(const TreeInstance& inst, SolveStats* stats,
                          PwlMonotone* frontier) {
  inst.check();
  if (!inst.rooted)
    throw std::invalid_argument("lir_tree: instance must be rooted");
  const std::size_t n = inst.n();
  BinTree b = binarize(inst, inst.root());
  const std::size_t m = b.m();
  ActStats astats;
  ActStats* st = stats ? &astats : nullptr;
  std::vector<Act> acts(m);
  std::vector<double> star(m);
  std::uint64_t rot_before = 0;
  for (int v : b.post) {
    Act f(0.0, 0.0, st, false);
    const int c0 = b.kids[v][0], c1 = b.kids[v][1];
    if (c0 >= 0) {
      f = std::move(acts[c0]);
      acts[c0] = Act();
      if (c1 >= 0) {
        Act& g = acts[c1];
        if (g.size() > f.size()) std::swap(f, g);
        const PwlMonotone gp = g.extract();
        f.merge_add(gp, g.energy());
        acts[c1] = Act();
      }
    }
    const bool is_root = v == b.root;
    star[v] = act_update(f, b.t[v], is_root ? 0.0 : b.gamma[v],
                         is_root ? 0.0 : b.delta[v], b.lambda[v], !is_root)
                  .s_star;
    acts[v] = std::move(f);
    if (stats) {
      ++stats->updates;
      stats->max_rotations_per_update = std::max(
          stats->max_rotations_per_update, astats.rotations - rot_before);
      rot_before = astats.rotations;
    }
  }
  if (frontier) *frontier = acts[b.root].extract();
  std::vector<double> sall(m);
  sall[b.root] = star[b.root];
  std::vector<int> stk{b.root};
  while (!stk.empty()) {
    const int v = stk.back();
    stk.pop_back();
    for (const int c : b.kids[v]) {
      if (c < 0) continue;
      sall[c] = backsolve_step(sall[v], star[c], b.gamma[c], b.delta[c]);
      stk.push_back(c);
    }
  }
  RegressionResult out;
  out.s.assign(sall.begin(), sall.begin() + n);
  out.root = inst.root();
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = out.s[i] - inst.t[i];
    e += inst.lambda[i] * r * r;
  }
  out.energy = e;
  if (stats) {
    stats->rotations += astats.rotations;
    stats->merged_breakpoints += astats.merged_breakpoints;
  }
  return out;
}

// Root sweep: every vertex is tried as the apex by walking the binarized
// tree depth-first while maintaining, as a set of frontiers, the already
// processed part of the tree seen from the current position.  Each move
// across an edge is one reversible set update; child structures are taken
// apart on the way down and reassembled from their pieces on the way up.
RegressionResult lur_tree(const TreeInstance& inst, SolveStats* stats,
                          LurDiagnostics* diag, PwlMonotone* frontier) {
  inst.check();
  const std::size_t n = inst.n();
  RegressionResult out;
  if (n == 1) {
    out.s = {inst.t[0]};
    out.root = 0;
    if (stats) stats->updates = 1;
    return out;
  }
  BinTree b0 = binarize(inst, inst.root());
  int rhat = -1;
  for (std::size_t v = 0; v < b0.m(); ++v) {
    const int deg = (b0.kids[v][0] >= 0) + (b0.kids[v][1] >= 0) +
                    (b0.parent[v] >= 0);
    if (deg == 1) {
      rhat = static_cast<int>(v);
      break;
    }
  }
  BinTree b = reorient(b0, rhat);
  const std::size_t m = b.m();
  ActStats astats;
  ActStats* st = stats ? &astats : nullptr;

  // Rooted pass toward the anchor leaf, recording every step.  Light-side
  // child structures are folded into their sibling's and kept as snapshots.
  // Snapshots are taken uncollapsed and every merge keeps its landing ranks
  // (held_ranks for merges into a held frontier, set_ranks for merges into
  // the set base), so each fold is taken apart by rank rather than by
  // coordinate; the strict LIFO discipline of the sweep keeps recorded ranks
  // valid however close together the breakpoints land.
  std::vector<int> heavy(m, -1), light(m, -1);
  std::vector<UpdateRecord> rec(m);
  std::vector<PwlMonotone> snap(m);
  std::vector<EnergyCoeffs> snap_e(m);
  std::vector<std::vector<std::size_t>> held_ranks(m), set_ranks(m);
  std::vector<Act> acts(m);
  for (const int v : b.post) {
    if (v == rhat) continue;
    Act f(0.0, 0.0, st);
    const int c0 = b.kids[v][0], c1 = b.kids[v][1];
    if (c0 >= 0) {
      heavy[v] = c0;
      f = std::move(acts[c0]);
      acts[c0] = Act();
      if (c1 >= 0) {
        Act other = std::move(acts[c1]);
        acts[c1] = Act();
        light[v] = c1;
        if (other.size() > f.size()) {
          std::swap(f, other);
          heavy[v] = c1;
          light[v] = c0;
        }
        snap[light[v]] = other.extract(false);
        snap_e[light[v]] = other.energy();
        held_ranks[light[v]] = f.merge_add(snap[light[v]], snap_e[light[v]]);
      }
    }
    rec[v] = act_update(f, b.t[v], b.gamma[v], b.delta[v], b.lambda[v], true);
    acts[v] = std::move(f);
    if (stats) ++stats->updates;
  }
  const int c_anchor = b.kids[rhat][0];
  heavy[rhat] = c_anchor;
  if (diag) {
    diag->initial_frontier = acts[c_anchor].extract();
    diag->initial_energy = acts[c_anchor].energy();
  }

  TreeSet S(st);
  int best = -1;
  double best_xi = 0.0;
  const auto note_members = [&] {
    if (stats)
      stats->max_set_members = std::max(stats->max_set_members, S.members());
  };

  struct Frame {
    int v = -1;
    int next = 0;
    Act held;  // the heavy child's frontier; for leaves, the own frontier
    bool leaf = false;
  };
  const auto make_frame = [&](int v, Act tfv) {
    Frame fr;
    fr.v = v;
    if (v != rhat) {
      if (heavy[v] < 0) {
        fr.leaf = true;
      } else {
        act_unupdate(tfv, rec[v]);
        if (light[v] >= 0)
          tfv.unmerge_subtract(snap[light[v]], snap_e[light[v]],
                               &held_ranks[light[v]]);
      }
    }
    fr.held = std::move(tfv);
    if (v < static_cast<int>(b.n_real)) {
      if (!fr.leaf) S.include(std::move(fr.held));
      if (light[v] >= 0)
        S.include(Act::from_pwl(snap[light[v]], snap_e[light[v]], st));
      Act bar(2.0 * b.lambda[v], 2.0 * b.lambda[v], st);
      bar.insert({b.t[v], 0.0});
      bar.energy_accumulate(b.t[v], b.lambda[v]);
      S.include(std::move(bar));
      const double shat = S.evaluate_inverse(0.0);
      const double xi = S.integrate(shat);
      S.uninclude();
      if (light[v] >= 0) S.uninclude();
      if (!fr.leaf) fr.held = S.uninclude();
      // Tied apexes are routine (equality windows fit whole regions
      // identically), and under roundoff a strict comparison picks one of
      // them unpredictably.  Resolve anything inside a small margin to the
      // lowest vertex id; the brute-force reference does the same.
      const double margin = 1e-9 * (1.0 + std::fabs(best_xi));
      if (best < 0 || xi < best_xi - margin ||
          (xi <= best_xi + margin && v < best)) {
        best = v;
        best_xi = xi;
      }
    }
    return fr;
  };

  std::vector<Frame> stk;
  stk.push_back(make_frame(rhat, std::move(acts[c_anchor])));
  while (true) {
    Frame& fr = stk.back();
    const int v = fr.v;
    int c = -1;
    if (fr.next == 0) {
      c = heavy[v];
      fr.next = 1;
    }
    if (c < 0 && fr.next == 1) {
      c = light[v];
      fr.next = 2;
    }
    if (c >= 0) {
      Act child_tfv;
      if (c == heavy[v]) {
        if (light[v] >= 0)
          set_ranks[light[v]] = S.merge(snap[light[v]], snap_e[light[v]]);
        S.update(b.t[v], b.gamma[c], b.delta[c], b.lambda[v]);
        child_tfv = std::move(fr.held);
      } else {
        S.include(std::move(fr.held));
        S.update(b.t[v], b.gamma[c], b.delta[c], b.lambda[v]);
        child_tfv = Act::from_pwl(snap[c], snap_e[c], st);
      }
      if (stats) ++stats->updates;
      note_members();
      stk.push_back(make_frame(c, std::move(child_tfv)));
      continue;
    }
    // leave v
    if (v == rhat) {
      if (diag) {
        diag->final_frontier = fr.held.extract();
        diag->final_energy = fr.held.energy();
        diag->final_set_members = S.members();
      }
      break;
    }
    const int p = b.parent[v];
    const bool am_heavy = v == heavy[p];
    Act back;
    if (am_heavy) {
      if (fr.leaf) {
        back = std::move(fr.held);
      } else {
        if (light[v] >= 0)
          held_ranks[light[v]] =
              fr.held.merge_add(snap[light[v]], snap_e[light[v]]);
        rec[v] =
            act_update(fr.held, b.t[v], b.gamma[v], b.delta[v], b.lambda[v],
                       true);
        back = std::move(fr.held);
      }
    }
    stk.pop_back();
    Frame& pf = stk.back();
    if (am_heavy) {
      S.unupdate();
      if (light[p] >= 0)
        S.unmerge(snap[light[p]], snap_e[light[p]], &set_ranks[light[p]]);
      pf.held = std::move(back);
    } else {
      S.unupdate();
      pf.held = S.uninclude();
    }
  }

  SolveStats sub;
  const RegressionResult fin =
      lir_tree(orient_instance(inst, best), stats ? &sub : nullptr, frontier);
  out.s = fin.s;
  out.energy = fin.energy;
  out.root = best;
  if (stats) {
    stats->rotations += astats.rotations + sub.rotations;
    stats->merged_breakpoints +=
        astats.merged_breakpoints + sub.merged_breakpoints;
    stats->updates += sub.updates;
    stats->max_rotations_per_update =
        std::max(stats->max_rotations_per_update, sub.max_rotations_per_update);
  }
  return out;
}

}  // namespace lipreg
