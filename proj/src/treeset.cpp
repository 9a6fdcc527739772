#include "lipreg/treeset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>

namespace lipreg {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double sum_evaluate(const std::vector<const Act*>& fs, double x) {
  double s = 0.0;
  for (const Act* f : fs) s += f->evaluate(x);
  return s;
}

double sum_integrate(const std::vector<const Act*>& fs, double a) {
  double s = 0.0;
  for (const Act* f : fs) s += f->integrate(a);
  return s;
}

// Leftmost preimage of y under the sum.  Walks each member's tree once,
// narrowing one shared bracket [lo, hi]; breakpoints outside the bracket are
// skipped without evaluating the sum there, so the probe count stays at
// O(sum of tree heights) even though each probe costs a descent per member.
double sum_evaluate_inverse(const std::vector<const Act*>& fs, double y) {
  double lo = -kInf, hi = kInf;
  double s_lo = 0.0, s_hi = 0.0;
  bool has_lo = false, has_hi = false;
  const auto probe = [&fs](double x) {
    double s = 0.0;
    for (const Act* f : fs) s += f->evaluate(x);
    return s;
  };
  for (const Act* f : fs) {
    std::uint32_t cur = f->root_;
    AffineMap2 above;
    while (cur != 0) {
      const auto& nd = f->nodes_[cur];
      const AffineMap2 here = compose(above, nd.phi);
      const Point2 pos = here({0.0, 0.0});
      above = here;
      if (pos.x <= lo) {
        cur = nd.right;
      } else if (pos.x >= hi) {
        cur = nd.left;
      } else {
        const double s = probe(pos.x);
        if (s < y) {
          lo = pos.x;
          s_lo = s;
          has_lo = true;
          cur = nd.right;
        } else {
          hi = pos.x;
          s_hi = s;
          has_hi = true;
          cur = nd.left;
        }
      }
    }
  }
  if (!has_lo && !has_hi)
    throw std::domain_error("sum inverse: no breakpoints to bracket with");
  if (!has_hi) {
    double slope = 0.0;
    for (const Act* f : fs) slope += f->mu_plus_;
    if (slope <= 0.0)
      throw std::domain_error("sum inverse: value above range of sum");
    return lo + (y - s_lo) / slope;
  }
  if (!has_lo) {
    double slope = 0.0;
    for (const Act* f : fs) slope += f->mu_minus_;
    if (slope <= 0.0)
      throw std::domain_error("sum inverse: value below range of sum");
    return hi + (y - s_hi) / slope;
  }
  // s_lo < y <= s_hi on adjacent breakpoints of the union, so the sum is
  // linear and strictly increasing across [lo, hi].
  return lo + (y - s_lo) * (hi - lo) / (s_hi - s_lo);
}

std::vector<const Act*> TreeSet::view() const {
  std::vector<const Act*> v;
  v.reserve(members_.size());
  for (const auto& e : members_) v.push_back(&e.act);
  return v;
}

void TreeSet::include(Act&& f) { members_.push_back({std::move(f), true}); }

Act TreeSet::uninclude() {
  if (members_.empty() || !members_.back().foreign)
    throw std::logic_error("tree set: uninclude without matching include");
  Act out = std::move(members_.back().act);
  members_.pop_back();
  return out;
}

std::vector<std::size_t> TreeSet::merge(const PwlMonotone& g,
                                        const EnergyCoeffs& ge) {
  if (members_.empty()) members_.push_back({Act(0.0, 0.0, stats_), false});
  return members_.front().act.merge_add(g, ge);
}

void TreeSet::unmerge(const PwlMonotone& g, const EnergyCoeffs& ge,
                      const std::vector<std::size_t>* ranks) {
  if (members_.empty())
    throw std::logic_error("tree set: unmerge on empty set");
  Entry& base = members_.front();
  base.act.unmerge_subtract(g, ge, ranks);
  if (base.act.empty() && !base.foreign) {
    if (members_.size() != 1)
      throw std::logic_error("tree set: base teardown with live members");
    members_.clear();
  }
}

double TreeSet::evaluate(double x) const { return sum_evaluate(view(), x); }

double TreeSet::evaluate_inverse(double y) const {
  return sum_evaluate_inverse(view(), y);
}

double TreeSet::integrate(double a) const { return sum_integrate(view(), a); }

double TreeSet::update(double t_v, double gamma, double delta, double lambda) {
  Record rec;
  rec.t_v = t_v;
  rec.lambda = lambda;
  rec.gamma = gamma;
  rec.delta = delta;
  if (members_.empty()) {
    if (lambda <= 0.0)
      throw std::invalid_argument("tree set: first update needs positive weight");
    rec.first = true;
    rec.sheared = true;
    rec.s_star = t_v;
    rec.member_count = 1;
    members_.push_back({Act(2.0 * lambda, 2.0 * lambda, stats_), false});
    Act& f = members_.back().act;
    f.energy_accumulate(t_v + delta, lambda);
    f.insert({t_v + delta, 0.0});
    if (gamma == kInf)
      f.set_mu_plus(0.0);
    else if (gamma != delta)
      f.insert({t_v + gamma, 0.0});
    const double out = rec.s_star;
    history_.push_back(std::move(rec));
    return out;
  }
  if (members_.front().act.empty())
    throw std::logic_error("tree set: empty base member");
  if (lambda > 0.0) {
    Act& f = members_.front().act;
    f.affine(AffineMap2::vshear(2.0 * lambda, -2.0 * lambda * t_v));
    f.energy_accumulate(t_v, lambda);
    rec.sheared = true;
  }
  double mu_plus_sum = 0.0;
  for (const auto& e : members_) mu_plus_sum += e.act.mu_plus();
  double s_star;
  if (!rec.sheared && mu_plus_sum == 0.0) {
    // weightless update on a capped sum: the minimum is the flat tail, which
    // starts at the rightmost member breakpoint
    s_star = -kInf;
    for (const auto& e : members_)
      if (!e.act.empty())
        s_star = std::max(s_star, e.act.vertex_at(e.act.size() - 1).x);
    if (s_star == -kInf)
      throw std::logic_error("tree set: capped update with no breakpoints");
  } else {
    s_star = evaluate_inverse(0.0);
  }
  rec.s_star = s_star;
  rec.per_member.reserve(members_.size());
  for (auto& e : members_) {
    const double yj = e.act.evaluate(s_star);
    rec.per_member.push_back(plateau_surgery(e.act, s_star, yj, gamma, delta));
  }
  rec.member_count = members_.size();
  history_.push_back(std::move(rec));
  return s_star;
}

void TreeSet::unupdate() {
  if (history_.empty())
    throw std::logic_error("tree set: unupdate without update");
  Record rec = std::move(history_.back());
  history_.pop_back();
  if (rec.member_count != members_.size())
    throw std::logic_error("tree set: member count drifted since update");
  if (rec.first) {
    if (members_.size() != 1 || members_.front().foreign)
      throw std::logic_error("tree set: first-update record mismatch");
    members_.clear();
    return;
  }
  for (std::size_t j = members_.size(); j-- > 0;)
    undo_plateau_surgery(members_[j].act, rec.per_member[j]);
  if (rec.sheared) {
    Act& f = members_.front().act;
    f.energy_add(-rec.lambda, 2.0 * rec.lambda * rec.t_v,
                 -rec.lambda * rec.t_v * rec.t_v);
    f.affine(AffineMap2::vshear(-2.0 * rec.lambda, 2.0 * rec.lambda * rec.t_v));
  }
}

void TreeSet::affine(const AffineMap2& psi) {
  const bool xlate = psi.m11 == 1.0 && psi.m12 == 0.0 && psi.m21 == 0.0 &&
                     psi.m22 == 1.0 && psi.cy == 0.0;
  const bool vertical = psi.m11 == 1.0 && psi.m12 == 0.0 && psi.m22 == 1.0 &&
                        psi.cx == 0.0;
  if (xlate) {
    for (auto& e : members_) e.act.affine(psi);
  } else if (vertical) {
    if (members_.empty())
      throw std::logic_error("tree set: vertical map on empty set");
    members_.front().act.affine(psi);
  } else {
    throw std::invalid_argument("tree set: map does not distribute over a sum");
  }
}

}  // namespace lipreg
