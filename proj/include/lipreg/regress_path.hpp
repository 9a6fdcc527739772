#pragma once

#include <vector>

#include "lipreg/act.hpp"
#include "lipreg/instance.hpp"

namespace lipreg {

// One dynamic-programming step on a single frontier: add the vertex term
// lambda (s - t_v)^2, read off the frontier minimizer, and unless the vertex
// is terminal apply the outgoing edge's window [delta, gamma].  lambda = 0 is
// allowed for structural vertices that carry no data term.
struct UpdateRecord {
  double t_v = 0.0, lambda = 0.0, gamma = 0.0, delta = 0.0;
  double s_star = 0.0;
  bool first = false, sheared = false, surgered = false;
  SurgeryRecord surgery;
};

UpdateRecord act_update(Act& f, double t_v, double gamma, double delta,
                        double lambda, bool with_surgery = true);
// Exact reversal by stored ranks; valid whenever f's vertex sequence matches
// the post-update state, including structures rebuilt from an uncollapsed
// extract.
void act_unupdate(Act& f, const UpdateRecord& rec);
// Coordinate-addressed reversal for callers without a rank-faithful copy
// (e.g. rebuilt from a collapsed extract).
void act_unupdate_by_x(Act& f, const UpdateRecord& rec);

// Optimal parent value given the already-fixed child value s_next, the
// frontier minimizer s_star recorded when the edge was crossed, and the edge
// window.
double backsolve_step(double s_next, double s_star, double gamma, double delta);

// frontier, when given, receives the final frontier derivative (the state of
// the structure after the last vertex's term is absorbed).
RegressionResult lir_path(const PathInstance& inst, SolveStats* stats = nullptr,
                          PwlMonotone* frontier = nullptr);
RegressionResult lur_path(const PathInstance& inst, SolveStats* stats = nullptr);

}  // namespace lipreg
