#pragma once

#include <cstddef>

#include "lipreg/act.hpp"
#include "lipreg/instance.hpp"
#include "lipreg/pwl.hpp"

namespace lipreg {

// Snapshot of the scan's anchor frontier before and after the root sweep,
// plus the residual set size; the sweep is built from reversible steps, so a
// finished sweep must hand back what it started with.  Filled on request by
// lur_tree.
struct LurDiagnostics {
  PwlMonotone initial_frontier, final_frontier;
  EnergyCoeffs initial_energy, final_energy;
  std::size_t final_set_members = 0;
};

RegressionResult lir_tree(const TreeInstance& inst, SolveStats* stats = nullptr,
                          PwlMonotone* frontier = nullptr);
RegressionResult lur_tree(const TreeInstance& inst, SolveStats* stats = nullptr,
                          LurDiagnostics* diag = nullptr,
                          PwlMonotone* frontier = nullptr);

}  // namespace lipreg
