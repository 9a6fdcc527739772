#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lipreg/instance.hpp"

namespace lipreg {

// Path CSV: header "index,t[,weight]" or a headerless single column of
// targets.  Rows may arrive out of order; duplicate or missing indices are
// reported with their line number.  Edge bounds come from the scalar
// defaults (per-edge values are a JSON-only feature for paths).
PathInstance parse_path_csv(const std::string& text, double gamma_default,
                            double delta_default);

// Tree CSV: header "id,parent,t[,weight[,gamma,delta]]"; parent -1 or empty
// marks the root.  A present, nonempty gamma/delta cell overrides the scalar
// default for that vertex's parent edge.  Forests, cycles, and unknown
// parents are reported with the offending id.
TreeInstance parse_tree_csv(const std::string& text, double gamma_default,
                            double delta_default, bool rooted);

// JSON mirrors: {"t": [...], "lambda": [...], "gamma": x, "delta": x} plus
// "parent" for trees, where x is a number, "inf" (gamma only), or a list.
PathInstance parse_path_json(const std::string& text, double gamma_default,
                             double delta_default);
TreeInstance parse_tree_json(const std::string& text, double gamma_default,
                             double delta_default, bool rooted);

std::string emit_path_csv(const PathInstance& inst);
std::string emit_tree_csv(const TreeInstance& inst);
std::string emit_path_json(const PathInstance& inst);
std::string emit_tree_json(const TreeInstance& inst);

// Results print with 17 significant digits.  CSV: "id,s" rows in input
// order, then "# energy=..." and, for the unimodal modes, "# root=...".
std::string emit_result_csv(const RegressionResult& res, bool with_root);
std::string emit_result_json(const RegressionResult& res, bool with_root);

// Deterministic under (kind, n, seed).  Kinds: path (random walk),
// balanced-tree, random-tree, terrain-ridge (noisy single peak).  Tree files
// carry explicit per-edge gamma/delta cells taken from the scalars given
// here; path CSV carries targets only.
std::string generate_instance(const std::string& kind, std::size_t n,
                              std::uint64_t seed, const std::string& format,
                              double gamma, double delta);

// Command-line front end; args excludes the program name.  Exit codes:
// 0 success, 2 input error, 3 verification failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace lipreg
