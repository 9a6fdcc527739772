#pragma once

// A small ordered collection of Act structures queried as their pointwise
// sum.  The dynamic program for unimodal tree regression walks the tree with
// one frontier per partially-processed component; the sum of the members is
// the derivative of the total energy in the single free variable.

#include <cstddef>
#include <vector>

#include "lipreg/act.hpp"

namespace lipreg {

// Queries over a sum of monotone functions.  Empty members with zero end
// slopes contribute nothing and are skipped.
double sum_evaluate(const std::vector<const Act*>& fs, double x);
double sum_evaluate_inverse(const std::vector<const Act*>& fs, double y);
double sum_integrate(const std::vector<const Act*>& fs, double a);

class TreeSet {
 public:
  explicit TreeSet(ActStats* stats = nullptr) : stats_(stats) {}

  std::size_t members() const { return members_.size(); }
  const Act& member(std::size_t i) const { return members_[i].act; }

  // Hands ownership of a frontier to the set; uninclude returns the most
  // recently included one.  All mutations between the two must have been
  // reversed first (strict LIFO discipline).
  void include(Act&& f);
  Act uninclude();

  // Fold g into the set's base member (created when the set is empty).
  // merge hands back the landing ranks from Act::merge_add; unmerge accepts
  // them to skip the coordinate search.
  std::vector<std::size_t> merge(const PwlMonotone& g,
                                 const EnergyCoeffs& ge = {});
  void unmerge(const PwlMonotone& g, const EnergyCoeffs& ge = {},
               const std::vector<std::size_t>* ranks = nullptr);

  double evaluate(double x) const;
  double evaluate_inverse(double y) const;
  double integrate(double a) const;

  // Absorb vertex (t_v, lambda) into the sum and apply the edge window
  // [delta, gamma] to every member at the sum's frontier minimizer, which is
  // returned.  unupdate reverses the most recent update exactly.
  double update(double t_v, double gamma, double delta, double lambda);
  void unupdate();

  // Pure x-translations distribute over every member; vertical maps with
  // unit y-scale go to the base member alone.  Anything else is rejected.
  void affine(const AffineMap2& psi);

  bool empty() const { return members_.empty(); }

 private:
  struct Entry {
    Act act;
    bool foreign;  // arrived via include()
  };
  struct Record {
    double t_v = 0.0, lambda = 0.0, gamma = 0.0, delta = 0.0, s_star = 0.0;
    bool first = false, sheared = false;
    std::size_t member_count = 0;
    std::vector<SurgeryRecord> per_member;
  };
  std::vector<const Act*> view() const;

  std::vector<Entry> members_;
  std::vector<Record> history_;
  ActStats* stats_ = nullptr;
};

}  // namespace lipreg
