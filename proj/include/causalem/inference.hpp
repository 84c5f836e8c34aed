#ifndef CAUSALEM_INFERENCE_HPP
#define CAUSALEM_INFERENCE_HPP

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "causalem/model.hpp"

namespace causalem {

// Dense non-negative table over an ascending-id scope, row-major with the
// last scope variable fastest. The empty-scope factor is a scalar.
struct Factor {
  std::vector<int> scope;
  std::vector<int> card;
  std::vector<double> values;

  static Factor unit();  // empty scope, single cell 1.0

  std::size_t cell_count() const { return values.size(); }
  int scope_pos(int var) const;  // -1 if absent

  // Value at a full-scope assignment (states parallel to scope).
  double at(const std::vector<int>& states) const;
};

// Strides for a row-major layout (last variable fastest).
std::vector<std::size_t> row_major_strides(const std::vector<int>& card);

Factor factor_product(const Factor& a, const Factor& b);
Factor factor_marginalize(const Factor& f, const std::vector<int>& drop);
Factor factor_restrict(const Factor& f,
                       const std::vector<std::pair<int, int>>& assignment);
void factor_normalize(Factor& f);  // no-op on zero mass

// CPT as a factor over {parents, child} in ascending-id scope order.
Factor cpt_factor(const CausalDiagram& diagram, const Cpt& cpt);

// Tab-separated (assignment, value) lines for diffing.
std::string dump_factor(const Factor& f, const CausalDiagram& diagram);

struct EliminationOrder {
  std::vector<int> order;
  int induced_width = 0;  // max eliminated-cluster size - 1
};

// Greedy min-fill over the moralized interaction graph, eliminating
// everything outside keep; ties broken by ascending id.
EliminationOrder min_fill_order(const CausalDiagram& diagram,
                                const std::vector<int>& keep);

// Min-fill over explicit factor scopes (same heuristic, no diagram needed).
EliminationOrder min_fill_order_scopes(const std::vector<std::vector<int>>& scopes,
                                       const std::vector<int>& keep);

// Bucket elimination. Returns the unnormalized factor over every variable
// that is neither eliminated nor fixed by evidence:
//   sum_{order} prod(factors) |_{evidence}.
// Intermediates that underflow are rescaled and the scale reapplied at the
// end, so the result equals the mathematical value up to floating point.
// Throws ScopeNotCovered if an eliminated variable appears in no factor and
// CardinalityMismatch if two factors disagree on a cardinality.
Factor eliminate(const std::vector<Factor>& factors, const EliminationOrder& order,
                 const std::vector<std::pair<int, int>>& evidence);

// As eliminate, but the result is left scaled and the base-e log of the
// applied scale is returned through log_scale (0 when no rescale happened).
// marginal() and the learning E-step use this to stay finite on tiny masses.
Factor eliminate_scaled(const std::vector<Factor>& factors,
                        const EliminationOrder& order,
                        const std::vector<std::pair<int, int>>& evidence,
                        double* log_scale);

// Normalized P(targets | evidence) by variable elimination.
// Throws ZeroProbabilityEvidence when the evidence has mass 0.
Factor marginal(const Cbn& cbn, const std::vector<int>& targets,
                const std::vector<std::pair<int, int>>& evidence = {});

// Same contract as marginal, by full joint enumeration; the test oracle.
// Guarded: throws TooLarge when the joint exceeds 2^24 cells.
Factor brute_force_marginal(const Cbn& cbn, const std::vector<int>& targets,
                            const std::vector<std::pair<int, int>>& evidence = {});

}  // namespace causalem

#endif
