#ifndef CAUSALEM_CAUSAL_HPP
#define CAUSALEM_CAUSAL_HPP

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "causalem/inference.hpp"
#include "causalem/model.hpp"
#include "causalem/sampling.hpp"

namespace causalem {

// Expression tree over observational conditionals. Sum nodes bind their
// variables lexically: an inner sum over a variable shadows any outer
// binding of the same variable within its own subtree, so closed forms that
// reuse an intervened variable as an inner summation index need no renaming.
// Prob terms may pin some variables to fixed states; pinned variables are
// not free.
struct EstimandExpr;
using EstimandPtr = std::shared_ptr<const EstimandExpr>;

struct EstimandExpr {
  enum class Kind { Sum, Product, Quotient, Prob, Constant };

  Kind kind = Kind::Constant;
  std::vector<int> bound;             // Sum
  std::vector<EstimandPtr> children;  // Sum: 1 child; Quotient: {num, den}
  std::vector<int> targets;           // Prob
  std::vector<int> target_states;     // parallel; -1 = free
  std::vector<int> given;             // Prob
  std::vector<int> given_states;      // parallel; -1 = free
  double value = 1.0;                 // Constant
};

EstimandPtr est_sum(std::vector<int> bound, EstimandPtr body);
EstimandPtr est_product(std::vector<EstimandPtr> children);
EstimandPtr est_ratio(EstimandPtr num, EstimandPtr den);
EstimandPtr est_prob(const std::vector<int>& targets,
                     const std::vector<int>& given = {});
// Pinned form: (variable, state) pairs, state -1 meaning free.
EstimandPtr est_prob_at(std::vector<std::pair<int, int>> targets,
                        std::vector<std::pair<int, int>> given = {});
EstimandPtr est_const(double v);

// Free variables (ascending ids), honoring lexical Sum binding and pinned
// Prob states.
std::vector<int> free_vars(const EstimandPtr& expr);

// Conservative cleanup only: flatten nested products, drop unit constants,
// merge directly nested sums, collapse trivial wrappers. No algebraic
// cancellation.
EstimandPtr simplify_estimand(const EstimandPtr& expr);

// Text form, e.g. "sum{Z2}( prob(Y|X1,X2,Z2) * prob(Z2) )"; quotients as
// "ratio(num, den)", pinned states as "Y=1". parse_estimand round-trips
// losslessly (throws ParseError on malformed input).
std::string estimand_to_text(const EstimandPtr& expr, const CausalDiagram& diagram);
EstimandPtr parse_estimand(const std::string& text, const CausalDiagram& diagram);

// Witness returned for non-identifiable queries: a component C and its
// district T with An(C) = T, the structure that defeats the recursion.
struct Hedge {
  std::vector<int> component;
  std::vector<int> district;
};

struct IdentifyResult {
  std::optional<EstimandPtr> estimand;  // set iff identifiable
  std::optional<Hedge> hedge;           // set iff not identifiable
  bool identifiable() const { return estimand.has_value(); }
};

// Complete identification on the ADMG via c-component factorization:
// restrict to ancestors of the targets, factor the intervened-away graph
// into districts, and reduce each district by ancestral marginalization and
// telescoping quotients. Non-identifiability is a result, not an error.
// Intervention states in the query are ignored here; the estimand keeps the
// intervened variables free. When the recursion leaves auxiliary context
// variables free, the result is wrapped in a probability-weighted sum over
// them, so free(expr) is contained in targets plus interventions. An
// intervened variable with no path into the targets drops out entirely (the
// estimand is constant in it).
IdentifyResult identify(const Admg& admg, const Query& query);

// Truncated-factorization semantics: drop the CPTs of the intervened
// variables, restrict the rest at the intervened states, eliminate down to
// the targets, normalize.
Factor interventional_query(const Cbn& cbn, const Query& query);

// Sweep form: a factor over do_vars and targets together (ascending-id
// scope); the slice at X=x is interventional_query at do(X=x).
Factor interventional_table(const Cbn& cbn, const std::vector<int>& targets,
                            const std::vector<int>& do_vars);

// Distinct observed configurations with multiplicities; all plug-in terms
// are computed from projections of this table, so cost tracks the number of
// distinct rows rather than the configuration space.
class SparseJoint {
 public:
  explicit SparseJoint(const Dataset& data);

  int total() const { return total_; }
  const std::vector<int>& var_ids() const { return var_ids_; }
  const std::vector<int>& cards() const { return cards_; }
  const std::vector<std::vector<int>>& configs() const { return configs_; }
  const std::vector<int>& counts() const { return counts_; }

 private:
  std::vector<int> var_ids_;
  std::vector<int> cards_;
  std::vector<std::vector<int>> configs_;
  std::vector<int> counts_;
  int total_ = 0;
};

// Exact estimand evaluation on a model's observational distribution.
// Returns a dense factor over the expression's free variables (a scalar
// factor when none). Quotient and conditioning-on-measure-zero conventions:
// 0/0 and P(.|zero-mass event) contribute 0.
Factor eval_estimand_exact(const EstimandPtr& expr, const Cbn& cbn);

struct PluginResult {
  Factor table;          // dense over the expression's free variables
  bool all_zero = false; // no seen configuration supported the expression
};

// Plug-in evaluation: every Prob term becomes an empirical conditional
// frequency over the configurations seen in the data; sums and products are
// sparse (group-by and natural join over seen support). Unseen conditioning
// events contribute 0. Never renormalizes; renormalize_over_targets exists
// for the CLI flag.
PluginResult eval_estimand_plugin(const EstimandPtr& expr, const Dataset& data);

// Normalize each slice over `targets` to sum 1 (slices with zero mass stay
// zero). Used by the --renormalize flag, never by default.
void renormalize_over_targets(Factor& table, const std::vector<int>& targets);

// Mean absolute difference over all table cells, i.e. over every
// instantiation of the intervened and queried variables together.
// Throws ShapeMismatch unless scopes and cardinalities agree.
double mad(const Factor& estimate, const Factor& truth);

}  // namespace causalem

#endif
