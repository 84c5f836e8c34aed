#ifndef CAUSALEM_LEARNING_HPP
#define CAUSALEM_LEARNING_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "causalem/model.hpp"
#include "causalem/sampling.hpp"

namespace causalem {

struct EmConfig {
  int max_iterations = 500;
  double ll_rel_tolerance = 1e-6;   // stop when (LL_t - LL_{t-1})/(1+|LL_t|) < tol
  int restarts = 10;
  std::uint64_t seed = 0;
  int k_step = 2;                   // latent-cardinality schedule step
  int k_max = 0;                    // 0 = 2 * (max observed cardinality)^2
  int threads = 1;                  // E-step worker threads
  double pseudocount = 1e-9;        // added to every expected count before normalizing
};

struct EmFitResult {
  Cbn cbn;
  double log_likelihood = 0.0;
  int iterations = 0;
  std::vector<double> ll_trace;  // LL per iteration, non-decreasing
};

struct RestartDiag {
  int k = 0;
  int restart = 0;
  double log_likelihood = 0.0;
  int iterations = 0;
};

struct LearnResult {
  Cbn cbn;
  double log_likelihood = 0.0;
  double bic = 0.0;
  int k_lrn = 0;  // selected latent cardinality; 0 when the diagram has no latents
  int restarts_used = 0;
  std::vector<int> ks_evaluated;
  std::vector<RestartDiag> diagnostics;
};

// Sum over rows of ln P(observed row), latents summed out exactly.
// Additive over rows; -inf when some row has probability 0.
double log_likelihood(const Cbn& cbn, const Dataset& data);

// Number of free CPT parameters: sum over variables of
// (cardinality - 1) * prod(parent cardinalities).
int free_parameter_count(const CausalDiagram& diagram);

// BIC = -2*LL + p*ln(m), natural log.
double bic_score(double log_likelihood, const Cbn& cbn, int m);

// One EM run at latent cardinality k from the Dirichlet(1,...,1) start drawn
// from init_seed. The E-step computes exact per-row family posteriors via
// bucket-tree propagation on the evidence-restricted model; the M-step
// normalizes expected counts (plus pseudocount). Rows are deduplicated and
// accumulation is chunked in fixed order, so the result is bit-identical for
// any thread count. With no latents this is closed-form frequency counting.
// Throws DegenerateData on an empty dataset.
EmFitResult em_fit(const CausalDiagram& diagram, const Dataset& data, int k,
                   std::uint64_t init_seed, const EmConfig& config);

// 2,4,...,k_max (config default when k_max == 0).
std::vector<int> default_k_schedule(const CausalDiagram& diagram,
                                    const Dataset& data, const EmConfig& config);

// Latent-cardinality search: for each k in the schedule run `restarts`
// EM fits keeping the max-LL candidate, score it with BIC, adopt while
// BIC(new) <= BIC(incumbent) (ties adopt), stop at the first increase.
// If log is non-null, one CSV line per EM iteration is written:
// restart,k,iteration,ll.
LearnResult em4ci_learn(const CausalDiagram& diagram, const Dataset& data,
                        const std::vector<int>& k_schedule, const EmConfig& config,
                        std::ostream* log = nullptr);

}  // namespace causalem

#endif
