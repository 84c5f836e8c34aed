#ifndef CAUSALEM_BENCH_HPP
#define CAUSALEM_BENCH_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "causalem/causal.hpp"
#include "causalem/learning.hpp"
#include "causalem/model.hpp"
#include "causalem/sampling.hpp"

namespace causalem {

// CLI query text: "P(Y | do(X1=0, X2=1))" fixes every intervention;
// "P(Y | do(X1, X2))" sweeps them all and yields the full table that mad
// scores. Mixing fixed and swept variables is rejected.
struct ParsedQuery {
  std::vector<int> targets;
  std::vector<int> do_vars;
  std::vector<int> do_states;  // parallel; -1 everywhere in sweep form
  bool sweep = false;
};
ParsedQuery parse_query_text(const std::string& text, const CausalDiagram& diagram);

struct ModelSource {
  std::string id;
  std::optional<GenSpec> family;       // generated ground truth...
  std::optional<std::string> model_path;  // ...or loaded from model JSON
  bool latentify = false;              // apply latentify_sources after load
};

struct ExperimentSpec {
  std::vector<ModelSource> models;
  // (model id, query text); empty query list = each family's default query.
  std::vector<std::pair<std::string, std::string>> queries;
  std::vector<int> sample_sizes;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> methods;  // subset of {"em4ci", "plugin", "exact"}
  EmConfig em;
  std::string out_dir;
  std::string timing = "wall";  // "wall" | "none" (times reported as 0, for
                                // byte-identical reruns)
};

// Experiment JSON mirroring ExperimentSpec; unknown fields rejected.
ExperimentSpec load_experiment_spec(const std::string& path);

struct ResultRow {
  std::string model_id;
  std::string query;
  std::string method;
  int m = 0;
  std::uint64_t seed = 0;
  double mad_value = 0.0;
  int k_lrn = 0;          // em4ci only; 0 otherwise
  double learn_time_s = 0.0;
  double inference_time_s = 0.0;
  bool failed = false;    // recorded, not aborted; mad written as nan
  std::string error;
};

// For each (model, seed, m): build the ground truth, sample, compute exact
// truth tables, then run each method. Learning happens once per
// (model, seed, m) and its time is amortized across that model's queries;
// per-query inference is timed separately. Method errors become failed rows.
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec);

// CSV with the fixed schema
//   model,query,method,m,seed,mad,k_lrn,learn_time_s,inference_time_s
// plus a mean/stddev summary grouped by (model, query, method, m).
void emit_report(const std::vector<ResultRow>& rows, std::ostream& csv,
                 std::ostream& summary);
void write_report_files(const std::vector<ResultRow>& rows,
                        const std::string& out_prefix);

std::vector<ResultRow> parse_results_csv(std::istream& in);  // round-trip of emit_report

}  // namespace causalem

#endif
