#ifndef CAUSALEM_MODEL_HPP
#define CAUSALEM_MODEL_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "causalem/errors.hpp"

namespace causalem {

enum class VarKind { Observed, Latent };

struct Variable {
  int id = 0;                 // dense, 0..n-1 within a diagram
  std::string name;
  int cardinality = 2;
  VarKind kind = VarKind::Observed;
  std::vector<int> parents;   // ascending ids, no duplicates
};

// Directed acyclic graph over observed and latent variables. Immutable after
// construction; structural edits return new diagrams. Latent variables are
// stored explicitly and must be parentless (mutually independent priors).
class CausalDiagram {
 public:
  CausalDiagram() = default;
  explicit CausalDiagram(std::vector<Variable> vars);

  int size() const { return static_cast<int>(vars_.size()); }
  const Variable& var(int id) const;
  const std::vector<Variable>& variables() const { return vars_; }

  int var_id(const std::string& name) const;  // throws UnknownVariable
  bool has_var(const std::string& name) const;

  std::vector<int> children(int id) const;    // ascending
  std::vector<int> observed_ids() const;
  std::vector<int> latent_ids() const;
  bool is_observed(int id) const { return var(id).kind == VarKind::Observed; }

  // Parents appear before children; ties broken by ascending id.
  std::vector<int> topological_order() const;  // throws CyclicGraph

  // Copy with every latent cardinality set to k (observed untouched).
  CausalDiagram with_latent_cardinality(int k) const;

 private:
  std::vector<Variable> vars_;
  void validate() const;
};

// Conditional probability table for one variable. Layout: one row per parent
// configuration, configurations enumerated row-major over ascending parent
// ids, child state fastest within a row. values.size() = prod(parent cards) *
// child card.
struct Cpt {
  int child = 0;
  std::vector<int> parents;   // must equal the diagram's parent list
  std::vector<double> values;
};

// A diagram plus one CPT per variable: the ground-truth or learned model.
class Cbn {
 public:
  Cbn() = default;
  Cbn(CausalDiagram diagram, std::vector<Cpt> cpts);  // validates normalization

  const CausalDiagram& diagram() const { return diagram_; }
  const Cpt& cpt(int id) const;
  const std::vector<Cpt>& cpts() const { return cpts_; }

 private:
  CausalDiagram diagram_;
  std::vector<Cpt> cpts_;
};

// Interventional query P(targets | do(interventions)). Intervention states
// are concrete; identification ignores the states and uses only the
// intervened set. targets and intervention variables must be observed and
// disjoint.
struct Query {
  std::vector<int> targets;
  std::vector<std::pair<int, int>> interventions;  // (variable, state)
};
void validate_query(const CausalDiagram& diagram, const Query& q);

// Acyclic directed mixed graph: the latent-free projection used by
// identification. Variables keep their original ids (observed subset);
// parents hold the observed-observed directed edges.
struct Admg {
  std::vector<Variable> vars;
  std::vector<std::pair<int, int>> bidirected;  // (lo, hi) pairs, lo < hi

  const Variable& var(int id) const;
  bool has_id(int id) const;
};

// Removes all incoming arrows of the intervened variables (the mutilated
// graph of a do-intervention). Idempotent; everything else preserved.
CausalDiagram truncate(const CausalDiagram& diagram, const std::vector<int>& intervened);

// Semi-Markovian projection: observed-observed directed edges are kept and
// every latent contributes a bidirected clique over its observed children
// (latents with fewer than two children vanish). Latents must be parentless.
Admg project_to_admg(const CausalDiagram& diagram);

// Marks every parentless variable with at least two children as latent; the
// import path for all-observed real-world networks.
CausalDiagram latentify_sources(const CausalDiagram& diagram);

// Model JSON round-trip. Format: {"variables": [{"name", "kind",
// "cardinality", "parents": [names]}], "cpts": [{"child", "rows": [[...]]}]}
// with parent configurations in row-major ascending-id order and
// probabilities written with 17 significant digits. Unknown fields anywhere
// are rejected.
Cbn load_model(const std::string& path);
void save_model(const Cbn& cbn, const std::string& path);
Cbn model_from_json(const std::string& text);
std::string model_to_json(const Cbn& cbn);

}  // namespace causalem

#endif
