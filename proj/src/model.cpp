#include "causalem/model.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace causalem {

namespace {

std::string id_list(const std::vector<int>& ids) {
  std::string s = "{";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(ids[i]);
  }
  return s + "}";
}

}  // namespace

CausalDiagram::CausalDiagram(std::vector<Variable> vars) : vars_(std::move(vars)) {
  validate();
}

void CausalDiagram::validate() const {
  const int n = size();
  std::unordered_set<std::string> names;
  for (int i = 0; i < n; ++i) {
    const Variable& v = vars_[i];
    if (v.id != i)
      throw Error("variable at index " + std::to_string(i) + " has id " +
                  std::to_string(v.id) + "; ids must be dense 0..n-1");
    if (v.name.empty())
      throw Error("variable " + std::to_string(i) + " has an empty name");
    if (!names.insert(v.name).second)
      throw Error("duplicate variable name '" + v.name + "'");
    if (v.cardinality < 1)
      throw Error("variable '" + v.name + "' has cardinality " +
                  std::to_string(v.cardinality));
    std::set<int> seen;
    for (int p : v.parents) {
      if (p < 0 || p >= n)
        throw UnknownVariable("variable '" + v.name + "' lists parent id " +
                              std::to_string(p) + " outside 0.." + std::to_string(n - 1));
      if (p == v.id)
        throw CyclicGraph("variable '" + v.name + "' lists itself as a parent");
      if (!seen.insert(p).second)
        throw Error("variable '" + v.name + "' lists parent " + std::to_string(p) +
                    " twice");
    }
    if (!std::is_sorted(v.parents.begin(), v.parents.end()))
      throw Error("variable '" + v.name + "' has an unsorted parent list");
    if (v.kind == VarKind::Latent && !v.parents.empty())
      throw LatentWithParents("latent variable '" + v.name + "' has parents " +
                              id_list(v.parents));
  }
  topological_order();  // throws CyclicGraph on a cycle
}

const Variable& CausalDiagram::var(int id) const {
  if (id < 0 || id >= size())
    throw UnknownVariable("variable id " + std::to_string(id) + " outside 0.." +
                          std::to_string(size() - 1));
  return vars_[id];
}

int CausalDiagram::var_id(const std::string& name) const {
  for (const Variable& v : vars_)
    if (v.name == name) return v.id;
  throw UnknownVariable("no variable named '" + name + "'");
}

bool CausalDiagram::has_var(const std::string& name) const {
  for (const Variable& v : vars_)
    if (v.name == name) return true;
  return false;
}

std::vector<int> CausalDiagram::children(int id) const {
  var(id);
  std::vector<int> out;
  for (const Variable& v : vars_)
    if (std::binary_search(v.parents.begin(), v.parents.end(), id))
      out.push_back(v.id);
  return out;
}

std::vector<int> CausalDiagram::observed_ids() const {
  std::vector<int> out;
  for (const Variable& v : vars_)
    if (v.kind == VarKind::Observed) out.push_back(v.id);
  return out;
}

std::vector<int> CausalDiagram::latent_ids() const {
  std::vector<int> out;
  for (const Variable& v : vars_)
    if (v.kind == VarKind::Latent) out.push_back(v.id);
  return out;
}

std::vector<int> CausalDiagram::topological_order() const {
  const int n = size();
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<int>> kids(n);
  for (const Variable& v : vars_) {
    indegree[v.id] = static_cast<int>(v.parents.size());
    for (int p : v.parents) kids[p].push_back(v.id);
  }
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (int i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push(i);
  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    int u = ready.top();
    ready.pop();
    order.push_back(u);
    for (int c : kids[u])
      if (--indegree[c] == 0) ready.push(c);
  }
  if (static_cast<int>(order.size()) != n) {
    std::vector<int> stuck;
    for (int i = 0; i < n; ++i)
      if (indegree[i] > 0) stuck.push_back(i);
    throw CyclicGraph("diagram has no topological order; cycle among " + id_list(stuck));
  }
  return order;
}

CausalDiagram CausalDiagram::with_latent_cardinality(int k) const {
  if (k < 1) throw Error("latent cardinality must be >= 1, got " + std::to_string(k));
  std::vector<Variable> vars = vars_;
  for (Variable& v : vars)
    if (v.kind == VarKind::Latent) v.cardinality = k;
  return CausalDiagram(std::move(vars));
}

Cbn::Cbn(CausalDiagram diagram, std::vector<Cpt> cpts)
    : diagram_(std::move(diagram)), cpts_(std::move(cpts)) {
  const int n = diagram_.size();
  if (static_cast<int>(cpts_.size()) != n)
    throw Error("expected " + std::to_string(n) + " CPTs, got " +
                std::to_string(cpts_.size()));
  for (int i = 0; i < n; ++i) {
    const Cpt& c = cpts_[i];
    const Variable& v = diagram_.var(i);
    if (c.child != i)
      throw Error("CPT at index " + std::to_string(i) + " is for child " +
                  std::to_string(c.child));
    if (c.parents != v.parents)
      throw Error("CPT parent scope for '" + v.name +
                  "' does not match the diagram");
    std::size_t rows = 1;
    for (int p : c.parents) rows *= static_cast<std::size_t>(diagram_.var(p).cardinality);
    const std::size_t want = rows * static_cast<std::size_t>(v.cardinality);
    if (c.values.size() != want)
      throw ShapeMismatch("CPT for '" + v.name + "' has " +
                          std::to_string(c.values.size()) + " entries, expected " +
                          std::to_string(want));
    for (std::size_t r = 0; r < rows; ++r) {
      double sum = 0.0;
      for (int s = 0; s < v.cardinality; ++s) {
        double x = c.values[r * v.cardinality + s];
        if (!(x >= 0.0) || !(x <= 1.0 + 1e-12) || !std::isfinite(x))
          throw Error("CPT for '" + v.name + "' has an entry outside [0,1]");
        sum += x;
      }
      if (std::fabs(sum - 1.0) > 1e-9)
        throw Error("CPT row " + std::to_string(r) + " for '" + v.name +
                    "' sums to " + std::to_string(sum));
    }
  }
}

const Cpt& Cbn::cpt(int id) const {
  if (id < 0 || id >= static_cast<int>(cpts_.size()))
    throw UnknownVariable("no CPT for variable id " + std::to_string(id));
  return cpts_[id];
}

void validate_query(const CausalDiagram& diagram, const Query& q) {
  if (q.targets.empty()) throw Error("query has no target variables");
  std::set<int> seen;
  for (int y : q.targets) {
    const Variable& v = diagram.var(y);
    if (v.kind != VarKind::Observed)
      throw Error("query target '" + v.name + "' is latent");
    if (!seen.insert(y).second)
      throw Error("query target " + std::to_string(y) + " repeated");
  }
  for (auto [x, s] : q.interventions) {
    const Variable& v = diagram.var(x);
    if (v.kind != VarKind::Observed)
      throw Error("intervened variable '" + v.name + "' is latent");
    if (!seen.insert(x).second)
      throw Error("variable " + std::to_string(x) +
                  " appears in both targets and interventions (or twice)");
    if (s < 0 || s >= v.cardinality)
      throw StateOutOfRange("intervention state " + std::to_string(s) +
                            " outside domain of '" + v.name + "'");
  }
}

const Variable& Admg::var(int id) const {
  for (const Variable& v : vars)
    if (v.id == id) return v;
  throw UnknownVariable("ADMG has no variable with id " + std::to_string(id));
}

bool Admg::has_id(int id) const {
  for (const Variable& v : vars)
    if (v.id == id) return true;
  return false;
}

CausalDiagram truncate(const CausalDiagram& diagram, const std::vector<int>& intervened) {
  std::vector<Variable> vars = diagram.variables();
  for (int x : intervened) {
    diagram.var(x);  // throws UnknownVariable
    vars[x].parents.clear();
  }
  return CausalDiagram(std::move(vars));
}

Admg project_to_admg(const CausalDiagram& diagram) {
  Admg out;
  for (const Variable& v : diagram.variables()) {
    if (v.kind == VarKind::Latent) {
      if (!v.parents.empty())
        throw LatentWithParents("latent variable '" + v.name + "' has parents");
      continue;
    }
    Variable ov = v;
    std::vector<int> obs_parents;
    for (int p : v.parents)
      if (diagram.var(p).kind == VarKind::Observed) obs_parents.push_back(p);
    ov.parents = std::move(obs_parents);
    out.vars.push_back(std::move(ov));
  }
  std::set<std::pair<int, int>> edges;
  for (int u : diagram.latent_ids()) {
    std::vector<int> kids = diagram.children(u);
    // Pairwise-clique convention for latents with more than two children.
    for (std::size_t i = 0; i < kids.size(); ++i)
      for (std::size_t j = i + 1; j < kids.size(); ++j)
        edges.insert({kids[i], kids[j]});
  }
  out.bidirected.assign(edges.begin(), edges.end());
  return out;
}

CausalDiagram latentify_sources(const CausalDiagram& diagram) {
  std::vector<Variable> vars = diagram.variables();
  for (Variable& v : vars) {
    if (!v.parents.empty()) continue;
    if (diagram.children(v.id).size() >= 2) v.kind = VarKind::Latent;
  }
  return CausalDiagram(std::move(vars));
}

}  // namespace causalem
