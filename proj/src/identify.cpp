#include <algorithm>
#include <map>
#include <queue>

#include "causalem/causal.hpp"

namespace causalem {

namespace {

bool contains(const std::vector<int>& sorted, int v) {
  return std::binary_search(sorted.begin(), sorted.end(), v);
}

std::vector<int> set_minus(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<int> set_and(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
  return out;
}

// Directed and bidirected structure of an ADMG plus one fixed topological
// order; every subset argument below is an ascending id vector.
struct Skeleton {
  std::vector<int> ids;
  std::map<int, std::vector<int>> parents;
  std::map<int, std::vector<int>> siblings;  // bidirected neighbours
  std::map<int, int> topo_pos;

  explicit Skeleton(const Admg& admg) {
    for (const Variable& v : admg.vars) {
      ids.push_back(v.id);
      parents[v.id] = v.parents;
      siblings[v.id];
    }
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 1; i < ids.size(); ++i)
      if (ids[i] == ids[i - 1]) throw Error("duplicate variable id in graph");
    for (auto [a, b] : admg.bidirected) {
      if (!contains(ids, a) || !contains(ids, b))
        throw UnknownVariable("bidirected edge endpoint is not a graph variable");
      siblings[a].push_back(b);
      siblings[b].push_back(a);
    }
    for (auto& [v, s] : siblings) {
      std::sort(s.begin(), s.end());
      s.erase(std::unique(s.begin(), s.end()), s.end());
    }

    std::map<int, int> out_deg;
    std::map<int, std::vector<int>> children;
    for (int v : ids) out_deg[v] = 0;
    for (int v : ids)
      for (int p : parents[v]) {
        if (!contains(ids, p))
          throw UnknownVariable("parent id is not a graph variable");
        children[p].push_back(v);
        ++out_deg[v];
      }
    std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
    for (int v : ids)
      if (out_deg[v] == 0) ready.push(v);
    std::vector<int> order;
    while (!ready.empty()) {
      const int v = ready.top();
      ready.pop();
      topo_pos[v] = static_cast<int>(order.size());
      order.push_back(v);
      for (int c : children[v])
        if (--out_deg[c] == 0) ready.push(c);
    }
    if (order.size() != ids.size())
      throw CyclicGraph("directed part of the graph contains a cycle");
  }

  // Ancestors of `seeds` inside the subgraph induced on `subset` (result
  // includes the seeds themselves).
  std::vector<int> ancestors_in(const std::vector<int>& subset,
                                const std::vector<int>& seeds) const {
    std::vector<int> stack, out;
    for (int s : seeds)
      if (contains(subset, s)) {
        stack.push_back(s);
        out.push_back(s);
      }
    std::sort(out.begin(), out.end());
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int p : parents.at(v))
        if (contains(subset, p) && !contains(out, p)) {
          out.insert(std::lower_bound(out.begin(), out.end(), p), p);
          stack.push_back(p);
        }
    }
    return out;
  }

  // Bidirected-connected components of the subgraph induced on `subset`,
  // listed by their smallest member.
  std::vector<std::vector<int>> districts(const std::vector<int>& subset) const {
    std::vector<std::vector<int>> out;
    std::vector<int> seen;
    for (int start : subset) {
      if (contains(seen, start)) continue;
      std::vector<int> comp{start}, stack{start};
      while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int s : siblings.at(v))
          if (contains(subset, s) && !contains(comp, s)) {
            comp.insert(std::lower_bound(comp.begin(), comp.end(), s), s);
            stack.push_back(s);
          }
      }
      for (int v : comp) seen.insert(std::lower_bound(seen.begin(), seen.end(), v), v);
      out.push_back(std::move(comp));
    }
    return out;
  }

  std::vector<int> topo_sorted(std::vector<int> subset) const {
    std::sort(subset.begin(), subset.end(),
              [&](int a, int b) { return topo_pos.at(a) < topo_pos.at(b); });
    return subset;
  }
};

// Post-intervention factor of a district T inside the ancestral set A: the
// product over T of each variable's conditional on all its topological
// predecessors within A.
EstimandPtr district_factor(const Skeleton& sk, const std::vector<int>& T,
                            const std::vector<int>& A) {
  std::vector<EstimandPtr> terms;
  for (int v : sk.topo_sorted(T)) {
    std::vector<int> pred;
    for (int u : A)
      if (sk.topo_pos.at(u) < sk.topo_pos.at(v)) pred.push_back(u);
    terms.push_back(est_prob({v}, pred));
  }
  return est_product(std::move(terms));
}

// Identification subroutine: extract the factor of component C from the
// factor Q of the superset T, or report the (C, T) witness when impossible.
bool identify_component(const Skeleton& sk, std::vector<int> C, std::vector<int> T,
                        EstimandPtr Q, EstimandPtr& out, Hedge& hedge) {
  for (;;) {
    const std::vector<int> A2 = sk.ancestors_in(T, C);
    if (A2 == C) {
      out = est_sum(set_minus(T, C), std::move(Q));
      return true;
    }
    if (A2 == T) {
      hedge.component = C;
      hedge.district = T;
      return false;
    }
    EstimandPtr Qa = est_sum(set_minus(T, A2), std::move(Q));
    const std::vector<int> T2 = [&] {
      for (const std::vector<int>& d : sk.districts(A2))
        if (contains(d, C.front())) return d;
      throw Error("component vanished from its own ancestral set");
    }();
    // Within the ancestral margin A2 the factor of district T2 is a product
    // of ratios of nested tail sums, one per member, in topological order.
    std::vector<EstimandPtr> terms;
    for (int v : sk.topo_sorted(T2)) {
      std::vector<int> after, from;
      for (int u : A2) {
        if (sk.topo_pos.at(u) > sk.topo_pos.at(v)) after.push_back(u);
        if (sk.topo_pos.at(u) >= sk.topo_pos.at(v)) from.push_back(u);
      }
      terms.push_back(
          est_ratio(est_sum(after, Qa), est_sum(from, Qa)));
    }
    Q = est_product(std::move(terms));
    T = T2;
  }
}

}  // namespace

IdentifyResult identify(const Admg& admg, const Query& query) {
  const Skeleton sk(admg);

  std::vector<int> Y = query.targets;
  std::sort(Y.begin(), Y.end());
  std::vector<int> X;
  for (auto [v, s] : query.interventions) X.push_back(v);
  std::sort(X.begin(), X.end());
  for (int v : Y)
    if (!contains(sk.ids, v)) throw UnknownVariable("query target is not in the graph");
  for (int v : X)
    if (!contains(sk.ids, v))
      throw UnknownVariable("intervention variable is not in the graph");
  if (!set_and(Y, X).empty())
    throw Error("a variable cannot be both a target and an intervention");

  IdentifyResult result;

  const std::vector<int> A = sk.ancestors_in(sk.ids, Y);
  const std::vector<int> Xa = set_and(X, A);
  if (Xa.empty()) {
    // No intervention influences the targets; the answer is observational.
    result.estimand = simplify_estimand(est_prob(Y));
    return result;
  }

  const std::vector<int> D = sk.ancestors_in(set_minus(A, Xa), Y);
  std::vector<EstimandPtr> pieces;
  for (const std::vector<int>& Dj : sk.districts(D)) {
    std::vector<int> T = [&] {
      for (const std::vector<int>& d : sk.districts(A))
        if (contains(d, Dj.front())) return d;
      throw Error("component not found in any district");
    }();
    EstimandPtr Q = district_factor(sk, T, A);
    EstimandPtr piece;
    Hedge hedge;
    if (!identify_component(sk, Dj, T, std::move(Q), piece, hedge)) {
      result.hedge = hedge;
      return result;
    }
    pieces.push_back(std::move(piece));
  }

  EstimandPtr expr = est_sum(set_minus(D, Y), est_product(std::move(pieces)));

  // Any free variable that is neither a target nor an intervention is a
  // context the expression happens to be constant in; average it out so the
  // result mentions exactly the query variables.
  std::vector<int> leftovers;
  std::vector<int> keep = Y;
  for (int v : X) keep.push_back(v);
  std::sort(keep.begin(), keep.end());
  for (int v : free_vars(expr))
    if (!contains(keep, v)) leftovers.push_back(v);
  if (!leftovers.empty())
    expr = est_sum(leftovers, est_product({est_prob(leftovers), std::move(expr)}));

  result.estimand = simplify_estimand(expr);
  return result;
}

}  // namespace causalem
