#include <algorithm>

#include "causalem/causal.hpp"

namespace causalem {

Factor interventional_query(const Cbn& cbn, const Query& query) {
  const CausalDiagram& g = cbn.diagram();
  validate_query(g, query);

  std::vector<std::pair<int, int>> fixed = query.interventions;
  std::sort(fixed.begin(), fixed.end());
  std::vector<int> fixed_ids;
  for (auto [v, s] : fixed) fixed_ids.push_back(v);

  // Truncated factorization: the intervened variables lose their CPTs and
  // enter every remaining factor at their forced states.
  std::vector<Factor> factors;
  for (int v = 0; v < g.size(); ++v) {
    if (std::binary_search(fixed_ids.begin(), fixed_ids.end(), v)) continue;
    factors.push_back(factor_restrict(cpt_factor(g, cbn.cpt(v)), fixed));
  }

  std::vector<int> targets = query.targets;
  std::sort(targets.begin(), targets.end());
  std::vector<std::vector<int>> scopes;
  for (const Factor& f : factors) scopes.push_back(f.scope);
  const EliminationOrder order = min_fill_order_scopes(scopes, targets);
  double log_scale = 0.0;
  Factor out = eliminate_scaled(factors, order, {}, &log_scale);
  factor_normalize(out);
  return out;
}

Factor interventional_table(const Cbn& cbn, const std::vector<int>& targets,
                            const std::vector<int>& do_vars) {
  const CausalDiagram& g = cbn.diagram();
  Factor out;
  out.scope = do_vars;
  out.scope.insert(out.scope.end(), targets.begin(), targets.end());
  std::sort(out.scope.begin(), out.scope.end());
  if (std::adjacent_find(out.scope.begin(), out.scope.end()) != out.scope.end())
    throw Error("intervention and target sets overlap");
  for (int v : out.scope) out.card.push_back(g.var(v).cardinality);
  std::size_t cells = 1;
  for (int c : out.card) cells *= static_cast<std::size_t>(c);
  out.values.assign(cells, 0.0);
  const std::vector<std::size_t> strides = row_major_strides(out.card);

  std::vector<int> sorted_do = do_vars;
  std::sort(sorted_do.begin(), sorted_do.end());
  std::vector<int> ddig(sorted_do.size(), 0);
  for (;;) {
    Query q;
    q.targets = targets;
    for (std::size_t i = 0; i < sorted_do.size(); ++i)
      q.interventions.push_back({sorted_do[i], ddig[i]});
    const Factor slice = interventional_query(cbn, q);

    std::size_t base = 0;
    for (std::size_t i = 0; i < sorted_do.size(); ++i)
      base += static_cast<std::size_t>(ddig[i]) *
              strides[static_cast<std::size_t>(out.scope_pos(sorted_do[i]))];
    std::vector<int> tdig(slice.scope.size(), 0);
    for (std::size_t f = 0; f < slice.values.size(); ++f) {
      std::size_t idx = base;
      for (std::size_t i = 0; i < slice.scope.size(); ++i)
        idx += static_cast<std::size_t>(tdig[i]) *
               strides[static_cast<std::size_t>(out.scope_pos(slice.scope[i]))];
      out.values[idx] = slice.values[f];
      for (std::size_t d = slice.scope.size(); d-- > 0;) {
        if (++tdig[d] < slice.card[d]) break;
        tdig[d] = 0;
      }
    }

    std::size_t d = sorted_do.size();
    while (d-- > 0) {
      if (++ddig[d] < g.var(sorted_do[d]).cardinality) break;
      ddig[d] = 0;
    }
    if (d == static_cast<std::size_t>(-1)) break;
  }
  return out;
}

}  // namespace causalem
