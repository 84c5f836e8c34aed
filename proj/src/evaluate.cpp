#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "causalem/causal.hpp"

namespace causalem {

SparseJoint::SparseJoint(const Dataset& data) {
  var_ids_ = data.var_ids;
  cards_ = data.cards;
  std::map<std::vector<int>, int> seen;
  std::vector<int> row(data.n_cols());
  for (int r = 0; r < data.n_rows(); ++r) {
    for (int c = 0; c < data.n_cols(); ++c) row[c] = data.at(r, c);
    ++seen[row];
  }
  for (auto& [cfg, cnt] : seen) {
    configs_.push_back(cfg);
    counts_.push_back(cnt);
    total_ += cnt;
  }
}

namespace {

// ---------------------------------------------------------------------------
// Exact evaluation

struct ExactCtx {
  const Cbn* cbn;
  std::vector<int> env;                        // current state per var, -1 unset
  std::map<std::vector<int>, Factor> joints;   // cache keyed by scope

  const Factor& joint(const std::vector<int>& vars) {
    auto it = joints.find(vars);
    if (it == joints.end())
      it = joints.emplace(vars, marginal(*cbn, vars)).first;
    return it->second;
  }
};

double exact_eval(const EstimandExpr& e, ExactCtx& ctx) {
  switch (e.kind) {
    case EstimandExpr::Kind::Constant:
      return e.value;
    case EstimandExpr::Kind::Product: {
      double p = 1.0;
      for (const EstimandPtr& c : e.children) p *= exact_eval(*c, ctx);
      return p;
    }
    case EstimandExpr::Kind::Quotient: {
      const double den = exact_eval(*e.children[1], ctx);
      if (den == 0.0) return 0.0;
      return exact_eval(*e.children[0], ctx) / den;
    }
    case EstimandExpr::Kind::Sum: {
      const EstimandExpr& body = *e.children[0];
      std::vector<int> saved;
      for (int v : e.bound) saved.push_back(ctx.env[v]);
      double total = 0.0;
      std::vector<int> digit(e.bound.size(), 0);
      for (;;) {
        for (std::size_t i = 0; i < e.bound.size(); ++i)
          ctx.env[e.bound[i]] = digit[i];
        total += exact_eval(body, ctx);
        std::size_t d = e.bound.size();
        while (d-- > 0) {
          if (++digit[d] < ctx.cbn->diagram().var(e.bound[d]).cardinality) break;
          digit[d] = 0;
        }
        if (d == static_cast<std::size_t>(-1)) break;
      }
      for (std::size_t i = 0; i < e.bound.size(); ++i) ctx.env[e.bound[i]] = saved[i];
      return total;
    }
    case EstimandExpr::Kind::Prob: {
      std::vector<int> all = e.targets;
      all.insert(all.end(), e.given.begin(), e.given.end());
      std::sort(all.begin(), all.end());
      const Factor& ju = ctx.joint(all);
      std::vector<int> states(all.size());
      auto state_of = [&](int var, int pinned) {
        const int s = pinned >= 0 ? pinned : ctx.env[var];
        if (s < 0) throw Error("estimand evaluated with an unbound variable");
        return s;
      };
      for (std::size_t i = 0; i < e.targets.size(); ++i)
        states[ju.scope_pos(e.targets[i])] = state_of(e.targets[i], e.target_states[i]);
      for (std::size_t i = 0; i < e.given.size(); ++i)
        states[ju.scope_pos(e.given[i])] = state_of(e.given[i], e.given_states[i]);
      const double num = ju.at(states);
      if (e.given.empty()) return num;
      const Factor& jc = ctx.joint([&] {
        std::vector<int> g = e.given;
        std::sort(g.begin(), g.end());
        return g;
      }());
      std::vector<int> gstates(jc.scope.size());
      for (std::size_t i = 0; i < e.given.size(); ++i)
        gstates[jc.scope_pos(e.given[i])] = state_of(e.given[i], e.given_states[i]);
      const double den = jc.at(gstates);
      if (den == 0.0) return 0.0;
      return num / den;
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Plug-in evaluation: sparse relations over seen support

struct Rel {
  std::vector<int> vars;  // ascending ids
  std::map<std::vector<int>, double> rows;
};

std::vector<int> project_key(const std::vector<int>& from_vars,
                             const std::vector<int>& key,
                             const std::vector<int>& to_vars) {
  std::vector<int> out(to_vars.size());
  for (std::size_t i = 0; i < to_vars.size(); ++i) {
    const auto it =
        std::lower_bound(from_vars.begin(), from_vars.end(), to_vars[i]);
    out[i] = key[it - from_vars.begin()];
  }
  return out;
}

Rel rel_prob(const EstimandExpr& e, const SparseJoint& sj) {
  std::vector<int> free_c;
  for (std::size_t i = 0; i < e.given.size(); ++i)
    if (e.given_states[i] < 0) free_c.push_back(e.given[i]);
  std::sort(free_c.begin(), free_c.end());

  Rel out;
  for (std::size_t i = 0; i < e.targets.size(); ++i)
    if (e.target_states[i] < 0) out.vars.push_back(e.targets[i]);
  out.vars.insert(out.vars.end(), free_c.begin(), free_c.end());
  std::sort(out.vars.begin(), out.vars.end());

  auto col_of = [&](int var) {
    const auto it =
        std::lower_bound(sj.var_ids().begin(), sj.var_ids().end(), var);
    if (it == sj.var_ids().end() || *it != var)
      throw UnknownVariable("estimand mentions a variable absent from the data");
    return static_cast<int>(it - sj.var_ids().begin());
  };

  std::map<std::vector<int>, double> num, den;
  std::vector<int> nkey(out.vars.size()), dkey(free_c.size());
  for (std::size_t r = 0; r < sj.configs().size(); ++r) {
    const std::vector<int>& cfg = sj.configs()[r];
    const double w = sj.counts()[r];
    bool given_ok = true;
    for (std::size_t i = 0; i < e.given.size(); ++i)
      if (e.given_states[i] >= 0 && cfg[col_of(e.given[i])] != e.given_states[i])
        given_ok = false;
    if (!given_ok) continue;
    for (std::size_t i = 0; i < free_c.size(); ++i) dkey[i] = cfg[col_of(free_c[i])];
    den[dkey] += w;
    bool target_ok = true;
    for (std::size_t i = 0; i < e.targets.size(); ++i)
      if (e.target_states[i] >= 0 && cfg[col_of(e.targets[i])] != e.target_states[i])
        target_ok = false;
    if (!target_ok) continue;
    for (std::size_t i = 0; i < out.vars.size(); ++i)
      nkey[i] = cfg[col_of(out.vars[i])];
    num[nkey] += w;
  }
  for (auto& [key, n] : num) {
    const double d = den.at(project_key(out.vars, key, free_c));
    out.rows[key] = n / d;
  }
  return out;
}

// Natural join with a binary op; missing right-hand rows mean "no support".
template <class Op>
Rel rel_join(const Rel& a, const Rel& b, Op op) {
  Rel out;
  std::set_union(a.vars.begin(), a.vars.end(), b.vars.begin(), b.vars.end(),
                 std::back_inserter(out.vars));
  std::vector<int> shared;
  std::set_intersection(a.vars.begin(), a.vars.end(), b.vars.begin(), b.vars.end(),
                        std::back_inserter(shared));
  std::map<std::vector<int>, std::vector<const std::pair<const std::vector<int>, double>*>>
      index;
  for (const auto& row : b.rows)
    index[project_key(b.vars, row.first, shared)].push_back(&row);
  std::vector<int> key(out.vars.size());
  for (const auto& ra : a.rows) {
    const auto it = index.find(project_key(a.vars, ra.first, shared));
    if (it == index.end()) continue;
    for (const auto* rb : it->second) {
      const double v = op(ra.second, rb->second);
      if (v == 0.0) continue;
      for (std::size_t i = 0; i < out.vars.size(); ++i) {
        const auto pa = std::lower_bound(a.vars.begin(), a.vars.end(), out.vars[i]);
        if (pa != a.vars.end() && *pa == out.vars[i])
          key[i] = ra.first[pa - a.vars.begin()];
        else {
          const auto pb = std::lower_bound(b.vars.begin(), b.vars.end(), out.vars[i]);
          key[i] = rb->first[pb - b.vars.begin()];
        }
      }
      out.rows[key] += v;
    }
  }
  return out;
}

Rel rel_eval(const EstimandExpr& e, const SparseJoint& sj) {
  switch (e.kind) {
    case EstimandExpr::Kind::Constant: {
      Rel r;
      if (e.value != 0.0) r.rows[{}] = e.value;
      return r;
    }
    case EstimandExpr::Kind::Prob:
      return rel_prob(e, sj);
    case EstimandExpr::Kind::Product: {
      Rel acc = rel_eval(*e.children[0], sj);
      for (std::size_t i = 1; i < e.children.size(); ++i)
        acc = rel_join(acc, rel_eval(*e.children[i], sj),
                       [](double x, double y) { return x * y; });
      return acc;
    }
    case EstimandExpr::Kind::Quotient: {
      const Rel num = rel_eval(*e.children[0], sj);
      const Rel den = rel_eval(*e.children[1], sj);
      return rel_join(num, den, [](double x, double y) {
        return y == 0.0 ? 0.0 : x / y;
      });
    }
    case EstimandExpr::Kind::Sum: {
      const Rel child = rel_eval(*e.children[0], sj);
      Rel out;
      std::set_difference(child.vars.begin(), child.vars.end(), e.bound.begin(),
                          e.bound.end(), std::back_inserter(out.vars));
      // A bound variable the child never mentions multiplies the sum by its
      // number of states.
      double mult = 1.0;
      for (int v : e.bound)
        if (!std::binary_search(child.vars.begin(), child.vars.end(), v)) {
          const auto it =
              std::lower_bound(sj.var_ids().begin(), sj.var_ids().end(), v);
          if (it == sj.var_ids().end() || *it != v)
            throw UnknownVariable("sum binds a variable absent from the data");
          mult *= sj.cards()[it - sj.var_ids().begin()];
        }
      for (const auto& row : child.rows)
        out.rows[project_key(child.vars, row.first, out.vars)] += mult * row.second;
      return out;
    }
  }
  return Rel{};
}

std::vector<int> cards_for(const std::vector<int>& vars, const CausalDiagram& g) {
  std::vector<int> out;
  for (int v : vars) out.push_back(g.var(v).cardinality);
  return out;
}

}  // namespace

Factor eval_estimand_exact(const EstimandPtr& expr, const Cbn& cbn) {
  ExactCtx ctx;
  ctx.cbn = &cbn;
  ctx.env.assign(cbn.diagram().size(), -1);

  Factor out;
  out.scope = free_vars(expr);
  out.card = cards_for(out.scope, cbn.diagram());
  std::size_t cells = 1;
  for (int c : out.card) cells *= static_cast<std::size_t>(c);
  out.values.assign(cells, 0.0);

  std::vector<int> digit(out.scope.size(), 0);
  for (std::size_t flat = 0; flat < cells; ++flat) {
    for (std::size_t i = 0; i < out.scope.size(); ++i) ctx.env[out.scope[i]] = digit[i];
    out.values[flat] = exact_eval(*expr, ctx);
    std::size_t d = out.scope.size();
    while (d-- > 0) {
      if (++digit[d] < out.card[d]) break;
      digit[d] = 0;
    }
  }
  return out;
}

PluginResult eval_estimand_plugin(const EstimandPtr& expr, const Dataset& data) {
  if (data.n_rows() == 0) throw DegenerateData("plug-in evaluation of an empty dataset");
  const SparseJoint sj(data);
  const Rel rel = rel_eval(*expr, sj);

  PluginResult out;
  out.table.scope = free_vars(expr);
  for (int v : out.table.scope) {
    const auto it = std::lower_bound(sj.var_ids().begin(), sj.var_ids().end(), v);
    if (it == sj.var_ids().end() || *it != v)
      throw UnknownVariable("estimand mentions a variable absent from the data");
    out.table.card.push_back(sj.cards()[it - sj.var_ids().begin()]);
  }
  std::size_t cells = 1;
  for (int c : out.table.card) cells *= static_cast<std::size_t>(c);
  out.table.values.assign(cells, 0.0);
  if (rel.vars != out.table.scope)
    throw Error("plug-in relation scope does not match the free variables");

  const std::vector<std::size_t> strides = row_major_strides(out.table.card);
  double mass = 0.0;
  for (const auto& [key, v] : rel.rows) {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < key.size(); ++i)
      idx += static_cast<std::size_t>(key[i]) * strides[i];
    out.table.values[idx] = v;
    mass += std::fabs(v);
  }
  out.all_zero = mass == 0.0;
  return out;
}

void renormalize_over_targets(Factor& table, const std::vector<int>& targets) {
  std::vector<std::size_t> tpos;
  for (int t : targets) {
    const int p = table.scope_pos(t);
    if (p < 0) throw UnknownVariable("renormalization target is not in the table");
    tpos.push_back(static_cast<std::size_t>(p));
  }
  const std::vector<std::size_t> strides = row_major_strides(table.card);
  std::size_t t_cells = 1;
  for (std::size_t p : tpos) t_cells *= static_cast<std::size_t>(table.card[p]);
  if (t_cells == 0 || table.values.empty()) return;

  // Walk the non-target dims; for each slice, sum over target dims and scale.
  std::vector<std::size_t> opos;
  for (std::size_t p = 0; p < table.scope.size(); ++p)
    if (std::find(tpos.begin(), tpos.end(), p) == tpos.end()) opos.push_back(p);
  std::size_t o_cells = 1;
  for (std::size_t p : opos) o_cells *= static_cast<std::size_t>(table.card[p]);

  std::vector<int> odig(opos.size(), 0), tdig(tpos.size(), 0);
  for (std::size_t oc = 0; oc < o_cells; ++oc) {
    std::size_t base = 0;
    for (std::size_t i = 0; i < opos.size(); ++i)
      base += static_cast<std::size_t>(odig[i]) * strides[opos[i]];
    double total = 0.0;
    std::fill(tdig.begin(), tdig.end(), 0);
    for (std::size_t tc = 0; tc < t_cells; ++tc) {
      std::size_t idx = base;
      for (std::size_t i = 0; i < tpos.size(); ++i)
        idx += static_cast<std::size_t>(tdig[i]) * strides[tpos[i]];
      total += table.values[idx];
      for (std::size_t d = tpos.size(); d-- > 0;) {
        if (++tdig[d] < table.card[tpos[d]]) break;
        tdig[d] = 0;
      }
    }
    if (total > 0.0) {
      std::fill(tdig.begin(), tdig.end(), 0);
      for (std::size_t tc = 0; tc < t_cells; ++tc) {
        std::size_t idx = base;
        for (std::size_t i = 0; i < tpos.size(); ++i)
          idx += static_cast<std::size_t>(tdig[i]) * strides[tpos[i]];
        table.values[idx] /= total;
        for (std::size_t d = tpos.size(); d-- > 0;) {
          if (++tdig[d] < table.card[tpos[d]]) break;
          tdig[d] = 0;
        }
      }
    }
    for (std::size_t d = opos.size(); d-- > 0;) {
      if (++odig[d] < table.card[opos[d]]) break;
      odig[d] = 0;
    }
  }
}

double mad(const Factor& estimate, const Factor& truth) {
  if (estimate.scope != truth.scope || estimate.card != truth.card)
    throw ShapeMismatch("tables have different scopes or cardinalities");
  if (estimate.values.empty()) throw ShapeMismatch("empty tables have no mean deviation");
  double total = 0.0;
  for (std::size_t i = 0; i < estimate.values.size(); ++i)
    total += std::fabs(estimate.values[i] - truth.values[i]);
  return total / static_cast<double>(estimate.values.size());
}

}  // namespace causalem
