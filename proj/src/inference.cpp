#include "causalem/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace causalem {

namespace {

// Rescale threshold for intermediate tables. High enough that the product of
// two checked tables cannot flush to zero (1e-150 squared is still a normal
// double); rescaling multiplies by a power of two, so it is lossless.
constexpr double kUnderflowFloor = 1e-150;

std::size_t checked_cell_count(const std::vector<int>& card) {
  std::size_t n = 1;
  for (int c : card) {
    if (c < 1) throw Error("factor cardinality must be >= 1");
    if (n > (std::size_t{1} << 40) / static_cast<std::size_t>(c))
      throw TooLarge("factor would exceed 2^40 cells");
    n *= static_cast<std::size_t>(c);
  }
  return n;
}

}  // namespace

Factor Factor::unit() {
  Factor f;
  f.values = {1.0};
  return f;
}

int Factor::scope_pos(int var) const {
  auto it = std::lower_bound(scope.begin(), scope.end(), var);
  if (it == scope.end() || *it != var) return -1;
  return static_cast<int>(it - scope.begin());
}

double Factor::at(const std::vector<int>& states) const {
  if (states.size() != scope.size())
    throw Error("Factor::at needs one state per scope variable");
  std::size_t idx = 0;
  std::vector<std::size_t> st = row_major_strides(card);
  for (std::size_t i = 0; i < scope.size(); ++i) {
    if (states[i] < 0 || states[i] >= card[i])
      throw StateOutOfRange("state " + std::to_string(states[i]) +
                            " outside domain of variable " + std::to_string(scope[i]));
    idx += static_cast<std::size_t>(states[i]) * st[i];
  }
  return values[idx];
}

std::vector<std::size_t> row_major_strides(const std::vector<int>& card) {
  std::vector<std::size_t> st(card.size());
  std::size_t acc = 1;
  for (std::size_t i = card.size(); i-- > 0;) {
    st[i] = acc;
    acc *= static_cast<std::size_t>(card[i]);
  }
  return st;
}

Factor factor_product(const Factor& a, const Factor& b) {
  Factor out;
  // Merge scopes ascending, checking shared cardinalities.
  std::size_t ia = 0, ib = 0;
  while (ia < a.scope.size() || ib < b.scope.size()) {
    if (ib == b.scope.size() || (ia < a.scope.size() && a.scope[ia] < b.scope[ib])) {
      out.scope.push_back(a.scope[ia]);
      out.card.push_back(a.card[ia]);
      ++ia;
    } else if (ia == a.scope.size() || b.scope[ib] < a.scope[ia]) {
      out.scope.push_back(b.scope[ib]);
      out.card.push_back(b.card[ib]);
      ++ib;
    } else {
      if (a.card[ia] != b.card[ib])
        throw CardinalityMismatch("variable " + std::to_string(a.scope[ia]) +
                                  " has cardinality " + std::to_string(a.card[ia]) +
                                  " vs " + std::to_string(b.card[ib]));
      out.scope.push_back(a.scope[ia]);
      out.card.push_back(a.card[ia]);
      ++ia;
      ++ib;
    }
  }
  const std::size_t n = checked_cell_count(out.card);
  out.values.assign(n, 0.0);

  const std::vector<std::size_t> sa = row_major_strides(a.card);
  const std::vector<std::size_t> sb = row_major_strides(b.card);
  const std::size_t dims = out.scope.size();
  // Per output dimension: stride into each operand (0 when absent).
  std::vector<std::size_t> da(dims, 0), db(dims, 0);
  for (std::size_t i = 0; i < dims; ++i) {
    int pa = a.scope_pos(out.scope[i]);
    int pb = b.scope_pos(out.scope[i]);
    if (pa >= 0) da[i] = sa[pa];
    if (pb >= 0) db[i] = sb[pb];
  }
  // Odometer walk over the output, tracking both source offsets.
  std::vector<int> digit(dims, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    out.values[flat] = a.values[oa] * b.values[ob];
    for (std::size_t d = dims; d-- > 0;) {
      if (++digit[d] < out.card[d]) {
        oa += da[d];
        ob += db[d];
        break;
      }
      digit[d] = 0;
      oa -= da[d] * static_cast<std::size_t>(out.card[d] - 1);
      ob -= db[d] * static_cast<std::size_t>(out.card[d] - 1);
    }
  }
  return out;
}

Factor factor_marginalize(const Factor& f, const std::vector<int>& drop) {
  for (int v : drop)
    if (f.scope_pos(v) < 0)
      throw UnknownVariable("cannot marginalize variable " + std::to_string(v) +
                            ": not in factor scope");
  Factor out;
  for (std::size_t i = 0; i < f.scope.size(); ++i) {
    if (std::find(drop.begin(), drop.end(), f.scope[i]) != drop.end()) continue;
    out.scope.push_back(f.scope[i]);
    out.card.push_back(f.card[i]);
  }
  out.values.assign(checked_cell_count(out.card), 0.0);
  const std::vector<std::size_t> so = row_major_strides(out.card);
  const std::size_t dims = f.scope.size();
  std::vector<std::size_t> dout(dims, 0);
  for (std::size_t i = 0; i < dims; ++i) {
    int p = out.scope_pos(f.scope[i]);
    if (p >= 0) dout[i] = so[p];
  }
  std::vector<int> digit(dims, 0);
  std::size_t oo = 0;
  for (std::size_t flat = 0; flat < f.values.size(); ++flat) {
    out.values[oo] += f.values[flat];
    for (std::size_t d = dims; d-- > 0;) {
      if (++digit[d] < f.card[d]) {
        oo += dout[d];
        break;
      }
      digit[d] = 0;
      oo -= dout[d] * static_cast<std::size_t>(f.card[d] - 1);
    }
  }
  return out;
}

Factor factor_restrict(const Factor& f,
                       const std::vector<std::pair<int, int>>& assignment) {
  // Ignore assignments to variables outside the scope; restricting is used
  // with whole-row evidence maps.
  std::vector<int> pos;
  std::vector<int> state;
  for (auto [v, s] : assignment) {
    int p = f.scope_pos(v);
    if (p < 0) continue;
    if (s < 0 || s >= f.card[p])
      throw StateOutOfRange("evidence state " + std::to_string(s) +
                            " outside domain of variable " + std::to_string(v));
    pos.push_back(p);
    state.push_back(s);
  }
  if (pos.empty()) return f;

  Factor out;
  const std::vector<std::size_t> sf = row_major_strides(f.card);
  std::size_t base = 0;
  std::vector<bool> fixed(f.scope.size(), false);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    fixed[pos[i]] = true;
    base += static_cast<std::size_t>(state[i]) * sf[pos[i]];
  }
  std::vector<std::size_t> keep_stride;
  for (std::size_t i = 0; i < f.scope.size(); ++i) {
    if (fixed[i]) continue;
    out.scope.push_back(f.scope[i]);
    out.card.push_back(f.card[i]);
    keep_stride.push_back(sf[i]);
  }
  out.values.assign(checked_cell_count(out.card), 0.0);
  const std::size_t dims = out.scope.size();
  std::vector<int> digit(dims, 0);
  std::size_t off = base;
  for (std::size_t flat = 0; flat < out.values.size(); ++flat) {
    out.values[flat] = f.values[off];
    for (std::size_t d = dims; d-- > 0;) {
      if (++digit[d] < out.card[d]) {
        off += keep_stride[d];
        break;
      }
      digit[d] = 0;
      off -= keep_stride[d] * static_cast<std::size_t>(out.card[d] - 1);
    }
  }
  return out;
}

void factor_normalize(Factor& f) {
  double total = 0.0;
  for (double v : f.values) total += v;
  if (total <= 0.0) return;
  for (double& v : f.values) v /= total;
}

Factor cpt_factor(const CausalDiagram& diagram, const Cpt& cpt) {
  const Variable& child = diagram.var(cpt.child);
  Factor f;
  f.scope = cpt.parents;
  f.scope.push_back(cpt.child);
  std::sort(f.scope.begin(), f.scope.end());
  for (int v : f.scope) f.card.push_back(diagram.var(v).cardinality);
  f.values.assign(checked_cell_count(f.card), 0.0);

  // CPT layout: parent configurations row-major (ascending parent ids),
  // child state fastest. Walk the factor and pull from that layout.
  const std::size_t dims = f.scope.size();
  std::vector<std::size_t> cpt_stride(dims, 0);
  std::size_t acc = static_cast<std::size_t>(child.cardinality);
  for (std::size_t i = cpt.parents.size(); i-- > 0;) {
    int p = f.scope_pos(cpt.parents[i]);
    cpt_stride[p] = acc;
    acc *= static_cast<std::size_t>(diagram.var(cpt.parents[i]).cardinality);
  }
  cpt_stride[f.scope_pos(cpt.child)] = 1;

  std::vector<int> digit(dims, 0);
  std::size_t src = 0;
  for (std::size_t flat = 0; flat < f.values.size(); ++flat) {
    f.values[flat] = cpt.values[src];
    for (std::size_t d = dims; d-- > 0;) {
      if (++digit[d] < f.card[d]) {
        src += cpt_stride[d];
        break;
      }
      digit[d] = 0;
      src -= cpt_stride[d] * static_cast<std::size_t>(f.card[d] - 1);
    }
  }
  return f;
}

std::string dump_factor(const Factor& f, const CausalDiagram& diagram) {
  std::ostringstream out;
  for (std::size_t i = 0; i < f.scope.size(); ++i)
    out << (i ? "\t" : "") << diagram.var(f.scope[i]).name;
  out << (f.scope.empty() ? "value\n" : "\tvalue\n");
  std::vector<int> digit(f.scope.size(), 0);
  for (std::size_t flat = 0; flat < f.values.size(); ++flat) {
    for (std::size_t i = 0; i < digit.size(); ++i) out << digit[i] << "\t";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", f.values[flat]);
    out << buf << "\n";
    for (std::size_t d = digit.size(); d-- > 0;) {
      if (++digit[d] < f.card[d]) break;
      digit[d] = 0;
    }
  }
  return out.str();
}

EliminationOrder min_fill_order_scopes(const std::vector<std::vector<int>>& scopes,
                                       const std::vector<int>& keep) {
  // Interaction graph: clique per scope.
  std::set<int> nodes;
  for (const auto& s : scopes) nodes.insert(s.begin(), s.end());
  std::map<int, std::set<int>> adj;
  for (int v : nodes) adj[v];
  for (const auto& s : scopes)
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = i + 1; j < s.size(); ++j) {
        adj[s[i]].insert(s[j]);
        adj[s[j]].insert(s[i]);
      }

  std::set<int> keep_set(keep.begin(), keep.end());
  std::vector<int> cand;
  for (int v : nodes)
    if (!keep_set.count(v)) cand.push_back(v);

  EliminationOrder out;
  out.induced_width = 0;
  std::set<int> remaining(cand.begin(), cand.end());
  while (!remaining.empty()) {
    int best = -1;
    long best_fill = std::numeric_limits<long>::max();
    for (int v : remaining) {
      const std::set<int>& nb = adj[v];
      long fill = 0;
      for (auto it = nb.begin(); it != nb.end(); ++it) {
        auto jt = it;
        for (++jt; jt != nb.end(); ++jt)
          if (!adj[*it].count(*jt)) ++fill;
      }
      if (fill < best_fill || (fill == best_fill && v < best)) {
        best = v;
        best_fill = fill;
      }
    }
    const std::set<int> nb = adj[best];
    out.induced_width = std::max(out.induced_width, static_cast<int>(nb.size()));
    for (auto it = nb.begin(); it != nb.end(); ++it) {
      adj[*it].erase(best);
      auto jt = it;
      for (++jt; jt != nb.end(); ++jt) {
        adj[*it].insert(*jt);
        adj[*jt].insert(*it);
      }
    }
    adj.erase(best);
    remaining.erase(best);
    out.order.push_back(best);
  }
  return out;
}

EliminationOrder min_fill_order(const CausalDiagram& diagram,
                                const std::vector<int>& keep) {
  for (int v : keep) diagram.var(v);
  std::vector<std::vector<int>> scopes;
  for (const Variable& v : diagram.variables()) {
    std::vector<int> s = v.parents;
    s.push_back(v.id);
    scopes.push_back(std::move(s));
  }
  return min_fill_order_scopes(scopes, keep);
}

Factor eliminate_scaled(const std::vector<Factor>& factors,
                        const EliminationOrder& order,
                        const std::vector<std::pair<int, int>>& evidence,
                        double* log_scale) {
  if (log_scale) *log_scale = 0.0;

  // Evidence first, so buckets see already-shrunk tables.
  std::vector<Factor> pool;
  pool.reserve(factors.size());
  for (const Factor& f : factors) pool.push_back(factor_restrict(f, evidence));

  std::map<int, std::size_t> order_pos;
  for (std::size_t i = 0; i < order.order.size(); ++i) {
    int v = order.order[i];
    if (order_pos.count(v))
      throw Error("elimination order repeats variable " + std::to_string(v));
    order_pos[v] = i;
  }
  for (auto [v, s] : evidence)
    if (order_pos.count(v))
      throw Error("evidence variable " + std::to_string(v) +
                  " also appears in the elimination order");

  std::vector<bool> covered(order.order.size(), false);
  for (const Factor& f : pool)
    for (int v : f.scope)
      if (auto it = order_pos.find(v); it != order_pos.end()) covered[it->second] = true;
  for (std::size_t i = 0; i < covered.size(); ++i)
    if (!covered[i])
      throw ScopeNotCovered("elimination order variable " +
                            std::to_string(order.order[i]) +
                            " appears in no factor");

  // Route each factor to the bucket of its earliest-eliminated variable.
  std::vector<std::vector<Factor>> buckets(order.order.size());
  std::vector<Factor> result_pool;
  auto route = [&](Factor&& f) {
    std::size_t best = order.order.size();
    for (int v : f.scope)
      if (auto it = order_pos.find(v); it != order_pos.end())
        best = std::min(best, it->second);
    if (best == order.order.size())
      result_pool.push_back(std::move(f));
    else
      buckets[best].push_back(std::move(f));
  };
  double scale = 0.0;
  auto rescale_if_tiny = [&scale](Factor& f) {
    double mx = 0.0;
    for (double v : f.values) mx = std::max(mx, v);
    if (mx > 0.0 && mx < kUnderflowFloor) {
      int e;
      std::frexp(mx, &e);
      const double up = std::ldexp(1.0, -e);
      for (double& v : f.values) v *= up;
      scale += e * 0.6931471805599453;  // ln(2^e) removed from the table
    }
  };

  // Rescale the inputs too: a lone tiny factor reaches the output without
  // passing through any product below.
  for (Factor& f : pool) rescale_if_tiny(f);
  for (Factor& f : pool) route(std::move(f));

  for (std::size_t i = 0; i < buckets.size(); ++i) {
    if (buckets[i].empty()) continue;  // unreachable given the covered check
    Factor prod = std::move(buckets[i][0]);
    for (std::size_t j = 1; j < buckets[i].size(); ++j) {
      prod = factor_product(prod, buckets[i][j]);
      rescale_if_tiny(prod);
    }
    route(factor_marginalize(prod, {order.order[i]}));
  }

  Factor result = Factor::unit();
  for (const Factor& f : result_pool) {
    result = factor_product(result, f);
    rescale_if_tiny(result);
  }
  if (log_scale) *log_scale = scale;
  return result;
}

Factor eliminate(const std::vector<Factor>& factors, const EliminationOrder& order,
                 const std::vector<std::pair<int, int>>& evidence) {
  double ls = 0.0;
  Factor f = eliminate_scaled(factors, order, evidence, &ls);
  if (ls != 0.0) {
    const double back = std::exp(ls);
    for (double& v : f.values) v *= back;
  }
  return f;
}

Factor marginal(const Cbn& cbn, const std::vector<int>& targets,
                const std::vector<std::pair<int, int>>& evidence) {
  const CausalDiagram& g = cbn.diagram();
  for (int t : targets)
    for (auto [e, s] : evidence)
      if (t == e)
        throw Error("variable " + std::to_string(t) +
                    " is both target and evidence");
  std::vector<Factor> factors;
  factors.reserve(cbn.cpts().size());
  for (const Cpt& c : cbn.cpts())
    factors.push_back(factor_restrict(cpt_factor(g, c), evidence));

  std::vector<std::vector<int>> scopes;
  for (const Factor& f : factors) scopes.push_back(f.scope);
  EliminationOrder order = min_fill_order_scopes(scopes, targets);

  Factor out = eliminate_scaled(factors, order, {}, nullptr);

  // Align scope with targets: a target absent from every restricted factor
  // (isolated after evidence) would be missing; that cannot happen for CPT
  // pools since every variable owns a factor.
  double total = 0.0;
  for (double v : out.values) total += v;
  if (total <= 0.0)
    throw ZeroProbabilityEvidence("evidence has probability 0");
  for (double& v : out.values) v /= total;
  return out;
}

Factor brute_force_marginal(const Cbn& cbn, const std::vector<int>& targets,
                            const std::vector<std::pair<int, int>>& evidence) {
  const CausalDiagram& g = cbn.diagram();
  const int n = g.size();
  std::size_t joint = 1;
  for (const Variable& v : g.variables()) {
    if (joint > (std::size_t{1} << 24) / static_cast<std::size_t>(v.cardinality))
      throw TooLarge("joint has more than 2^24 cells");
    joint *= static_cast<std::size_t>(v.cardinality);
  }

  Factor out;
  out.scope = targets;
  std::sort(out.scope.begin(), out.scope.end());
  for (int t : out.scope) out.card.push_back(g.var(t).cardinality);
  out.values.assign(checked_cell_count(out.card), 0.0);
  const std::vector<std::size_t> ost = row_major_strides(out.card);

  std::vector<int> fixed(n, -1);
  for (auto [v, s] : evidence) {
    if (s < 0 || s >= g.var(v).cardinality)
      throw StateOutOfRange("evidence state " + std::to_string(s) +
                            " outside domain of variable " + std::to_string(v));
    fixed[v] = s;
  }

  // Direct CPT lookups, no factor machinery: this is the oracle.
  std::vector<int> cfg(n, 0);
  for (;;) {
    bool consistent = true;
    for (int v = 0; v < n && consistent; ++v)
      if (fixed[v] >= 0 && cfg[v] != fixed[v]) consistent = false;
    if (consistent) {
      double p = 1.0;
      for (int v = 0; v < n; ++v) {
        const Cpt& c = cbn.cpt(v);
        std::size_t row = 0;
        for (int par : c.parents)
          row = row * static_cast<std::size_t>(g.var(par).cardinality) +
                static_cast<std::size_t>(cfg[par]);
        p *= c.values[row * static_cast<std::size_t>(g.var(v).cardinality) +
                      static_cast<std::size_t>(cfg[v])];
      }
      std::size_t idx = 0;
      for (std::size_t i = 0; i < out.scope.size(); ++i)
        idx += static_cast<std::size_t>(cfg[out.scope[i]]) * ost[i];
      out.values[idx] += p;
    }
    int d = n - 1;
    while (d >= 0 && ++cfg[d] == g.var(d).cardinality) cfg[d--] = 0;
    if (d < 0) break;
  }

  double total = 0.0;
  for (double v : out.values) total += v;
  if (total <= 0.0)
    throw ZeroProbabilityEvidence("evidence has probability 0");
  for (double& v : out.values) v /= total;
  return out;
}

}  // namespace causalem
