#include "causalem/learning.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <thread>
#include <unordered_map>

#include "causalem/inference.hpp"
#include "causalem/rng.hpp"

namespace causalem {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kChunkRows = 256;  // fixed accumulation granularity; results are
                                 // merged in chunk order so any thread count
                                 // produces bit-identical totals

struct DistinctRows {
  std::vector<std::vector<int>> cfg;  // first-occurrence order
  std::vector<double> weight;
};

DistinctRows dedupe(const Dataset& data) {
  DistinctRows out;
  std::unordered_map<std::string, int> index;
  const int nc = data.n_cols();
  std::string key;
  for (int r = 0; r < data.n_rows(); ++r) {
    key.clear();
    for (int c = 0; c < nc; ++c) {
      key += static_cast<char>(data.at(r, c) & 0xff);
      key += static_cast<char>((data.at(r, c) >> 8) & 0xff);
    }
    auto [it, fresh] = index.try_emplace(key, static_cast<int>(out.cfg.size()));
    if (fresh) {
      std::vector<int> row(nc);
      for (int c = 0; c < nc; ++c) row[c] = data.at(r, c);
      out.cfg.push_back(std::move(row));
      out.weight.push_back(1.0);
    } else {
      out.weight[it->second] += 1.0;
    }
  }
  return out;
}

// Index map from every cell of a table over big_scope to the corresponding
// cell of a table over small_scope (subset, both ascending, row-major).
std::vector<std::uint32_t> project_map(const std::vector<int>& big_scope,
                                       const std::vector<int>& big_card,
                                       const std::vector<int>& small_scope,
                                       const std::vector<int>& small_card) {
  std::size_t big_size = 1;
  for (int c : big_card) big_size *= static_cast<std::size_t>(c);
  const std::vector<std::size_t> small_stride = row_major_strides(small_card);
  const std::size_t dims = big_scope.size();
  std::vector<std::size_t> contrib(dims, 0);
  for (std::size_t i = 0; i < dims; ++i) {
    auto it = std::lower_bound(small_scope.begin(), small_scope.end(), big_scope[i]);
    if (it != small_scope.end() && *it == big_scope[i])
      contrib[i] = small_stride[it - small_scope.begin()];
  }
  std::vector<std::uint32_t> map(big_size);
  std::vector<int> digit(dims, 0);
  std::size_t idx = 0;
  for (std::size_t flat = 0; flat < big_size; ++flat) {
    map[flat] = static_cast<std::uint32_t>(idx);
    for (std::size_t d = dims; d-- > 0;) {
      if (++digit[d] < big_card[d]) {
        idx += contrib[d];
        break;
      }
      digit[d] = 0;
      idx -= contrib[d] * static_cast<std::size_t>(big_card[d] - 1);
    }
  }
  return map;
}

// One CPT whose family touches at least one latent variable. The same
// (base + gather) indexing serves both reading factor values out of the CPT
// and scattering posterior mass back into the expected-count table.
struct TemplateSpec {
  int var = 0;
  std::vector<int> scope;  // ascending latent ids
  std::vector<int> card;
  std::size_t size = 1;
  std::vector<std::uint32_t> gather;                    // flat -> latent cpt offset
  std::vector<std::pair<int, std::size_t>> obs_stride;  // (data column, cpt stride)
  int bucket = -1;
};

struct BucketSpec {
  int var = 0;  // latent eliminated here
  std::vector<int> scope, card;
  std::size_t size = 1;
  std::vector<int> templates;
  std::vector<int> children;
  int parent = -1;
  std::vector<int> sep_scope, sep_card;
  std::size_t sep_size = 1;
  std::vector<std::uint32_t> to_sep;                  // bucket flat -> own sep flat
  std::vector<std::vector<std::uint32_t>> tmpl_map;   // per template
  std::vector<std::vector<std::uint32_t>> child_map;  // per child (their sep)
  std::vector<std::vector<std::uint32_t>> post_map;   // per template, for posteriors
};

struct ChunkAccum {
  double ll = 0.0;
  std::vector<std::vector<double>> counts;  // per latent-touching table
};

struct Workspace {
  std::vector<std::vector<double>> tvals;  // per template
  std::vector<std::vector<double>> prod;   // per bucket
  std::vector<std::vector<double>> lam;    // per bucket (own sep)
  std::vector<std::vector<double>> down;   // per bucket (own sep)
  std::vector<double> tmp, post;
};

// Precompiled E-step for one (diagram, dataset-column-layout) pair: factor
// scopes, the latent bucket tree, and every index map are fixed; only CPT
// values flow through per row.
class EStepEngine {
 public:
  EStepEngine(const CausalDiagram& g, const Dataset& data) : g_(&g) {
    const int n = g.size();
    col_of_.assign(n, -1);
    for (int c = 0; c < data.n_cols(); ++c) col_of_[data.var_ids[c]] = c;

    for (int v = 0; v < n; ++v) {
      const Variable& var = g.var(v);
      std::vector<int> family = var.parents;
      family.push_back(v);  // unsorted tail is fine: strides are positional
      bool any_latent = false;
      for (int f : family)
        if (g.var(f).kind == VarKind::Latent) any_latent = true;
      if (!any_latent) {
        obs_only_.push_back(v);
        continue;
      }
      TemplateSpec t;
      t.var = v;
      // CPT strides: parents ascending then child fastest.
      std::vector<std::size_t> stride(family.size());
      std::size_t acc = 1;
      for (std::size_t i = family.size(); i-- > 0;) {
        stride[i] = acc;
        acc *= static_cast<std::size_t>(g.var(family[i]).cardinality);
      }
      std::map<int, std::size_t> latent_stride;
      for (std::size_t i = 0; i < family.size(); ++i) {
        if (g.var(family[i]).kind == VarKind::Latent)
          latent_stride[family[i]] = stride[i];
        else
          t.obs_stride.push_back({col_of_[family[i]], stride[i]});
      }
      for (auto& [lv, st] : latent_stride) {
        t.scope.push_back(lv);
        t.card.push_back(g.var(lv).cardinality);
        t.size *= static_cast<std::size_t>(g.var(lv).cardinality);
      }
      t.gather.resize(t.size);
      std::vector<int> digit(t.scope.size(), 0);
      for (std::size_t flat = 0; flat < t.size; ++flat) {
        std::size_t idx = 0;
        for (std::size_t d = 0; d < t.scope.size(); ++d)
          idx += static_cast<std::size_t>(digit[d]) * latent_stride[t.scope[d]];
        t.gather[flat] = static_cast<std::uint32_t>(idx);
        for (std::size_t d = t.scope.size(); d-- > 0;) {
          if (++digit[d] < t.card[d]) break;
          digit[d] = 0;
        }
      }
      templates_.push_back(std::move(t));
    }

    build_tree();
    table_of_.assign(n, -1);
    for (const TemplateSpec& t : templates_)
      if (table_of_[t.var] < 0) {
        table_of_[t.var] = static_cast<int>(latent_tables_.size());
        latent_tables_.push_back(t.var);
      }
  }

  const std::vector<int>& obs_only_vars() const { return obs_only_; }
  const std::vector<int>& latent_tables() const { return latent_tables_; }

  ChunkAccum make_accum(const Cbn& cbn) const {
    ChunkAccum a;
    a.counts.resize(latent_tables_.size());
    for (std::size_t i = 0; i < latent_tables_.size(); ++i)
      a.counts[i].assign(cbn.cpt(latent_tables_[i]).values.size(), 0.0);
    return a;
  }

  Workspace make_workspace() const {
    Workspace w;
    w.tvals.resize(templates_.size());
    for (std::size_t i = 0; i < templates_.size(); ++i)
      w.tvals[i].resize(templates_[i].size);
    w.prod.resize(buckets_.size());
    w.lam.resize(buckets_.size());
    w.down.resize(buckets_.size());
    std::size_t mx = 1;
    for (std::size_t i = 0; i < buckets_.size(); ++i) {
      w.prod[i].resize(buckets_[i].size);
      w.lam[i].resize(buckets_[i].sep_size);
      w.down[i].resize(buckets_[i].sep_size);
      mx = std::max(mx, buckets_[i].size);
    }
    w.tmp.resize(mx);
    std::size_t mt = 1;
    for (const TemplateSpec& t : templates_) mt = std::max(mt, t.size);
    w.post.resize(mt);
    return w;
  }

  // Processes distinct rows [lo, hi); accumulates latent-family expected
  // counts and the latent contribution to the log-likelihood. accumulate can
  // be disabled for pure likelihood evaluation.
  void run_rows(const Cbn& cbn, const DistinctRows& rows, int lo, int hi,
                bool accumulate, ChunkAccum& acc, Workspace& w) const {
    for (int r = lo; r < hi; ++r) {
      const std::vector<int>& cfg = rows.cfg[r];
      const double weight = rows.weight[r];

      // Evidence-restricted factors over the latent scopes.
      for (std::size_t ti = 0; ti < templates_.size(); ++ti) {
        const TemplateSpec& t = templates_[ti];
        std::size_t base = 0;
        for (auto [col, st] : t.obs_stride)
          base += static_cast<std::size_t>(cfg[col]) * st;
        const std::vector<double>& cpt = cbn.cpt(t.var).values;
        std::vector<double>& tv = w.tvals[ti];
        for (std::size_t j = 0; j < t.size; ++j) tv[j] = cpt[base + t.gather[j]];
      }

      double log_mass = 0.0;
      bool dead = false;

      // Upward pass: children precede parents in bucket order.
      for (std::size_t b = 0; b < buckets_.size() && !dead; ++b) {
        const BucketSpec& bk = buckets_[b];
        std::vector<double>& prod = w.prod[b];
        std::fill(prod.begin(), prod.end(), 1.0);
        for (std::size_t i = 0; i < bk.templates.size(); ++i) {
          const std::vector<double>& tv = w.tvals[bk.templates[i]];
          const std::vector<std::uint32_t>& m = bk.tmpl_map[i];
          for (std::size_t j = 0; j < bk.size; ++j) prod[j] *= tv[m[j]];
        }
        for (std::size_t i = 0; i < bk.children.size(); ++i) {
          const std::vector<double>& lv = w.lam[bk.children[i]];
          const std::vector<std::uint32_t>& m = bk.child_map[i];
          for (std::size_t j = 0; j < bk.size; ++j) prod[j] *= lv[m[j]];
        }
        std::vector<double>& lam = w.lam[b];
        std::fill(lam.begin(), lam.end(), 0.0);
        for (std::size_t j = 0; j < bk.size; ++j) lam[bk.to_sep[j]] += prod[j];
        double sigma = 0.0;
        for (double x : lam) sigma += x;
        if (sigma <= 0.0) {
          dead = true;
          break;
        }
        const double inv = 1.0 / sigma;
        for (double& x : lam) x *= inv;
        log_mass += std::log(sigma);
      }

      if (dead) {
        acc.ll = kNegInf;
        continue;
      }
      acc.ll += weight * log_mass;

      if (!accumulate) continue;

      // Downward pass (reverse order): parents are processed before their
      // children, so down messages are ready when needed.
      for (std::size_t b = buckets_.size(); b-- > 0;) {
        const BucketSpec& bk = buckets_[b];
        const bool has_down = bk.parent >= 0;
        // Down message to each child: everything at this bucket except that
        // child's upward message.
        for (std::size_t c = 0; c < bk.children.size(); ++c) {
          std::fill(w.tmp.begin(), w.tmp.begin() + bk.size, 1.0);
          for (std::size_t i = 0; i < bk.templates.size(); ++i) {
            const std::vector<double>& tv = w.tvals[bk.templates[i]];
            const std::vector<std::uint32_t>& m = bk.tmpl_map[i];
            for (std::size_t j = 0; j < bk.size; ++j) w.tmp[j] *= tv[m[j]];
          }
          for (std::size_t i = 0; i < bk.children.size(); ++i) {
            if (i == c) continue;
            const std::vector<double>& lv = w.lam[bk.children[i]];
            const std::vector<std::uint32_t>& m = bk.child_map[i];
            for (std::size_t j = 0; j < bk.size; ++j) w.tmp[j] *= lv[m[j]];
          }
          if (has_down) {
            const std::vector<double>& dv = w.down[b];
            for (std::size_t j = 0; j < bk.size; ++j) w.tmp[j] *= dv[bk.to_sep[j]];
          }
          std::vector<double>& dc = w.down[bk.children[c]];
          std::fill(dc.begin(), dc.end(), 0.0);
          const std::vector<std::uint32_t>& m = bk.child_map[c];
          for (std::size_t j = 0; j < bk.size; ++j) dc[m[j]] += w.tmp[j];
          double s = 0.0;
          for (double x : dc) s += x;
          if (s > 0.0)
            for (double& x : dc) x /= s;
        }
        // Belief at this bucket, then family posteriors.
        std::vector<double>& belief = w.prod[b];  // reuse the upward product
        if (has_down) {
          const std::vector<double>& dv = w.down[b];
          for (std::size_t j = 0; j < bk.size; ++j) belief[j] *= dv[bk.to_sep[j]];
        }
        for (std::size_t i = 0; i < bk.templates.size(); ++i) {
          const TemplateSpec& t = templates_[bk.templates[i]];
          std::fill(w.post.begin(), w.post.begin() + t.size, 0.0);
          const std::vector<std::uint32_t>& m = bk.post_map[i];
          for (std::size_t j = 0; j < bk.size; ++j) w.post[m[j]] += belief[j];
          double s = 0.0;
          for (std::size_t j = 0; j < t.size; ++j) s += w.post[j];
          if (s <= 0.0) continue;
          const double inv = weight / s;
          std::size_t base = 0;
          for (auto [col, st] : t.obs_stride)
            base += static_cast<std::size_t>(cfg[col]) * st;
          std::vector<double>& cnt = acc.counts[table_of_[t.var]];
          for (std::size_t j = 0; j < t.size; ++j)
            cnt[base + t.gather[j]] += inv * w.post[j];
        }
      }
    }
  }

  int table_index(int var) const { return table_of_[var]; }

 private:
  void build_tree() {
    std::vector<std::vector<int>> scopes;
    for (const TemplateSpec& t : templates_) scopes.push_back(t.scope);
    const EliminationOrder order = min_fill_order_scopes(scopes, {});
    std::map<int, int> pos;
    for (std::size_t i = 0; i < order.order.size(); ++i)
      pos[order.order[i]] = static_cast<int>(i);

    buckets_.resize(order.order.size());
    for (std::size_t i = 0; i < order.order.size(); ++i)
      buckets_[i].var = order.order[i];

    // Route templates, then simulate message flow to fix bucket scopes.
    std::vector<std::vector<int>> scope_sets(buckets_.size());
    for (std::size_t ti = 0; ti < templates_.size(); ++ti) {
      int best = std::numeric_limits<int>::max();
      for (int v : templates_[ti].scope) best = std::min(best, pos[v]);
      templates_[ti].bucket = best;
      buckets_[best].templates.push_back(static_cast<int>(ti));
      for (int v : templates_[ti].scope) scope_sets[best].push_back(v);
    }
    for (std::size_t b = 0; b < buckets_.size(); ++b) {
      BucketSpec& bk = buckets_[b];
      std::sort(scope_sets[b].begin(), scope_sets[b].end());
      scope_sets[b].erase(std::unique(scope_sets[b].begin(), scope_sets[b].end()),
                          scope_sets[b].end());
      bk.scope = scope_sets[b];
      for (int v : bk.scope) bk.sep_scope.push_back(v);
      bk.sep_scope.erase(std::find(bk.sep_scope.begin(), bk.sep_scope.end(), bk.var));
      if (!bk.sep_scope.empty()) {
        int best = std::numeric_limits<int>::max();
        for (int v : bk.sep_scope) best = std::min(best, pos[v]);
        bk.parent = best;
        buckets_[best].children.push_back(static_cast<int>(b));
        for (int v : bk.sep_scope) scope_sets[best].push_back(v);
      }
    }
    for (BucketSpec& bk : buckets_) {
      for (int v : bk.scope) bk.card.push_back(g_->var(v).cardinality);
      bk.size = 1;
      for (int c : bk.card) bk.size *= static_cast<std::size_t>(c);
      for (int v : bk.sep_scope) bk.sep_card.push_back(g_->var(v).cardinality);
      bk.sep_size = 1;
      for (int c : bk.sep_card) bk.sep_size *= static_cast<std::size_t>(c);
      bk.to_sep = project_map(bk.scope, bk.card, bk.sep_scope, bk.sep_card);
      for (int ti : bk.templates) {
        bk.tmpl_map.push_back(
            project_map(bk.scope, bk.card, templates_[ti].scope, templates_[ti].card));
        bk.post_map.push_back(bk.tmpl_map.back());
      }
      for (int cb : bk.children)
        bk.child_map.push_back(project_map(bk.scope, bk.card, buckets_[cb].sep_scope,
                                           buckets_[cb].sep_card));
    }
  }

  const CausalDiagram* g_;
  std::vector<int> col_of_;
  std::vector<TemplateSpec> templates_;
  std::vector<BucketSpec> buckets_;
  std::vector<int> obs_only_;
  std::vector<int> latent_tables_;  // vars with a latent-touching family
  std::vector<int> table_of_;
};

// Complete-data expected counts for fully-observed families; independent of
// the parameters, so computed once per fit.
std::vector<std::vector<double>> static_counts(const CausalDiagram& g,
                                               const std::vector<int>& vars,
                                               const DistinctRows& rows,
                                               const std::vector<int>& col_of) {
  std::vector<std::vector<double>> out(vars.size());
  std::vector<std::vector<std::pair<int, std::size_t>>> strides(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const Variable& v = g.var(vars[i]);
    std::vector<int> family = v.parents;
    family.push_back(v.id);
    std::size_t size = 1;
    std::vector<std::size_t> st(family.size());
    for (std::size_t f = family.size(); f-- > 0;) {
      st[f] = size;
      size *= static_cast<std::size_t>(g.var(family[f]).cardinality);
    }
    out[i].assign(size, 0.0);
    for (std::size_t f = 0; f < family.size(); ++f)
      strides[i].push_back({col_of[family[f]], st[f]});
  }
  for (std::size_t r = 0; r < rows.cfg.size(); ++r)
    for (std::size_t i = 0; i < vars.size(); ++i) {
      std::size_t idx = 0;
      for (auto [col, st] : strides[i])
        idx += static_cast<std::size_t>(rows.cfg[r][col]) * st;
      out[i][idx] += rows.weight[r];
    }
  return out;
}

double observed_family_ll(const Cbn& cbn, const std::vector<int>& vars,
                          const std::vector<std::vector<double>>& counts) {
  double ll = 0.0;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const std::vector<double>& theta = cbn.cpt(vars[i]).values;
    for (std::size_t j = 0; j < counts[i].size(); ++j)
      if (counts[i][j] > 0.0) ll += counts[i][j] * std::log(theta[j]);
  }
  return ll;
}

void check_data(const CausalDiagram& g, const Dataset& data) {
  const std::vector<int> obs = g.observed_ids();
  if (data.var_ids != obs)
    throw Error("dataset columns do not match the diagram's observed variables");
  for (std::size_t c = 0; c < obs.size(); ++c)
    if (data.cards[c] != g.var(obs[c]).cardinality)
      throw CardinalityMismatch("dataset cardinality for '" + g.var(obs[c]).name +
                                "' is " + std::to_string(data.cards[c]) +
                                ", diagram says " +
                                std::to_string(g.var(obs[c]).cardinality));
  for (int r = 0; r < data.n_rows(); ++r)
    for (int c = 0; c < data.n_cols(); ++c)
      if (data.at(r, c) < 0 || data.at(r, c) >= data.cards[c])
        throw StateOutOfRange("dataset state out of range at row " + std::to_string(r));
}

Cbn m_step(const CausalDiagram& g, const EStepEngine& engine,
           const std::vector<std::vector<double>>& obs_counts,
           const std::vector<std::vector<double>>& lat_counts, double pseudocount) {
  std::vector<Cpt> cpts(g.size());
  for (int v = 0; v < g.size(); ++v) {
    const Variable& var = g.var(v);
    Cpt c;
    c.child = v;
    c.parents = var.parents;
    const std::vector<double>* counts = nullptr;
    for (std::size_t i = 0; i < engine.obs_only_vars().size(); ++i)
      if (engine.obs_only_vars()[i] == v) counts = &obs_counts[i];
    if (!counts) counts = &lat_counts[engine.table_index(v)];
    const int cs = var.cardinality;
    c.values.resize(counts->size());
    const std::size_t rows = counts->size() / cs;
    for (std::size_t r = 0; r < rows; ++r) {
      double denom = 0.0;
      for (int s = 0; s < cs; ++s) denom += (*counts)[r * cs + s] + pseudocount;
      for (int s = 0; s < cs; ++s)
        c.values[r * cs + s] = ((*counts)[r * cs + s] + pseudocount) / denom;
    }
    cpts[v] = std::move(c);
  }
  return Cbn(g, std::move(cpts));
}

// One E sweep: returns the latent LL part and fills lat_counts (when
// accumulate). Parallel over fixed chunks, merged in chunk order.
double e_sweep(const EStepEngine& engine, const Cbn& cbn, const DistinctRows& rows,
               bool accumulate, int threads,
               std::vector<std::vector<double>>* lat_counts) {
  const int n_rows = static_cast<int>(rows.cfg.size());
  const int n_chunks = (n_rows + kChunkRows - 1) / kChunkRows;
  std::vector<ChunkAccum> chunks(static_cast<std::size_t>(std::max(n_chunks, 0)));
  for (auto& c : chunks) c = engine.make_accum(cbn);

  auto work = [&](ChunkAccum& acc, Workspace& w, int chunk) {
    const int lo = chunk * kChunkRows;
    const int hi = std::min(n_rows, lo + kChunkRows);
    engine.run_rows(cbn, rows, lo, hi, accumulate, acc, w);
  };

  const int use_threads = std::max(1, std::min(threads, n_chunks));
  if (use_threads <= 1) {
    Workspace w = engine.make_workspace();
    for (int c = 0; c < n_chunks; ++c) work(chunks[c], w, c);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < use_threads; ++t)
      pool.emplace_back([&]() {
        Workspace w = engine.make_workspace();
        for (;;) {
          const int c = next.fetch_add(1);
          if (c >= n_chunks) break;
          work(chunks[c], w, c);
        }
      });
    for (auto& th : pool) th.join();
  }

  double ll = 0.0;
  for (int c = 0; c < n_chunks; ++c) ll += chunks[c].ll;
  if (accumulate && lat_counts) {
    for (std::size_t i = 0; i < lat_counts->size(); ++i)
      std::fill((*lat_counts)[i].begin(), (*lat_counts)[i].end(), 0.0);
    for (int c = 0; c < n_chunks; ++c)
      for (std::size_t i = 0; i < chunks[c].counts.size(); ++i)
        for (std::size_t j = 0; j < chunks[c].counts[i].size(); ++j)
          (*lat_counts)[i][j] += chunks[c].counts[i][j];
  }
  return ll;
}

Cbn random_init(const CausalDiagram& g, std::uint64_t init_seed) {
  const Rng master(init_seed);
  std::vector<Cpt> cpts(g.size());
  std::vector<double> alpha, column;
  for (int v = 0; v < g.size(); ++v) {
    const Variable& var = g.var(v);
    Cpt c;
    c.child = v;
    c.parents = var.parents;
    std::size_t rows = 1;
    for (int p : c.parents) rows *= static_cast<std::size_t>(g.var(p).cardinality);
    c.values.resize(rows * static_cast<std::size_t>(var.cardinality));
    alpha.assign(var.cardinality, 1.0);  // uniform on the simplex
    for (std::size_t r = 0; r < rows; ++r) {
      Rng rng = master.derive("init-column", static_cast<std::uint64_t>(v), r);
      rng.dirichlet(alpha, column);
      for (int s = 0; s < var.cardinality; ++s)
        c.values[r * var.cardinality + s] = column[s];
    }
    cpts[v] = std::move(c);
  }
  return Cbn(g, std::move(cpts));
}

}  // namespace

double log_likelihood(const Cbn& cbn, const Dataset& data) {
  check_data(cbn.diagram(), data);
  if (data.n_rows() == 0) return 0.0;
  const DistinctRows rows = dedupe(data);
  EStepEngine engine(cbn.diagram(), data);
  std::vector<int> col_of(cbn.diagram().size(), -1);
  for (int c = 0; c < data.n_cols(); ++c) col_of[data.var_ids[c]] = c;
  const auto obs_counts =
      static_counts(cbn.diagram(), engine.obs_only_vars(), rows, col_of);
  const double lat = e_sweep(engine, cbn, rows, false, 1, nullptr);
  return lat + observed_family_ll(cbn, engine.obs_only_vars(), obs_counts);
}

int free_parameter_count(const CausalDiagram& diagram) {
  int p = 0;
  for (const Variable& v : diagram.variables()) {
    int rows = 1;
    for (int par : v.parents) rows *= diagram.var(par).cardinality;
    p += (v.cardinality - 1) * rows;
  }
  return p;
}

double bic_score(double log_likelihood, const Cbn& cbn, int m) {
  if (m < 1) throw DegenerateData("bic_score needs m >= 1");
  return -2.0 * log_likelihood +
         static_cast<double>(free_parameter_count(cbn.diagram())) *
             std::log(static_cast<double>(m));
}

EmFitResult em_fit(const CausalDiagram& diagram, const Dataset& data, int k,
                   std::uint64_t init_seed, const EmConfig& config) {
  if (data.n_rows() == 0) throw DegenerateData("em_fit on an empty dataset");
  const CausalDiagram g = diagram.with_latent_cardinality(k);
  check_data(g, data);
  const DistinctRows rows = dedupe(data);
  const EStepEngine engine(g, data);
  std::vector<int> col_of(g.size(), -1);
  for (int c = 0; c < data.n_cols(); ++c) col_of[data.var_ids[c]] = c;
  const auto obs_counts = static_counts(g, engine.obs_only_vars(), rows, col_of);

  EmFitResult out;

  if (g.latent_ids().empty()) {
    // Complete data: the M-step normalization of the observed counts is the
    // exact maximum-likelihood model already.
    std::vector<std::vector<double>> none;
    out.cbn = m_step(g, engine, obs_counts, none, config.pseudocount);
    out.log_likelihood = observed_family_ll(out.cbn, engine.obs_only_vars(), obs_counts);
    out.iterations = 1;
    out.ll_trace = {out.log_likelihood};
    return out;
  }

  Cbn cbn = random_init(g, init_seed);
  std::vector<std::vector<double>> lat_counts(engine.latent_tables().size());
  for (std::size_t i = 0; i < lat_counts.size(); ++i)
    lat_counts[i].assign(cbn.cpt(engine.latent_tables()[i]).values.size(), 0.0);

  double prev = kNegInf;
  for (int t = 0;; ++t) {
    const double lat_ll =
        e_sweep(engine, cbn, rows, true, config.threads, &lat_counts);
    const double ll =
        lat_ll + observed_family_ll(cbn, engine.obs_only_vars(), obs_counts);
    out.ll_trace.push_back(ll);
    if (t > 0 && std::isfinite(ll) &&
        (ll - prev) / (1.0 + std::fabs(ll)) < config.ll_rel_tolerance)
      break;
    if (t + 1 >= config.max_iterations) break;
    prev = ll;
    cbn = m_step(g, engine, obs_counts, lat_counts, config.pseudocount);
  }
  out.cbn = std::move(cbn);
  out.log_likelihood = out.ll_trace.back();
  out.iterations = static_cast<int>(out.ll_trace.size());
  return out;
}

std::vector<int> default_k_schedule(const CausalDiagram& diagram,
                                    const Dataset& data, const EmConfig& config) {
  (void)data;
  int k_max = config.k_max;
  if (k_max <= 0) {
    int d_max = 2;
    for (const Variable& v : diagram.variables())
      if (v.kind == VarKind::Observed) d_max = std::max(d_max, v.cardinality);
    k_max = 2 * d_max * d_max;
  }
  std::vector<int> ks;
  const int step = std::max(1, config.k_step);
  for (int k = 2; k <= k_max; k += step) ks.push_back(k);
  if (ks.empty()) ks.push_back(2);
  return ks;
}

LearnResult em4ci_learn(const CausalDiagram& diagram, const Dataset& data,
                        const std::vector<int>& k_schedule, const EmConfig& config,
                        std::ostream* log) {
  if (data.n_rows() == 0) throw DegenerateData("em4ci_learn on an empty dataset");
  for (std::size_t i = 1; i < k_schedule.size(); ++i)
    if (k_schedule[i] <= k_schedule[i - 1])
      throw Error("k schedule must be strictly increasing");

  LearnResult result;
  const Rng master(config.seed);

  if (diagram.latent_ids().empty()) {
    EmFitResult fit = em_fit(diagram, data, 2, 0, config);
    result.cbn = std::move(fit.cbn);
    result.log_likelihood = fit.log_likelihood;
    result.bic = bic_score(result.log_likelihood, result.cbn, data.n_rows());
    result.k_lrn = 0;
    result.restarts_used = 1;
    result.diagnostics.push_back({0, 0, result.log_likelihood, fit.iterations});
    return result;
  }

  bool have_incumbent = false;
  for (int k : k_schedule) {
    // Best of `restarts` random initializations at this cardinality.
    EmFitResult best;
    best.log_likelihood = kNegInf;
    bool have_best = false;
    for (int r = 0; r < config.restarts; ++r) {
      const std::uint64_t init_seed =
          master.derive("em-init", static_cast<std::uint64_t>(k),
                        static_cast<std::uint64_t>(r))
              .next_u64();
      EmFitResult fit = em_fit(diagram, data, k, init_seed, config);
      if (log) {
        for (std::size_t t = 0; t < fit.ll_trace.size(); ++t) {
          char line[96];
          std::snprintf(line, sizeof(line), "%d,%d,%zu,%.9f\n", r, k, t + 1,
                        fit.ll_trace[t]);
          (*log) << line;
        }
      }
      result.diagnostics.push_back({k, r, fit.log_likelihood, fit.iterations});
      ++result.restarts_used;
      if (!have_best || fit.log_likelihood > best.log_likelihood) {
        best = std::move(fit);
        have_best = true;
      }
    }
    result.ks_evaluated.push_back(k);
    const double bic = bic_score(best.log_likelihood, best.cbn, data.n_rows());
    // Adoption rule: ties adopt the newer (larger-k) candidate; the search
    // stops at the first strict increase.
    if (!have_incumbent || bic <= result.bic) {
      result.cbn = std::move(best.cbn);
      result.log_likelihood = best.log_likelihood;
      result.bic = bic;
      result.k_lrn = k;
      have_incumbent = true;
    } else {
      break;
    }
  }
  return result;
}

}  // namespace causalem
