#include <cmath>
#include <map>
#include <vector>

#include "causalem/inference.hpp"
#include "causalem/rng.hpp"
#include "causalem/sampling.hpp"
#include "doctest.h"

using namespace causalem;

namespace {

// Test-local oracle: the full joint by direct enumeration of CPT entries,
// sharing no code with the factor machinery under test.
struct JointOracle {
  const Cbn* cbn;
  std::vector<int> cards;

  explicit JointOracle(const Cbn& model) : cbn(&model) {
    for (const Variable& v : model.diagram().variables())
      cards.push_back(v.cardinality);
  }

  double prob(const std::vector<int>& full) const {
    double p = 1.0;
    for (int v = 0; v < cbn->diagram().size(); ++v) {
      const Cpt& c = cbn->cpt(v);
      std::size_t row = 0;
      for (int par : c.parents)
        row = row * static_cast<std::size_t>(cbn->diagram().var(par).cardinality) +
              static_cast<std::size_t>(full[par]);
      p *= c.values[row * static_cast<std::size_t>(cards[v]) +
                    static_cast<std::size_t>(full[v])];
    }
    return p;
  }

  // P(targets | evidence) by summing the full joint.
  std::map<std::vector<int>, double> conditional(
      const std::vector<int>& targets,
      const std::vector<std::pair<int, int>>& evidence) const {
    std::map<std::vector<int>, double> out;
    const int n = static_cast<int>(cards.size());
    std::vector<int> full(n, 0);
    double mass = 0.0;
    for (;;) {
      bool ok = true;
      for (auto [v, s] : evidence)
        if (full[v] != s) ok = false;
      if (ok) {
        const double p = prob(full);
        std::vector<int> key;
        for (int t : targets) key.push_back(full[t]);
        out[key] += p;
        mass += p;
      }
      int d = n - 1;
      for (; d >= 0; --d) {
        if (++full[d] < cards[d]) break;
        full[d] = 0;
      }
      if (d < 0) break;
    }
    for (auto& [k, v] : out) v /= mass;
    return out;
  }
};

Cbn random_binary_cbn(int n_vars, std::uint64_t seed) {
  // Random DAG over ids 0..n-1 with edges i->j only for i<j, plus a couple of
  // latent roots when the draw allows.
  Rng rng(seed);
  std::vector<Variable> vars;
  const int n_latent = rng.uniform_int(3);
  const int n_obs = n_vars - n_latent;
  for (int i = 0; i < n_obs; ++i) {
    Variable v;
    v.id = i;
    v.name = "V" + std::to_string(i);
    v.cardinality = 2;
    v.kind = VarKind::Observed;
    for (int p = 0; p < i; ++p)
      if (rng.uniform01() < 0.4) v.parents.push_back(p);
    vars.push_back(std::move(v));
  }
  for (int u = 0; u < n_latent; ++u) {
    Variable v;
    v.id = n_obs + u;
    v.name = "U" + std::to_string(u);
    v.cardinality = 2;
    v.kind = VarKind::Latent;
    vars.push_back(std::move(v));
  }
  // Give each latent two distinct observed children.
  for (int u = 0; u < n_latent && n_obs >= 2; ++u) {
    const int a = rng.uniform_int(n_obs);
    int b = rng.uniform_int(n_obs);
    if (b == a) b = (a + 1) % n_obs;
    vars[a].parents.push_back(n_obs + u);
    vars[b].parents.push_back(n_obs + u);
  }
  for (Variable& v : vars) {
    std::sort(v.parents.begin(), v.parents.end());
    v.parents.erase(std::unique(v.parents.begin(), v.parents.end()),
                    v.parents.end());
  }
  CausalDiagram g(std::move(vars));
  return random_cpts(g, 2, 2, rng.next_u64());
}

Factor make_factor(std::vector<int> scope, std::vector<int> card,
                   std::vector<double> values) {
  Factor f;
  f.scope = std::move(scope);
  f.card = std::move(card);
  f.values = std::move(values);
  return f;
}

}  // namespace

TEST_SUITE("inference") {
  TEST_CASE("factor product is commutative and broadcast-correct") {
    const Factor a = make_factor({0, 2}, {2, 2}, {1, 2, 3, 4});
    const Factor b = make_factor({1, 2}, {3, 2}, {1, 2, 3, 4, 5, 6});
    const Factor ab = factor_product(a, b);
    const Factor ba = factor_product(b, a);
    REQUIRE(ab.scope == std::vector<int>{0, 1, 2});
    CHECK(ab.scope == ba.scope);
    for (std::size_t i = 0; i < ab.values.size(); ++i)
      CHECK(ab.values[i] == doctest::Approx(ba.values[i]).epsilon(1e-12));
    // Spot value: (V0=1,V1=2,V2=0) -> a(1,0)=3, b(2,0)=5.
    CHECK(ab.at({1, 2, 0}) == doctest::Approx(15.0));
  }

  TEST_CASE("factor product is associative") {
    const Factor a = make_factor({0}, {2}, {0.3, 0.7});
    const Factor b = make_factor({1}, {2}, {0.9, 0.1});
    const Factor c = make_factor({0, 1}, {2, 2}, {1, 2, 3, 4});
    const Factor l = factor_product(factor_product(a, b), c);
    const Factor r = factor_product(a, factor_product(b, c));
    for (std::size_t i = 0; i < l.values.size(); ++i)
      CHECK(l.values[i] == doctest::Approx(r.values[i]).epsilon(1e-12));
  }

  TEST_CASE("marginalization order does not matter") {
    const Factor f = make_factor({0, 1, 2}, {2, 3, 2},
                                 {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    const Factor a = factor_marginalize(factor_marginalize(f, {0}), {2});
    const Factor b = factor_marginalize(factor_marginalize(f, {2}), {0});
    REQUIRE(a.scope == std::vector<int>{1});
    for (std::size_t i = 0; i < a.values.size(); ++i)
      CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-12));
    CHECK_THROWS_AS(factor_marginalize(f, {7}), UnknownVariable);
  }

  TEST_CASE("restrict drops dimensions and ignores absent variables") {
    const Factor f = make_factor({1, 4}, {2, 3}, {1, 2, 3, 4, 5, 6});
    const Factor r = factor_restrict(f, {{4, 2}, {9, 0}});
    REQUIRE(r.scope == std::vector<int>{1});
    CHECK(r.values == std::vector<double>{3, 6});
    CHECK_THROWS_AS(factor_restrict(f, {{4, 3}}), StateOutOfRange);
  }

  TEST_CASE("cpt_factor matches direct indexing") {
    const Cbn cbn = random_binary_cbn(5, 77);
    const JointOracle oracle(cbn);
    for (int v = 0; v < cbn.diagram().size(); ++v) {
      const Factor f = cpt_factor(cbn.diagram(), cbn.cpt(v));
      std::vector<int> family = cbn.cpt(v).parents;
      family.push_back(v);
      std::sort(family.begin(), family.end());
      CHECK(f.scope == family);
    }
  }

  TEST_CASE("marginal equals enumeration on random networks") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
      const Cbn cbn = random_binary_cbn(4 + static_cast<int>(seed % 5), seed);
      const int n = cbn.diagram().size();
      Rng rng(seed * 13 + 1);
      std::vector<int> targets{rng.uniform_int(n)};
      if (n > 2) {
        const int second = rng.uniform_int(n);
        if (second != targets[0]) targets.push_back(second);
      }
      std::sort(targets.begin(), targets.end());
      std::vector<std::pair<int, int>> evidence;
      for (int v = 0; v < n; ++v)
        if (std::find(targets.begin(), targets.end(), v) == targets.end() &&
            rng.uniform01() < 0.2)
          evidence.push_back({v, rng.uniform_int(2)});

      const JointOracle oracle(cbn);
      const auto expect = oracle.conditional(targets, evidence);
      Factor got;
      try {
        got = marginal(cbn, targets, evidence);
      } catch (const ZeroProbabilityEvidence&) {
        continue;  // the oracle would have divided by zero too
      }
      REQUIRE(got.scope == targets);
      for (const auto& [key, p] : expect) {
        std::vector<int> states(targets.size());
        for (std::size_t i = 0; i < targets.size(); ++i)
          states[got.scope_pos(targets[i])] = key[i];
        CHECK(got.at(states) == doctest::Approx(p).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("brute force marginal agrees with elimination") {
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
      const Cbn cbn = random_binary_cbn(6, seed);
      const Factor a = marginal(cbn, {0, 2});
      const Factor b = brute_force_marginal(cbn, {0, 2});
      REQUIRE(a.values.size() == b.values.size());
      for (std::size_t i = 0; i < a.values.size(); ++i)
        CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-11));
    }
  }

  TEST_CASE("brute force refuses oversized joints") {
    std::vector<Variable> vars;
    for (int i = 0; i < 25; ++i) {
      Variable v;
      v.id = i;
      v.name = "V" + std::to_string(i);
      v.cardinality = 2;
      v.kind = VarKind::Observed;
      vars.push_back(v);
    }
    const CausalDiagram g(std::move(vars));
    const Cbn cbn = random_cpts(g, 2, 2, 1);
    CHECK_THROWS_AS(brute_force_marginal(cbn, {0}), TooLarge);
  }

  TEST_CASE("min fill keeps chain width small") {
    GenSpec spec;
    spec.family = Family::Chain;
    spec.n = 9;
    const CausalDiagram g = generate_structure(spec);
    const EliminationOrder ord = min_fill_order(g, {8});
    CHECK(ord.induced_width <= 4);
    GenSpec dspec;
    dspec.family = Family::Diamond;
    dspec.n = 9;
    const CausalDiagram d = generate_structure(dspec);
    CHECK(min_fill_order(d, {8}).induced_width <= 6);
  }

  TEST_CASE("eliminate reports uncovered variables") {
    const Factor f = make_factor({0}, {2}, {0.5, 0.5});
    EliminationOrder ord;
    ord.order = {0, 1};
    CHECK_THROWS_AS(eliminate({f}, ord, {}), ScopeNotCovered);
  }

  TEST_CASE("underflow rescue keeps tiny masses finite") {
    // Product of twenty factors at 1e-250 each underflows doubles by ~1e-5000;
    // the scaled elimination must still produce the correct log value.
    std::vector<Factor> factors;
    std::vector<std::vector<int>> scopes;
    for (int i = 0; i < 20; ++i) {
      factors.push_back(make_factor({i}, {2}, {1e-250, 1e-250}));
      scopes.push_back({i});
    }
    const EliminationOrder ord = min_fill_order_scopes(scopes, {});
    double log_scale = 0.0;
    const Factor out = eliminate_scaled(factors, ord, {}, &log_scale);
    REQUIRE(out.scope.empty());
    const double log_value = std::log(out.values[0]) + log_scale;
    // True value: prod over 20 vars of (2 * 1e-250) summed out.
    const double expect = 20.0 * std::log(2e-250);
    CHECK(log_value == doctest::Approx(expect).epsilon(1e-9));
  }

  TEST_CASE("zero probability evidence is reported") {
    std::vector<Variable> vars;
    for (int i = 0; i < 2; ++i) {
      Variable v;
      v.id = i;
      v.name = i == 0 ? "A" : "B";
      v.cardinality = 2;
      v.kind = VarKind::Observed;
      if (i == 1) v.parents = {0};
      vars.push_back(v);
    }
    const CausalDiagram g(std::move(vars));
    Cpt a;
    a.child = 0;
    a.values = {1.0, 0.0};  // A = 1 never happens
    Cpt b;
    b.child = 1;
    b.parents = {0};
    b.values = {0.5, 0.5, 0.5, 0.5};
    const Cbn cbn(g, {a, b});
    CHECK_THROWS_AS(marginal(cbn, {1}, {{0, 1}}), ZeroProbabilityEvidence);
    CHECK_THROWS_AS(brute_force_marginal(cbn, {1}, {{0, 1}}),
                    ZeroProbabilityEvidence);
  }
}
