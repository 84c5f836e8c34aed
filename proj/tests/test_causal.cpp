#include <algorithm>
#include <cmath>
#include <vector>

#include "causalem/causal.hpp"
#include "causalem/sampling.hpp"
#include "doctest.h"

using namespace causalem;

namespace {

GenSpec spec_of(Family f, int n = 0) {
  GenSpec s;
  s.family = f;
  s.n = n;
  return s;
}

Dataset dataset_of(std::vector<int> var_ids, std::vector<int> cards,
                   std::vector<int> rows) {
  Dataset d;
  d.var_ids = std::move(var_ids);
  d.cards = std::move(cards);
  d.rows = std::move(rows);
  return d;
}

Factor make_factor(std::vector<int> scope, std::vector<int> card,
                   std::vector<double> values) {
  Factor f;
  f.scope = std::move(scope);
  f.card = std::move(card);
  f.values = std::move(values);
  return f;
}

// Interventional truth by enumeration of the truncated model, sharing nothing
// with interventional_query.
Factor truncated_enumeration(const Cbn& cbn, const std::vector<int>& targets,
                             const std::vector<std::pair<int, int>>& dos) {
  const CausalDiagram& g = cbn.diagram();
  const int n = g.size();
  std::vector<int> tg = targets;
  std::sort(tg.begin(), tg.end());
  Factor out;
  out.scope = tg;
  std::size_t cells = 1;
  for (int t : tg) {
    out.card.push_back(g.var(t).cardinality);
    cells *= static_cast<std::size_t>(g.var(t).cardinality);
  }
  out.values.assign(cells, 0.0);

  std::vector<int> full(n, 0);
  for (;;) {
    bool match = true;
    for (auto [v, s] : dos)
      if (full[v] != s) match = false;
    if (match) {
      double p = 1.0;
      for (int v = 0; v < n && p > 0.0; ++v) {
        bool intervened = false;
        for (auto [dv, ds] : dos)
          if (dv == v) intervened = true;
        if (intervened) continue;  // CPT dropped by the truncation
        const Cpt& c = cbn.cpt(v);
        std::size_t row = 0;
        for (int par : c.parents)
          row = row * static_cast<std::size_t>(g.var(par).cardinality) +
                static_cast<std::size_t>(full[par]);
        p *= c.values[row * g.var(v).cardinality + full[v]];
      }
      std::size_t idx = 0;
      for (std::size_t i = 0; i < tg.size(); ++i)
        idx = idx * out.card[i] + static_cast<std::size_t>(full[tg[i]]);
      out.values[idx] += p;
    }
    int d = n - 1;
    for (; d >= 0; --d) {
      if (++full[d] < g.var(d).cardinality) break;
      full[d] = 0;
    }
    if (d < 0) break;
  }
  double total = 0.0;
  for (double v : out.values) total += v;
  if (total > 0.0)
    for (double& v : out.values) v /= total;
  return out;
}

}  // namespace

TEST_SUITE("causal") {
  TEST_CASE("estimand text form round trips") {
    const CausalDiagram g = generate_structure(spec_of(Family::Model5));
    const int z2 = g.var_id("Z2"), x = g.var_id("X"), y = g.var_id("Y");
    const EstimandPtr e = est_sum(
        {z2}, est_product({est_prob({y}, {x, z2}), est_prob({z2})}));
    const std::string text = estimand_to_text(e, g);
    // Scopes print in ascending id order; Z2 is the root and so id 0.
    CHECK(text == "sum{Z2}( prob(Y|Z2,X) * prob(Z2) )");
    const EstimandPtr back = parse_estimand(text, g);
    CHECK(estimand_to_text(back, g) == text);
    CHECK(free_vars(back) == std::vector<int>{x, y});

    const EstimandPtr pinned =
        est_ratio(est_prob_at({{y, 1}}, {{x, -1}}), est_prob({x}));
    const std::string ptext = estimand_to_text(pinned, g);
    CHECK(ptext == "ratio(prob(Y=1|X), prob(X))");
    CHECK(estimand_to_text(parse_estimand(ptext, g), g) == ptext);
    CHECK(free_vars(pinned) == std::vector<int>{x});

    CHECK_THROWS_AS(parse_estimand("prob(Nope)", g), UnknownVariable);
    CHECK_THROWS_AS(parse_estimand("sum{X}(", g), ParseError);
    CHECK_THROWS_AS(parse_estimand("prob(Y||X)", g), ParseError);
  }

  TEST_CASE("sums bind lexically and shadow outer bindings") {
    const CausalDiagram g = generate_structure(spec_of(Family::Model5));
    const int x = g.var_id("X"), y = g.var_id("Y");
    // sum{X}( prob(Y|X) * sum{X}( prob(X) ) ): the inner sum closes over its
    // own X, the outer one closes over the conditional's X.
    const EstimandPtr inner = est_sum({x}, est_prob({x}));
    CHECK(free_vars(inner).empty());
    const EstimandPtr outer =
        est_sum({x}, est_product({est_prob({y}, {x}), inner}));
    CHECK(free_vars(outer) == std::vector<int>{y});
    const std::string text = estimand_to_text(outer, g);
    CHECK(free_vars(parse_estimand(text, g)) == std::vector<int>{y});
  }

  TEST_CASE("exact evaluation agrees with a hand-computed conditional") {
    const GenSpec s = spec_of(Family::Model3Prime);  // X -> Z -> Y, X <-> Y
    const Cbn cbn = random_cpts(generate_structure(s), 2, 2, 6);
    const CausalDiagram& g = cbn.diagram();
    const int x = g.var_id("X"), z = g.var_id("Z"), y = g.var_id("Y");

    // The backdoor-free front-door pieces evaluated separately.
    const EstimandPtr cond = est_prob({z}, {x});
    const Factor got = eval_estimand_exact(cond, cbn);
    REQUIRE(got.scope == std::vector<int>{x, z});
    const Factor joint = brute_force_marginal(cbn, {x, z});
    const Factor px = brute_force_marginal(cbn, {x});
    for (int xs = 0; xs < 2; ++xs)
      for (int zs = 0; zs < 2; ++zs)
        CHECK(got.at({xs, zs}) ==
              doctest::Approx(joint.at({xs, zs}) / px.at({xs})).epsilon(1e-11));

    // sum{Z}( prob(Z|X) * prob(Y|Z) ) computed by hand from the same tables.
    const EstimandPtr fd =
        est_sum({z}, est_product({est_prob({z}, {x}), est_prob({y}, {z})}));
    const Factor fd_tab = eval_estimand_exact(fd, cbn);
    REQUIRE(fd_tab.scope == std::vector<int>{x, y});
    const Factor jzy = brute_force_marginal(cbn, {z, y});
    const Factor pz = brute_force_marginal(cbn, {z});
    for (int xs = 0; xs < 2; ++xs)
      for (int ys = 0; ys < 2; ++ys) {
        double expect = 0.0;
        for (int zs = 0; zs < 2; ++zs)
          expect += joint.at({xs, zs}) / px.at({xs}) *
                    (jzy.at({zs, ys}) / pz.at({zs}));
        CHECK(fd_tab.at({xs, ys}) == doctest::Approx(expect).epsilon(1e-11));
      }

    // Quotient convention: 0/0 evaluates to 0 rather than poisoning sums.
    const Factor zero =
        eval_estimand_exact(est_ratio(est_const(0.0), est_const(0.0)), cbn);
    CHECK(zero.values == std::vector<double>{0.0});
  }

  TEST_CASE("interventional query matches truncated enumeration") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      const Cbn cbn = random_cpts(generate_structure(spec_of(Family::Chain, 5)), 2, 2, seed);
      const std::vector<int> targets{3};
      for (int s = 0; s < 2; ++s) {
        Query q;
        q.targets = targets;
        q.interventions = {{1, s}};
        const Factor got = interventional_query(cbn, q);
        const Factor want = truncated_enumeration(cbn, targets, {{1, s}});
        REQUIRE(got.scope == want.scope);
        for (std::size_t i = 0; i < got.values.size(); ++i)
          CHECK(got.values[i] == doctest::Approx(want.values[i]).epsilon(1e-11));
      }
      // The sweep table's slices are the per-state queries.
      const Factor table = interventional_table(cbn, targets, {1});
      REQUIRE(table.scope == std::vector<int>{1, 3});
      for (int s = 0; s < 2; ++s) {
        Query q;
        q.targets = targets;
        q.interventions = {{1, s}};
        const Factor one = interventional_query(cbn, q);
        for (int t = 0; t < 2; ++t)
          CHECK(table.at({s, t}) == doctest::Approx(one.at({t})).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("identified estimands evaluate to the interventional truth") {
    struct Fx {
      Family family;
      int n;
      std::vector<const char*> dos;
    };
    const Fx cases[] = {
        {Family::Model1, 0, {"X"}},
        {Family::Model2, 0, {"X1", "X2"}},
        {Family::Model3, 0, {"X"}},
        {Family::Model3Prime, 0, {"X"}},
        {Family::Model4, 0, {"X1", "X2", "X3"}},
        {Family::Model5, 0, {"X"}},
        {Family::Model6, 0, {"X1", "X2"}},
        {Family::Model7, 0, {"X1", "X2"}},
        {Family::Model8, 0, {"X"}},
        {Family::Chain, 7, {"V0"}},
    };
    for (const Fx& fx : cases) {
      const CausalDiagram g = generate_structure(spec_of(fx.family, fx.n));
      const int y = fx.family == Family::Chain ? g.var_id("V6") : g.var_id("Y");
      Query q;
      q.targets = {y};
      std::vector<int> do_vars;
      for (const char* name : fx.dos) {
        do_vars.push_back(g.var_id(name));
        q.interventions.push_back({g.var_id(name), 0});
      }
      const IdentifyResult id = identify(project_to_admg(g), q);
      REQUIRE_MESSAGE(id.identifiable(), family_to_string(fx.family));

      // Free variables sit inside targets-plus-interventions; an intervened
      // variable with no path into the target may drop out (Model 3's X).
      std::vector<int> want_free = do_vars;
      want_free.push_back(y);
      std::sort(want_free.begin(), want_free.end());
      const std::vector<int> free = free_vars(*id.estimand);
      CHECK(std::includes(want_free.begin(), want_free.end(), free.begin(), free.end()));
      CHECK(std::find(free.begin(), free.end(), y) != free.end());

      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const Cbn cbn = random_cpts(g, 2, 2, seed * 101);
        Factor est = eval_estimand_exact(*id.estimand, cbn);
        const Factor truth = interventional_table(cbn, {y}, do_vars);
        if (est.scope != truth.scope) {
          Factor ones;
          ones.scope = truth.scope;
          ones.card = truth.card;
          ones.values.assign(truth.values.size(), 1.0);
          est = factor_product(est, ones);
        }
        REQUIRE(est.scope == truth.scope);
        for (std::size_t i = 0; i < est.values.size(); ++i)
          CHECK_MESSAGE(
              est.values[i] == doctest::Approx(truth.values[i]).epsilon(1e-9),
              family_to_string(fx.family) << " seed " << seed << " cell " << i);
      }
    }
  }

  TEST_CASE("the bow graph is flagged with its hedge") {
    Admg admg;
    Variable x;
    x.id = 0;
    x.name = "X";
    x.cardinality = 2;
    x.kind = VarKind::Observed;
    Variable y = x;
    y.id = 1;
    y.name = "Y";
    y.parents = {0};
    admg.vars = {x, y};
    admg.bidirected = {{0, 1}};
    Query q;
    q.targets = {1};
    q.interventions = {{0, 0}};
    const IdentifyResult id = identify(admg, q);
    REQUIRE(!id.identifiable());
    REQUIRE(id.hedge.has_value());
    CHECK(id.hedge->component == std::vector<int>{1});
    CHECK(id.hedge->district == std::vector<int>{0, 1});
  }

  TEST_CASE("query validation rejects malformed interventions") {
    const CausalDiagram g = generate_structure(spec_of(Family::Model1));
    Query q;
    q.targets = {g.var_id("Y")};
    q.interventions = {{g.var_id("X"), 5}};
    CHECK_THROWS_AS(validate_query(g, q), StateOutOfRange);
    q.interventions = {{g.var_id("Y"), 0}};
    CHECK_THROWS_AS(validate_query(g, q), Error);
    q.interventions = {{4, 0}};  // U0 is latent
    CHECK_THROWS_AS(validate_query(g, q), Error);
  }

  TEST_CASE("sparse joint counts distinct configurations") {
    const Dataset d = dataset_of({0, 1}, {2, 2}, {0, 0, 0, 0, 1, 1, 0, 1});
    const SparseJoint sj(d);
    CHECK(sj.total() == 4);
    REQUIRE(sj.configs().size() == 3);
    CHECK(sj.configs()[0] == std::vector<int>{0, 0});
    CHECK(sj.counts()[0] == 2);
  }

  TEST_CASE("plugin terms are empirical conditionals over seen support") {
    // A: 0,0,0,1  B: 0,0,1,1
    const Dataset d = dataset_of({0, 1}, {2, 2}, {0, 0, 0, 0, 0, 1, 1, 1});
    std::vector<Variable> vars;
    for (int i = 0; i < 2; ++i) {
      Variable v;
      v.id = i;
      v.name = i ? "B" : "A";
      v.cardinality = 2;
      v.kind = VarKind::Observed;
      vars.push_back(v);
    }
    const CausalDiagram g(std::move(vars));

    const PluginResult cond = eval_estimand_plugin(est_prob({1}, {0}), d);
    REQUIRE(cond.table.scope == std::vector<int>{0, 1});
    CHECK(!cond.all_zero);
    CHECK(cond.table.at({0, 0}) == doctest::Approx(2.0 / 3.0));
    CHECK(cond.table.at({0, 1}) == doctest::Approx(1.0 / 3.0));
    CHECK(cond.table.at({1, 0}) == doctest::Approx(0.0));
    CHECK(cond.table.at({1, 1}) == doctest::Approx(1.0));

    // A vacuous bound variable multiplies by its cardinality.
    const PluginResult vac = eval_estimand_plugin(est_sum({1}, est_prob({0})), d);
    CHECK(vac.table.at({0}) == doctest::Approx(2.0 * 3.0 / 4.0));
    CHECK(vac.table.at({1}) == doctest::Approx(2.0 * 1.0 / 4.0));

    // Conditioning on an unseen event contributes zero, not a crash.
    const Dataset only_a0 = dataset_of({0, 1}, {2, 2}, {0, 0, 0, 1});
    const PluginResult part = eval_estimand_plugin(est_prob({1}, {0}), only_a0);
    CHECK(part.table.at({1, 0}) == 0.0);
    CHECK(part.table.at({1, 1}) == 0.0);
    CHECK(!part.all_zero);

    // A fully unsupported pinned event yields the all-zero flag.
    const PluginResult none = eval_estimand_plugin(est_prob_at({{0, 1}}), only_a0);
    CHECK(none.table.values == std::vector<double>{0.0});
    CHECK(none.all_zero);

    CHECK_THROWS_AS(eval_estimand_plugin(est_prob({0}), dataset_of({0, 1}, {2, 2}, {})),
                    DegenerateData);
  }

  TEST_CASE("plugin evaluation approaches the estimand on large samples") {
    const CausalDiagram g = generate_structure(spec_of(Family::Model1));
    const Cbn cbn = random_cpts(g, 2, 2, 12);
    Query q;
    q.targets = {g.var_id("Y")};
    q.interventions = {{g.var_id("X"), 0}};
    const IdentifyResult id = identify(project_to_admg(g), q);
    REQUIRE(id.identifiable());
    const Factor exact = eval_estimand_exact(*id.estimand, cbn);
    const Dataset data = forward_sample(cbn, 20000, 7);
    const PluginResult plug = eval_estimand_plugin(*id.estimand, data);
    REQUIRE(plug.table.scope == exact.scope);
    CHECK(mad(plug.table, exact) < 0.05);
  }

  TEST_CASE("renormalization fixes each intervention slice") {
    Factor f = make_factor({1, 3}, {2, 2}, {0.2, 0.2, 0.0, 0.0});
    renormalize_over_targets(f, {3});
    CHECK(f.at({0, 0}) == doctest::Approx(0.5));
    CHECK(f.at({0, 1}) == doctest::Approx(0.5));
    CHECK(f.at({1, 0}) == 0.0);  // zero-mass slice untouched
    CHECK(f.at({1, 1}) == 0.0);
  }

  TEST_CASE("mean absolute difference is a plain cell average") {
    const Factor a = make_factor({0, 1}, {2, 2}, {0.1, 0.9, 0.5, 0.5});
    const Factor b = make_factor({0, 1}, {2, 2}, {0.3, 0.7, 0.5, 0.1});
    CHECK(mad(a, b) == doctest::Approx((0.2 + 0.2 + 0.0 + 0.4) / 4.0));
    const Factor c = make_factor({0, 2}, {2, 2}, {0.1, 0.9, 0.5, 0.5});
    CHECK_THROWS_AS(mad(a, c), ShapeMismatch);
    const Factor dcard = make_factor({0, 1}, {2, 3}, {0.1, 0.9, 0.0, 0.5, 0.5, 0.0});
    CHECK_THROWS_AS(mad(a, dcard), ShapeMismatch);
  }
}
