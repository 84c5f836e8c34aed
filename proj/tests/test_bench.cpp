#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "causalem/bench.hpp"
#include "causalem/sampling.hpp"
#include "doctest.h"

using namespace causalem;

namespace {

ExperimentSpec tiny_spec() {
  ExperimentSpec spec;
  ModelSource src;
  src.id = "m3";
  GenSpec g;
  g.family = Family::Model3;
  g.seed = 5;
  src.family = g;
  spec.models.push_back(src);
  spec.sample_sizes = {200};
  spec.seeds = {1, 2};
  spec.methods = {"exact", "plugin", "em4ci"};
  spec.em.restarts = 2;
  spec.em.max_iterations = 60;
  spec.em.k_max = 4;
  spec.em.seed = 9;
  spec.timing = "none";
  return spec;
}

std::string csv_of(const std::vector<ResultRow>& rows) {
  std::ostringstream csv, summary;
  emit_report(rows, csv, summary);
  return csv.str();
}

}  // namespace

TEST_SUITE("bench") {
  TEST_CASE("query text parses in sweep and fixed forms") {
    const CausalDiagram g = generate_structure([] {
      GenSpec s;
      s.family = Family::Model7;
      return s;
    }());
    const ParsedQuery sweep = parse_query_text("P(Y | do(X1, X2))", g);
    CHECK(sweep.sweep);
    CHECK(sweep.targets == std::vector<int>{g.var_id("Y")});
    CHECK(sweep.do_vars == std::vector<int>{g.var_id("X1"), g.var_id("X2")});
    CHECK(sweep.do_states == std::vector<int>{-1, -1});

    const ParsedQuery fixed = parse_query_text("P(Y|do(X1=0,X2=1))", g);
    CHECK(!fixed.sweep);
    CHECK(fixed.do_states == std::vector<int>{0, 1});

    const ParsedQuery plain = parse_query_text("P(Y)", g);
    CHECK(plain.do_vars.empty());

    CHECK_THROWS_AS(parse_query_text("P(Y | do(X1=0, X2))", g), ParseError);
    CHECK_THROWS_AS(parse_query_text("P(Y | do(Y))", g), ParseError);
    CHECK_THROWS_AS(parse_query_text("P(Y, Y)", g), ParseError);
    CHECK_THROWS_AS(parse_query_text("Q(Y)", g), ParseError);
    CHECK_THROWS_AS(parse_query_text("P(Frob)", g), UnknownVariable);
  }

  TEST_CASE("experiment specs load and reject unknown fields") {
    const std::string good = R"json({
      "models": [{"id": "chain", "family": {"family": "chain", "n": 7, "d": 2, "k": 2, "seed": 3}}],
      "queries": [["chain", "P(V6 | do(V0))"]],
      "sample_sizes": [100, 1000],
      "seeds": [1, 2, 3],
      "methods": ["exact"],
      "em": {"restarts": 4, "seed": 8},
      "out_dir": "/tmp/bench_out",
      "timing": "none"
    })json";
    const std::string path = "/tmp/causalem_test_spec.json";
    {
      std::ofstream out(path);
      out << good;
    }
    const ExperimentSpec spec = load_experiment_spec(path);
    REQUIRE(spec.models.size() == 1);
    CHECK(spec.models[0].id == "chain");
    REQUIRE(spec.models[0].family.has_value());
    CHECK(spec.models[0].family->n == 7);
    CHECK(spec.queries.size() == 1);
    CHECK(spec.sample_sizes == std::vector<int>{100, 1000});
    CHECK(spec.seeds.size() == 3);
    CHECK(spec.em.restarts == 4);
    CHECK(spec.timing == "none");

    {
      std::ofstream out(path);
      out << R"({"models": [], "sample_sizes": [1], "seeds": [1], "methods": [], "frobnicate": 1})";
    }
    CHECK_THROWS_AS(load_experiment_spec(path), ParseError);
    {
      std::ofstream out(path);
      out << R"({"models": [{"id": "x"}], "sample_sizes": [1], "seeds": [1], "methods": ["exact"]})";
    }
    CHECK_THROWS_AS(load_experiment_spec(path), ParseError);  // family xor model_path
    std::remove(path.c_str());
  }

  TEST_CASE("a small experiment produces one row per method seed and query") {
    const ExperimentSpec spec = tiny_spec();
    const std::vector<ResultRow> rows = run_experiment(spec);
    // 1 model x 1 default query x 1 m x 2 seeds x 3 methods.
    REQUIRE(rows.size() == 6);
    int n_exact = 0, n_em = 0;
    for (const ResultRow& r : rows) {
      CHECK(r.model_id == "m3");
      CHECK(r.query == "P(Y | do(X))");
      CHECK(r.m == 200);
      CHECK(!r.failed);
      if (r.method == "exact") {
        CHECK(r.mad_value == 0.0);
        CHECK(r.k_lrn == 0);
        ++n_exact;
      } else if (r.method == "em4ci") {
        CHECK(r.k_lrn >= 2);
        CHECK(r.mad_value >= 0.0);
        ++n_em;
      }
      CHECK(r.learn_time_s == 0.0);  // timing "none"
      CHECK(r.inference_time_s == 0.0);
    }
    CHECK(n_exact == 2);
    CHECK(n_em == 2);
  }

  TEST_CASE("reports are byte-identical across reruns and thread counts") {
    const ExperimentSpec spec = tiny_spec();
    const std::string a = csv_of(run_experiment(spec));
    const std::string b = csv_of(run_experiment(spec));
    CHECK(a == b);
    ExperimentSpec threaded = spec;
    threaded.em.threads = 2;
    const std::string c = csv_of(run_experiment(threaded));
    CHECK(a == c);
    CHECK(a.substr(0, a.find('\n')) ==
          "model,query,method,m,seed,mad,k_lrn,learn_time_s,inference_time_s");
  }

  TEST_CASE("csv output parses back losslessly") {
    const std::vector<ResultRow> rows = run_experiment(tiny_spec());
    const std::string text = csv_of(rows);
    std::istringstream in(text);
    const std::vector<ResultRow> back = parse_results_csv(in);
    REQUIRE(back.size() == rows.size());
    CHECK(csv_of(back) == text);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(back[i].model_id == rows[i].model_id);
      CHECK(back[i].method == rows[i].method);
      CHECK(back[i].seed == rows[i].seed);
      CHECK(back[i].k_lrn == rows[i].k_lrn);
    }
  }

  TEST_CASE("non-identifiable queries become failed rows not crashes") {
    // Bow graph: X -> Y plus a shared latent parent; P(Y | do(X)) has no
    // estimand, so the plugin method must record a failure.
    std::vector<Variable> vars;
    Variable x;
    x.id = 0;
    x.name = "X";
    x.cardinality = 2;
    x.kind = VarKind::Observed;
    x.parents = {2};
    Variable y;
    y.id = 1;
    y.name = "Y";
    y.cardinality = 2;
    y.kind = VarKind::Observed;
    y.parents = {0, 2};
    Variable u;
    u.id = 2;
    u.name = "U";
    u.cardinality = 2;
    u.kind = VarKind::Latent;
    vars = {x, y, u};
    const CausalDiagram g(std::move(vars));
    const Cbn cbn = random_cpts(g, 2, 2, 31);
    const std::string path = "/tmp/causalem_test_bow.json";
    save_model(cbn, path);

    ExperimentSpec spec;
    ModelSource src;
    src.id = "bow";
    src.model_path = path;
    spec.models.push_back(src);
    spec.queries = {{"bow", "P(Y | do(X))"}};
    spec.sample_sizes = {50};
    spec.seeds = {1};
    spec.methods = {"plugin", "exact"};
    spec.timing = "none";
    const std::vector<ResultRow> rows = run_experiment(spec);
    REQUIRE(rows.size() == 2);
    bool saw_failed = false;
    for (const ResultRow& r : rows) {
      if (r.method == "plugin") {
        CHECK(r.failed);
        CHECK(!r.error.empty());
        saw_failed = true;
      } else {
        CHECK(!r.failed);  // exact never needs the estimand
      }
    }
    CHECK(saw_failed);

    // nan cells survive the round trip as failures.
    const std::string text = csv_of(rows);
    CHECK(text.find("nan") != std::string::npos);
    std::istringstream in(text);
    const std::vector<ResultRow> back = parse_results_csv(in);
    bool back_failed = false;
    for (const ResultRow& r : back)
      if (r.failed) back_failed = true;
    CHECK(back_failed);
    std::remove(path.c_str());
  }

  TEST_CASE("report files land at the requested prefix") {
    const std::vector<ResultRow> rows = run_experiment(tiny_spec());
    write_report_files(rows, "/tmp/causalem_rep_");
    std::ifstream csv("/tmp/causalem_rep_results.csv");
    std::ifstream sum("/tmp/causalem_rep_summary.txt");
    REQUIRE(csv.good());
    REQUIRE(sum.good());
    std::string line;
    std::getline(csv, line);
    CHECK(line == "model,query,method,m,seed,mad,k_lrn,learn_time_s,inference_time_s");
    std::getline(sum, line);
    CHECK(!line.empty());
    std::remove("/tmp/causalem_rep_results.csv");
    std::remove("/tmp/causalem_rep_summary.txt");
  }
}
