// causalem command line: generate, learn, query, identify, plugin, bench.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "causalem/bench.hpp"
#include "causalem/causal.hpp"
#include "causalem/learning.hpp"
#include "causalem/model.hpp"
#include "causalem/rng.hpp"
#include "causalem/sampling.hpp"

namespace {

using namespace causalem;

Cbn load_source_model(const std::string& path, bool latentify) {
  Cbn cbn = load_model(path);
  if (!latentify) return cbn;
  const CausalDiagram lifted = latentify_sources(cbn.diagram());
  std::vector<Cpt> cpts;
  for (int v = 0; v < lifted.size(); ++v) cpts.push_back(cbn.cpt(v));
  return Cbn(lifted, std::move(cpts));
}

void print_factor(const Factor& f, const CausalDiagram& g, std::ostream& os) {
  os << dump_factor(f, g);
}

int run(int argc, char** argv) {
  CLI::App app{"causal bayesian networks: generation, learning, identification"};
  app.require_subcommand(1);

  // generate ---------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "emit a random ground-truth model");
  std::string gen_family = "chain";
  int gen_n = 9, gen_d = 2, gen_k = 2;
  std::uint64_t gen_seed = 1;
  int gen_samples = 0;
  std::string gen_out, gen_data_out;
  gen->add_option("--family", gen_family,
                  "chain | diamond | cone_cloud | m1..m8 | m3prime")
      ->capture_default_str();
  gen->add_option("--n", gen_n, "observed variable count (structured families)")
      ->capture_default_str();
  gen->add_option("--d", gen_d, "observed cardinality")->capture_default_str();
  gen->add_option("--k", gen_k, "latent cardinality")->capture_default_str();
  gen->add_option("--seed", gen_seed, "rng seed")->capture_default_str();
  gen->add_option("--samples", gen_samples, "also sample this many rows");
  gen->add_option("--out", gen_out, "model JSON path (default stdout)");
  gen->add_option("--data-out", gen_data_out, "data CSV path for --samples");

  // learn ------------------------------------------------------------------
  auto* lrn = app.add_subcommand("learn", "fit latent cardinalities and CPTs");
  std::string lrn_model, lrn_data, lrn_out, lrn_log;
  bool lrn_latentify = false;
  EmConfig lrn_cfg;
  lrn->add_option("--model", lrn_model, "model JSON giving the structure; CPT "
                                        "values in it are ignored")
      ->required();
  lrn->add_option("--data", lrn_data, "training data CSV")->required();
  lrn->add_flag("--latentify-sources", lrn_latentify,
                "treat parentless multi-child variables as latent first");
  lrn->add_option("--seed", lrn_cfg.seed, "rng seed")->capture_default_str();
  lrn->add_option("--restarts", lrn_cfg.restarts, "EM restarts per cardinality")
      ->capture_default_str();
  lrn->add_option("--k-step", lrn_cfg.k_step, "cardinality schedule step")
      ->capture_default_str();
  lrn->add_option("--k-max", lrn_cfg.k_max,
                  "cardinality schedule cap (0 = derived from the data)")
      ->capture_default_str();
  lrn->add_option("--tol", lrn_cfg.ll_rel_tolerance, "EM convergence tolerance")
      ->capture_default_str();
  lrn->add_option("--max-iters", lrn_cfg.max_iterations, "EM iteration cap")
      ->capture_default_str();
  lrn->add_option("--threads", lrn_cfg.threads, "E-step worker threads")
      ->capture_default_str();
  lrn->add_option("--out", lrn_out, "learned model JSON path (default stdout)");
  lrn->add_option("--log", lrn_log, "per-iteration log CSV (restart,k,iteration,ll)");

  // query ------------------------------------------------------------------
  auto* qry = app.add_subcommand("query", "evaluate an interventional query");
  std::string qry_model, qry_text, qry_out;
  qry->add_option("--model", qry_model, "model JSON")->required();
  qry->add_option("--query", qry_text, "e.g. \"P(V6 | do(V0=0))\" or sweep form "
                                       "\"P(V6 | do(V0))\"")
      ->required();
  qry->add_option("--out", qry_out, "write the table here instead of stdout");

  // identify ---------------------------------------------------------------
  auto* idf = app.add_subcommand("identify",
                                 "derive an observational estimand for a query");
  std::string idf_model, idf_text;
  bool idf_latentify = false;
  idf->add_option("--model", idf_model, "model JSON")->required();
  idf->add_option("--query", idf_text, "query text")->required();
  idf->add_flag("--latentify-sources", idf_latentify,
                "treat parentless multi-child variables as latent first");

  // plugin -----------------------------------------------------------------
  auto* plg = app.add_subcommand("plugin", "evaluate the estimand on data");
  std::string plg_model, plg_data, plg_text, plg_out;
  bool plg_renorm = false, plg_latentify = false;
  plg->add_option("--model", plg_model, "model JSON (structure only)")->required();
  plg->add_option("--data", plg_data, "data CSV")->required();
  plg->add_option("--query", plg_text, "query text")->required();
  plg->add_flag("--renormalize", plg_renorm,
                "normalize each target slice of the plug-in table");
  plg->add_flag("--latentify-sources", plg_latentify,
                "treat parentless multi-child variables as latent first");
  plg->add_option("--out", plg_out, "write the table here instead of stdout");

  // bench ------------------------------------------------------------------
  auto* bch = app.add_subcommand("bench", "run an experiment spec");
  std::string bch_spec, bch_out;
  std::optional<int> bch_threads;
  bch->add_option("--spec", bch_spec, "experiment JSON")->required();
  bch->add_option("--out", bch_out, "output path prefix (default from the spec)");
  bch->add_option("--threads", bch_threads, "override EM worker threads");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    GenSpec spec;
    spec.family = family_from_string(gen_family);
    spec.n = gen_n;
    spec.d = gen_d;
    spec.k = gen_k;
    spec.seed = gen_seed;
    const CausalDiagram diagram = generate_structure(spec);
    const std::uint64_t cpt_seed = Rng(spec.seed).derive("model-cpts").next_u64();
    const Cbn cbn = random_cpts(diagram, spec.d, spec.k, cpt_seed);
    if (gen_out.empty())
      std::cout << model_to_json(cbn);
    else
      save_model(cbn, gen_out);
    if (gen_samples > 0) {
      if (gen_data_out.empty())
        throw Error("--samples needs --data-out");
      const std::uint64_t data_seed = Rng(spec.seed).derive("dataset").next_u64();
      write_data_csv(forward_sample(cbn, gen_samples, data_seed), diagram,
                     gen_data_out);
    }
    return 0;
  }

  if (lrn->parsed()) {
    const Cbn source = load_source_model(lrn_model, lrn_latentify);
    const CausalDiagram& g = source.diagram();
    const Dataset data = read_data_csv(lrn_data, g);
    std::ofstream log;
    if (!lrn_log.empty()) {
      log.open(lrn_log, std::ios::binary);
      if (!log) throw IoError("cannot write " + lrn_log);
      log << "restart,k,iteration,ll\n";
    }
    const std::vector<int> ks = default_k_schedule(g, data, lrn_cfg);
    const LearnResult res =
        em4ci_learn(g, data, ks, lrn_cfg, lrn_log.empty() ? nullptr : &log);
    if (lrn_out.empty())
      std::cout << model_to_json(res.cbn);
    else
      save_model(res.cbn, lrn_out);
    std::cerr << "k_lrn=" << res.k_lrn << " ll=" << res.log_likelihood
              << " bic=" << res.bic << " restarts=" << res.restarts_used << "\n";
    return 0;
  }

  if (qry->parsed()) {
    const Cbn cbn = load_model(qry_model);
    const ParsedQuery pq = parse_query_text(qry_text, cbn.diagram());
    Factor table;
    if (pq.sweep || pq.do_vars.empty()) {
      table = interventional_table(cbn, pq.targets, pq.do_vars);
    } else {
      Query q;
      q.targets = pq.targets;
      for (std::size_t i = 0; i < pq.do_vars.size(); ++i)
        q.interventions.push_back({pq.do_vars[i], pq.do_states[i]});
      table = interventional_query(cbn, q);
    }
    if (qry_out.empty()) {
      print_factor(table, cbn.diagram(), std::cout);
    } else {
      std::ofstream out(qry_out, std::ios::binary);
      if (!out) throw IoError("cannot write " + qry_out);
      print_factor(table, cbn.diagram(), out);
    }
    return 0;
  }

  if (idf->parsed()) {
    const Cbn cbn = load_source_model(idf_model, idf_latentify);
    const CausalDiagram& g = cbn.diagram();
    const ParsedQuery pq = parse_query_text(idf_text, g);
    Query q;
    q.targets = pq.targets;
    for (std::size_t i = 0; i < pq.do_vars.size(); ++i)
      q.interventions.push_back({pq.do_vars[i], std::max(0, pq.do_states[i])});
    const IdentifyResult res = identify(project_to_admg(g), q);
    if (res.identifiable()) {
      std::cout << estimand_to_text(*res.estimand, g) << "\n";
    } else {
      std::cout << "not identifiable\n";
      std::cout << "component:";
      for (int v : res.hedge->component) std::cout << ' ' << g.var(v).name;
      std::cout << "\ndistrict:";
      for (int v : res.hedge->district) std::cout << ' ' << g.var(v).name;
      std::cout << "\n";
    }
    return 0;
  }

  if (plg->parsed()) {
    const Cbn cbn = load_source_model(plg_model, plg_latentify);
    const CausalDiagram& g = cbn.diagram();
    const Dataset data = read_data_csv(plg_data, g);
    const ParsedQuery pq = parse_query_text(plg_text, g);
    Query q;
    q.targets = pq.targets;
    for (std::size_t i = 0; i < pq.do_vars.size(); ++i)
      q.interventions.push_back({pq.do_vars[i], std::max(0, pq.do_states[i])});
    const IdentifyResult res = identify(project_to_admg(g), q);
    if (!res.identifiable()) {
      std::cout << "not identifiable\n";
      return 2;
    }
    PluginResult pr = eval_estimand_plugin(*res.estimand, data);
    if (!pq.sweep && !pq.do_vars.empty()) {
      std::vector<std::pair<int, int>> fixed;
      for (std::size_t i = 0; i < pq.do_vars.size(); ++i)
        fixed.push_back({pq.do_vars[i], pq.do_states[i]});
      pr.table = factor_restrict(pr.table, fixed);
    }
    if (plg_renorm) renormalize_over_targets(pr.table, pq.targets);
    if (pr.all_zero)
      std::cerr << "warning: no seen configuration supported the estimand\n";
    if (plg_out.empty()) {
      print_factor(pr.table, g, std::cout);
    } else {
      std::ofstream out(plg_out, std::ios::binary);
      if (!out) throw IoError("cannot write " + plg_out);
      print_factor(pr.table, g, out);
    }
    return 0;
  }

  // bench
  ExperimentSpec spec = load_experiment_spec(bch_spec);
  if (bch_threads) spec.em.threads = *bch_threads;
  std::string prefix = bch_out;
  if (prefix.empty()) {
    prefix = spec.out_dir;
    if (!prefix.empty() && prefix.back() != '/') prefix += '/';
  }
  const std::vector<ResultRow> rows = run_experiment(spec);
  write_report_files(rows, prefix);
  int failures = 0;
  for (const ResultRow& r : rows)
    if (r.failed) ++failures;
  std::cerr << rows.size() << " rows (" << failures << " failed) -> " << prefix
            << "results.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
