// Thin python surface over the C++ library: enough to generate models,
// sample, learn, and evaluate queries end to end from a notebook.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "causalem/bench.hpp"
#include "causalem/causal.hpp"
#include "causalem/learning.hpp"
#include "causalem/model.hpp"
#include "causalem/rng.hpp"
#include "causalem/sampling.hpp"

namespace py = pybind11;
using namespace causalem;

namespace {

Cbn model_from_text(const std::string& text) { return model_from_json(text); }

py::dict factor_to_dict(const Factor& f, const CausalDiagram& g) {
  py::dict out;
  py::list scope, card;
  for (int v : f.scope) scope.append(g.var(v).name);
  for (int c : f.card) card.append(c);
  py::list values;
  for (double v : f.values) values.append(v);
  out["scope"] = scope;
  out["card"] = card;
  out["values"] = values;
  return out;
}

Factor query_table(const Cbn& cbn, const std::string& query_text) {
  const ParsedQuery pq = parse_query_text(query_text, cbn.diagram());
  if (pq.sweep || pq.do_vars.empty())
    return interventional_table(cbn, pq.targets, pq.do_vars);
  Query q;
  q.targets = pq.targets;
  for (std::size_t i = 0; i < pq.do_vars.size(); ++i)
    q.interventions.push_back({pq.do_vars[i], pq.do_states[i]});
  return interventional_query(cbn, q);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "causal bayesian networks with latent-variable learning";

  m.def(
      "generate_model",
      [](const std::string& family, int n, int d, int k, std::uint64_t seed) {
        GenSpec spec;
        spec.family = family_from_string(family);
        spec.n = n;
        spec.d = d;
        spec.k = k;
        spec.seed = seed;
        const CausalDiagram g = generate_structure(spec);
        const std::uint64_t cpt_seed = Rng(seed).derive("model-cpts").next_u64();
        return model_to_json(random_cpts(g, d, k, cpt_seed));
      },
      py::arg("family"), py::arg("n") = 0, py::arg("d") = 2, py::arg("k") = 2,
      py::arg("seed") = 1, "Random ground-truth model as a JSON string.");

  m.def(
      "sample_csv",
      [](const std::string& model_json, int m_rows, std::uint64_t seed) {
        const Cbn cbn = model_from_text(model_json);
        const Dataset data = forward_sample(cbn, m_rows, seed);
        std::ostringstream os;
        const std::vector<int>& ids = data.var_ids;
        for (std::size_t c = 0; c < ids.size(); ++c)
          os << (c ? "," : "") << cbn.diagram().var(ids[c]).name;
        os << "\n";
        for (int r = 0; r < data.n_rows(); ++r) {
          for (int c = 0; c < data.n_cols(); ++c)
            os << (c ? "," : "") << data.at(r, c);
          os << "\n";
        }
        return os.str();
      },
      py::arg("model_json"), py::arg("m"), py::arg("seed") = 1,
      "Forward-sample observed rows; returns CSV text.");

  m.def(
      "learn",
      [](const std::string& model_json, const std::string& data_csv,
         std::uint64_t seed, int restarts, int k_step, int k_max, int threads) {
        const Cbn source = model_from_text(model_json);
        const CausalDiagram& g = source.diagram();
        Dataset data = [&] {
          const std::string path = "/tmp/causalem_py_data.csv";
          std::ofstream out(path, std::ios::binary);
          out << data_csv;
          out.close();
          return read_data_csv(path, g);
        }();
        EmConfig cfg;
        cfg.seed = seed;
        cfg.restarts = restarts;
        cfg.k_step = k_step;
        cfg.k_max = k_max;
        cfg.threads = threads;
        const LearnResult res =
            em4ci_learn(g, data, default_k_schedule(g, data, cfg), cfg);
        py::dict out;
        out["model_json"] = model_to_json(res.cbn);
        out["k_lrn"] = res.k_lrn;
        out["log_likelihood"] = res.log_likelihood;
        out["bic"] = res.bic;
        return out;
      },
      py::arg("model_json"), py::arg("data_csv"), py::arg("seed") = 1,
      py::arg("restarts") = 10, py::arg("k_step") = 2, py::arg("k_max") = 0,
      py::arg("threads") = 1,
      "Fit latent cardinalities and CPTs; returns dict with model_json, k_lrn, "
      "log_likelihood, bic.");

  m.def(
      "query",
      [](const std::string& model_json, const std::string& query_text) {
        const Cbn cbn = model_from_text(model_json);
        return factor_to_dict(query_table(cbn, query_text), cbn.diagram());
      },
      py::arg("model_json"), py::arg("query"),
      "Interventional table as {scope, card, values}.");

  m.def(
      "identify",
      [](const std::string& model_json, const std::string& query_text) {
        const Cbn cbn = model_from_text(model_json);
        const CausalDiagram& g = cbn.diagram();
        const ParsedQuery pq = parse_query_text(query_text, g);
        Query q;
        q.targets = pq.targets;
        for (std::size_t i = 0; i < pq.do_vars.size(); ++i)
          q.interventions.push_back({pq.do_vars[i], std::max(0, pq.do_states[i])});
        const IdentifyResult res = identify(project_to_admg(g), q);
        py::dict out;
        out["identifiable"] = res.identifiable();
        if (res.identifiable()) out["estimand"] = estimand_to_text(*res.estimand, g);
        return out;
      },
      py::arg("model_json"), py::arg("query"),
      "Observational estimand text, or identifiable=False.");

  m.def(
      "mad",
      [](const py::dict& a, const py::dict& b) {
        auto to_factor = [](const py::dict& d) {
          Factor f;
          // names are ignored here; tables must already share a scope order
          for (auto c : d["card"]) f.card.push_back(c.cast<int>());
          for (auto v : d["values"]) f.values.push_back(v.cast<double>());
          f.scope.resize(f.card.size());
          for (std::size_t i = 0; i < f.scope.size(); ++i)
            f.scope[i] = static_cast<int>(i);
          return f;
        };
        return mad(to_factor(a), to_factor(b));
      },
      py::arg("estimate"), py::arg("truth"),
      "Mean absolute difference between two query tables.");
}
