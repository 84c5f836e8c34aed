#include "causalem/bench.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "causalem/rng.hpp"
#include "json.hpp"

namespace causalem {

namespace {

using nlohmann::json;

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void skip_ws(const std::string& s, std::size_t& i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

std::string read_name(const std::string& s, std::size_t& i) {
  skip_ws(s, i);
  std::size_t start = i;
  while (i < s.size() &&
         (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_'))
    ++i;
  if (start == i)
    throw ParseError("expected a variable name in query at offset " +
                     std::to_string(start));
  return s.substr(start, i - start);
}

bool eat(const std::string& s, std::size_t& i, char c) {
  skip_ws(s, i);
  if (i < s.size() && s[i] == c) {
    ++i;
    return true;
  }
  return false;
}

void expect(const std::string& s, std::size_t& i, char c) {
  if (!eat(s, i, c))
    throw ParseError(std::string("expected '") + c + "' in query at offset " +
                     std::to_string(i));
}

}  // namespace

ParsedQuery parse_query_text(const std::string& text, const CausalDiagram& diagram) {
  ParsedQuery q;
  std::size_t i = 0;
  skip_ws(text, i);
  if (i >= text.size() || (text[i] != 'P' && text[i] != 'p'))
    throw ParseError("query must start with P(...)");
  ++i;
  expect(text, i, '(');
  q.targets.push_back(diagram.var_id(read_name(text, i)));
  while (eat(text, i, ',')) q.targets.push_back(diagram.var_id(read_name(text, i)));
  if (eat(text, i, '|')) {
    skip_ws(text, i);
    const std::string kw = read_name(text, i);
    if (kw != "do") throw ParseError("only do(...) conditioning is supported");
    expect(text, i, '(');
    int fixed_seen = 0, swept_seen = 0;
    do {
      const std::string name = read_name(text, i);
      int state = -1;
      if (eat(text, i, '=')) {
        skip_ws(text, i);
        std::size_t start = i;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])))
          ++i;
        if (start == i)
          throw ParseError("expected a state after '=' in query at offset " +
                           std::to_string(i));
        state = std::stoi(text.substr(start, i - start));
        ++fixed_seen;
      } else {
        ++swept_seen;
      }
      q.do_vars.push_back(diagram.var_id(name));
      q.do_states.push_back(state);
    } while (eat(text, i, ','));
    expect(text, i, ')');
    if (fixed_seen > 0 && swept_seen > 0)
      throw ParseError("query mixes fixed and swept interventions");
    q.sweep = swept_seen > 0;
  }
  expect(text, i, ')');
  skip_ws(text, i);
  if (i != text.size())
    throw ParseError("unexpected trailing text in query at offset " + std::to_string(i));

  std::sort(q.targets.begin(), q.targets.end());
  std::vector<std::pair<int, int>> dv;
  for (std::size_t j = 0; j < q.do_vars.size(); ++j)
    dv.push_back({q.do_vars[j], q.do_states[j]});
  std::sort(dv.begin(), dv.end());
  for (std::size_t j = 0; j < dv.size(); ++j) {
    q.do_vars[j] = dv[j].first;
    q.do_states[j] = dv[j].second;
  }
  for (std::size_t j = 1; j < q.targets.size(); ++j)
    if (q.targets[j] == q.targets[j - 1]) throw ParseError("duplicate query target");
  for (std::size_t j = 1; j < q.do_vars.size(); ++j)
    if (q.do_vars[j] == q.do_vars[j - 1])
      throw ParseError("duplicate intervention variable");
  for (int t : q.targets)
    if (std::binary_search(q.do_vars.begin(), q.do_vars.end(), t))
      throw ParseError("a variable cannot be both target and intervention");
  return q;
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) ok = true;
    if (!ok)
      throw ParseError(std::string("unknown field '") + it.key() + "' in " + where);
  }
}

GenSpec parse_genspec(const json& j) {
  reject_unknown(j, {"family", "n", "d", "k", "seed"}, "model family");
  GenSpec g;
  g.family = family_from_string(j.at("family").get<std::string>());
  if (j.contains("n")) g.n = j.at("n").get<int>();
  if (j.contains("d")) g.d = j.at("d").get<int>();
  if (j.contains("k")) g.k = j.at("k").get<int>();
  if (j.contains("seed")) g.seed = j.at("seed").get<std::uint64_t>();
  return g;
}

}  // namespace

ExperimentSpec load_experiment_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open experiment spec: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    reject_unknown(j,
                   {"models", "queries", "sample_sizes", "seeds", "methods", "em",
                    "out_dir", "timing"},
                   "experiment spec");
    ExperimentSpec spec;
    for (const json& jm : j.at("models")) {
      reject_unknown(jm, {"id", "family", "model_path", "latentify"}, "model entry");
      ModelSource src;
      src.id = jm.at("id").get<std::string>();
      if (jm.contains("family")) src.family = parse_genspec(jm.at("family"));
      if (jm.contains("model_path"))
        src.model_path = jm.at("model_path").get<std::string>();
      if (jm.contains("latentify")) src.latentify = jm.at("latentify").get<bool>();
      if (src.family.has_value() == src.model_path.has_value())
        throw ParseError("model entry '" + src.id +
                         "' needs exactly one of family or model_path");
      spec.models.push_back(std::move(src));
    }
    if (j.contains("queries"))
      for (const json& jq : j.at("queries")) {
        if (!jq.is_array() || jq.size() != 2)
          throw ParseError("each query entry must be [model_id, query_text]");
        spec.queries.push_back({jq[0].get<std::string>(), jq[1].get<std::string>()});
      }
    for (const json& v : j.at("sample_sizes")) spec.sample_sizes.push_back(v.get<int>());
    for (const json& v : j.at("seeds")) spec.seeds.push_back(v.get<std::uint64_t>());
    for (const json& v : j.at("methods")) {
      const std::string m = v.get<std::string>();
      if (m != "em4ci" && m != "plugin" && m != "exact")
        throw ParseError("unknown method '" + m + "'");
      spec.methods.push_back(m);
    }
    if (j.contains("em")) {
      const json& je = j.at("em");
      reject_unknown(je,
                     {"max_iterations", "ll_rel_tolerance", "restarts", "seed",
                      "k_step", "k_max", "threads", "pseudocount"},
                     "em config");
      if (je.contains("max_iterations"))
        spec.em.max_iterations = je.at("max_iterations").get<int>();
      if (je.contains("ll_rel_tolerance"))
        spec.em.ll_rel_tolerance = je.at("ll_rel_tolerance").get<double>();
      if (je.contains("restarts")) spec.em.restarts = je.at("restarts").get<int>();
      if (je.contains("seed")) spec.em.seed = je.at("seed").get<std::uint64_t>();
      if (je.contains("k_step")) spec.em.k_step = je.at("k_step").get<int>();
      if (je.contains("k_max")) spec.em.k_max = je.at("k_max").get<int>();
      if (je.contains("threads")) spec.em.threads = je.at("threads").get<int>();
      if (je.contains("pseudocount"))
        spec.em.pseudocount = je.at("pseudocount").get<double>();
    }
    if (j.contains("out_dir")) spec.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("timing")) {
      spec.timing = j.at("timing").get<std::string>();
      if (spec.timing != "wall" && spec.timing != "none")
        throw ParseError("timing must be \"wall\" or \"none\"");
    }
    return spec;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

namespace {

struct PreparedModel {
  std::string id;
  std::optional<Cbn> truth;
  std::vector<std::pair<std::string, ParsedQuery>> queries;  // (text, parsed)
};

Cbn build_ground_truth(const ModelSource& src, std::uint64_t master_seed) {
  if (src.family) {
    GenSpec g = *src.family;
    if (g.seed == 0)
      g.seed = Rng(master_seed).derive("model-cpts", std::hash<std::string>{}(src.id))
                   .next_u64();
    const CausalDiagram diagram = generate_structure(g);
    return random_cpts(diagram, g.d, g.k, g.seed);
  }
  Cbn loaded = load_model(*src.model_path);
  if (!src.latentify) return loaded;
  const CausalDiagram lifted = latentify_sources(loaded.diagram());
  std::vector<Cpt> cpts;
  for (int v = 0; v < lifted.size(); ++v) cpts.push_back(loaded.cpt(v));
  return Cbn(lifted, std::move(cpts));
}

std::string format_double(double v, int decimals) {
  char buf[64];
  if (std::isnan(v)) return "nan";
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec) {
  const bool timed = spec.timing == "wall";
  std::vector<ResultRow> rows;

  for (const ModelSource& src : spec.models) {
    Cbn truth = build_ground_truth(src, spec.em.seed);
    const CausalDiagram& g = truth.diagram();

    std::vector<std::pair<std::string, ParsedQuery>> queries;
    for (const auto& [mid, text] : spec.queries)
      if (mid == src.id) queries.push_back({text, parse_query_text(text, g)});
    if (queries.empty() && src.family) {
      const std::string text = default_query_text(*src.family);
      queries.push_back({text, parse_query_text(text, g)});
    }
    if (queries.empty())
      throw Error("no query given for model '" + src.id + "'");

    // The estimand depends only on the graph, never on the data or seed.
    std::map<std::string, IdentifyResult> estimands;
    const Admg admg = project_to_admg(g);

    // Exact truth tables per query, shared across seeds and sample sizes.
    // Sweep queries score the full table; fixed queries score one slice.
    auto model_table = [](const Cbn& cbn, const ParsedQuery& pq) {
      if (pq.sweep || pq.do_vars.empty())
        return interventional_table(cbn, pq.targets, pq.do_vars);
      Query q;
      q.targets = pq.targets;
      for (std::size_t i = 0; i < pq.do_vars.size(); ++i)
        q.interventions.push_back({pq.do_vars[i], pq.do_states[i]});
      return interventional_query(cbn, q);
    };
    std::map<std::string, Factor> truth_tables;
    for (const auto& [text, pq] : queries)
      truth_tables.emplace(text, model_table(truth, pq));

    for (std::uint64_t seed : spec.seeds)
      for (int m : spec.sample_sizes) {
        const std::uint64_t data_seed =
            Rng(seed).derive("dataset", std::hash<std::string>{}(src.id),
                             static_cast<std::uint64_t>(m))
                .next_u64();
        const Dataset data = forward_sample(truth, m, data_seed);

        std::optional<LearnResult> learned;
        double learn_time = 0.0;
        std::string learn_error;
        const bool wants_em =
            std::find(spec.methods.begin(), spec.methods.end(), "em4ci") !=
            spec.methods.end();
        if (wants_em) {
          try {
            EmConfig cfg = spec.em;
            cfg.seed = Rng(seed).derive("em", std::hash<std::string>{}(src.id),
                                        static_cast<std::uint64_t>(m))
                           .next_u64();
            const double t0 = timed ? now_seconds() : 0.0;
            learned = em4ci_learn(g, data, default_k_schedule(g, data, cfg), cfg);
            if (timed) learn_time = now_seconds() - t0;
          } catch (const std::exception& e) {
            learn_error = e.what();
          }
        }

        for (const auto& [text, pq] : queries) {
          const Factor& truth_table = truth_tables.at(text);
          for (const std::string& method : spec.methods) {
            ResultRow row;
            row.model_id = src.id;
            row.query = text;
            row.method = method;
            row.m = m;
            row.seed = seed;
            try {
              if (method == "exact") {
                const double t0 = timed ? now_seconds() : 0.0;
                const Factor est = model_table(truth, pq);
                if (timed) row.inference_time_s = now_seconds() - t0;
                row.mad_value = mad(est, truth_table);
              } else if (method == "plugin") {
                const double t0 = timed ? now_seconds() : 0.0;
                auto it = estimands.find(text);
                if (it == estimands.end()) {
                  Query q;
                  q.targets = pq.targets;
                  for (std::size_t i = 0; i < pq.do_vars.size(); ++i)
                    q.interventions.push_back({pq.do_vars[i], 0});
                  it = estimands.emplace(text, identify(admg, q)).first;
                }
                if (!it->second.identifiable())
                  throw Error("query is not identifiable from the graph");
                PluginResult pr = eval_estimand_plugin(*it->second.estimand, data);
                Factor est = pr.table;
                if (!pq.sweep && !pq.do_vars.empty()) {
                  std::vector<std::pair<int, int>> fixed;
                  for (std::size_t i = 0; i < pq.do_vars.size(); ++i)
                    fixed.push_back({pq.do_vars[i], pq.do_states[i]});
                  est = factor_restrict(est, fixed);
                }
                // Broadcast over interventions outside the targets' ancestry.
                if (est.scope != truth_table.scope) {
                  Factor ones;
                  ones.scope = truth_table.scope;
                  ones.card = truth_table.card;
                  ones.values.assign(truth_table.values.size(), 1.0);
                  est = factor_product(est, ones);
                }
                if (timed) row.inference_time_s = now_seconds() - t0;
                row.mad_value = mad(est, truth_table);
              } else {  // em4ci
                if (!learn_error.empty()) throw Error(learn_error);
                row.learn_time_s = learn_time;
                row.k_lrn = learned->k_lrn;
                const double t0 = timed ? now_seconds() : 0.0;
                const Factor est = model_table(learned->cbn, pq);
                if (timed) row.inference_time_s = now_seconds() - t0;
                row.mad_value = mad(est, truth_table);
              }
            } catch (const std::exception& e) {
              row.failed = true;
              row.error = e.what();
              row.mad_value = std::nan("");
            }
            rows.push_back(std::move(row));
          }
        }
      }
  }
  return rows;
}

void emit_report(const std::vector<ResultRow>& rows, std::ostream& csv,
                 std::ostream& summary) {
  csv << "model,query,method,m,seed,mad,k_lrn,learn_time_s,inference_time_s\n";
  for (const ResultRow& r : rows) {
    csv << r.model_id << ',' << '"' << r.query << '"' << ',' << r.method << ','
        << r.m << ',' << r.seed << ',';
    if (r.failed)
      csv << "nan";
    else
      csv << format_double(r.mad_value, 9);
    csv << ',';
    if (r.method == "em4ci" && !r.failed) csv << r.k_lrn;
    csv << ',' << format_double(r.learn_time_s, 3) << ','
        << format_double(r.inference_time_s, 3) << '\n';
  }

  struct Group {
    std::vector<double> mads, learns, infers;
    int failures = 0;
  };
  std::map<std::tuple<std::string, std::string, std::string, int>, Group> groups;
  for (const ResultRow& r : rows) {
    Group& g = groups[{r.model_id, r.query, r.method, r.m}];
    if (r.failed) {
      ++g.failures;
      continue;
    }
    g.mads.push_back(r.mad_value);
    g.learns.push_back(r.learn_time_s);
    g.infers.push_back(r.inference_time_s);
  }
  auto mean = [](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto stddev = [&](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mu = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };

  summary << "model  query  method  m  runs  mad(mean+-sd)  learn_s  infer_s\n";
  for (const auto& [key, g] : groups) {
    const auto& [model, query, method, m] = key;
    summary << model << "  \"" << query << "\"  " << method << "  " << m << "  "
            << g.mads.size();
    if (g.failures) summary << " (+" << g.failures << " failed)";
    summary << "  " << format_double(mean(g.mads), 6) << "+-"
            << format_double(stddev(g.mads), 6) << "  "
            << format_double(mean(g.learns), 3) << "  "
            << format_double(mean(g.infers), 3) << '\n';
  }
}

void write_report_files(const std::vector<ResultRow>& rows,
                        const std::string& out_prefix) {
  std::ofstream csv(out_prefix + "results.csv", std::ios::binary);
  if (!csv) throw IoError("cannot write " + out_prefix + "results.csv");
  std::ofstream summary(out_prefix + "summary.txt", std::ios::binary);
  if (!summary) throw IoError("cannot write " + out_prefix + "summary.txt");
  emit_report(rows, csv, summary);
}

std::vector<ResultRow> parse_results_csv(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("results CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "model,query,method,m,seed,mad,k_lrn,learn_time_s,inference_time_s")
    throw ParseError("unexpected results CSV header");
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    // Fields: model,"query",method,m,seed,mad,k_lrn,learn,inference
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
      if (quoted) {
        if (c == '"')
          quoted = false;
        else
          cur += c;
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    fields.push_back(cur);
    if (fields.size() != 9) throw ParseError("bad results CSV row: " + line);
    ResultRow r;
    r.model_id = fields[0];
    r.query = fields[1];
    r.method = fields[2];
    r.m = std::stoi(fields[3]);
    r.seed = std::stoull(fields[4]);
    if (fields[5] == "nan") {
      r.failed = true;
      r.mad_value = std::nan("");
    } else {
      r.mad_value = std::stod(fields[5]);
    }
    r.k_lrn = fields[6].empty() ? 0 : std::stoi(fields[6]);
    r.learn_time_s = std::stod(fields[7]);
    r.inference_time_s = std::stod(fields[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace causalem
