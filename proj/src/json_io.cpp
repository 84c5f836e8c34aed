#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "causalem/model.hpp"
#include "json.hpp"

namespace causalem {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) ok = true;
    if (!ok)
      throw ParseError("unknown field '" + it.key() + "' in " + where);
  }
}

std::string fmt_prob(double p) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", p);
  return buf;
}

}  // namespace

Cbn model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("model JSON root must be an object");
  reject_unknown(j, {"variables", "cpts"}, "model root");
  if (!j.contains("variables") || !j["variables"].is_array())
    throw ParseError("model JSON needs a 'variables' array");
  if (!j.contains("cpts") || !j["cpts"].is_array())
    throw ParseError("model JSON needs a 'cpts' array");

  std::vector<Variable> vars;
  std::vector<std::vector<std::string>> parent_names;
  int next_id = 0;
  for (const json& jv : j["variables"]) {
    if (!jv.is_object()) throw ParseError("variable entries must be objects");
    reject_unknown(jv, {"name", "kind", "cardinality", "parents"}, "variable entry");
    Variable v;
    v.id = next_id++;
    if (!jv.contains("name") || !jv["name"].is_string())
      throw ParseError("variable entry missing string 'name'");
    v.name = jv["name"].get<std::string>();
    std::string kind = jv.value("kind", std::string("observed"));
    if (kind == "observed")
      v.kind = VarKind::Observed;
    else if (kind == "latent")
      v.kind = VarKind::Latent;
    else
      throw ParseError("variable '" + v.name + "' has unknown kind '" + kind + "'");
    if (!jv.contains("cardinality") || !jv["cardinality"].is_number_integer())
      throw ParseError("variable '" + v.name + "' missing integer 'cardinality'");
    v.cardinality = jv["cardinality"].get<int>();
    std::vector<std::string> pn;
    if (jv.contains("parents")) {
      if (!jv["parents"].is_array())
        throw ParseError("variable '" + v.name + "' has a non-array 'parents'");
      for (const json& p : jv["parents"]) {
        if (!p.is_string())
          throw ParseError("variable '" + v.name + "' has a non-string parent");
        pn.push_back(p.get<std::string>());
      }
    }
    parent_names.push_back(std::move(pn));
    vars.push_back(std::move(v));
  }

  // Resolve names to ids, then sort each parent list ascending (the storage
  // convention; CPT rows are keyed by ascending-id parent order).
  for (std::size_t i = 0; i < vars.size(); ++i) {
    for (const std::string& name : parent_names[i]) {
      int pid = -1;
      for (const Variable& u : vars)
        if (u.name == name) pid = u.id;
      if (pid < 0)
        throw ParseError("variable '" + vars[i].name + "' lists unknown parent '" +
                         name + "'");
      vars[i].parents.push_back(pid);
    }
    std::sort(vars[i].parents.begin(), vars[i].parents.end());
  }

  CausalDiagram diagram(std::move(vars));

  std::vector<Cpt> cpts(diagram.size());
  std::vector<bool> have(diagram.size(), false);
  for (const json& jc : j["cpts"]) {
    if (!jc.is_object()) throw ParseError("cpt entries must be objects");
    reject_unknown(jc, {"child", "rows"}, "cpt entry");
    if (!jc.contains("child") || !jc["child"].is_string())
      throw ParseError("cpt entry missing string 'child'");
    const int id = diagram.var_id(jc["child"].get<std::string>());
    if (have[id])
      throw ParseError("duplicate cpt for '" + diagram.var(id).name + "'");
    have[id] = true;
    Cpt c;
    c.child = id;
    c.parents = diagram.var(id).parents;
    if (!jc.contains("rows") || !jc["rows"].is_array())
      throw ParseError("cpt for '" + diagram.var(id).name + "' missing 'rows'");
    for (const json& row : jc["rows"]) {
      if (!row.is_array())
        throw ParseError("cpt rows for '" + diagram.var(id).name + "' must be arrays");
      for (const json& p : row) {
        if (!p.is_number())
          throw ParseError("non-numeric probability in cpt for '" +
                           diagram.var(id).name + "'");
        c.values.push_back(p.get<double>());
      }
      if (static_cast<int>(row.size()) != diagram.var(id).cardinality)
        throw ParseError("cpt row for '" + diagram.var(id).name + "' has " +
                         std::to_string(row.size()) + " entries, expected " +
                         std::to_string(diagram.var(id).cardinality));
    }
    cpts[id] = std::move(c);
  }
  for (int i = 0; i < diagram.size(); ++i)
    if (!have[i])
      throw ParseError("missing cpt for '" + diagram.var(i).name + "'");
  return Cbn(std::move(diagram), std::move(cpts));
}

std::string model_to_json(const Cbn& cbn) {
  // Hand-rolled writer: nlohmann would round probabilities through its own
  // formatter, and the format contract pins >= 15 significant digits.
  const CausalDiagram& g = cbn.diagram();
  std::ostringstream out;
  out << "{\n  \"variables\": [\n";
  for (int i = 0; i < g.size(); ++i) {
    const Variable& v = g.var(i);
    out << "    {\"name\": " << json(v.name).dump() << ", \"kind\": \""
        << (v.kind == VarKind::Latent ? "latent" : "observed")
        << "\", \"cardinality\": " << v.cardinality << ", \"parents\": [";
    for (std::size_t p = 0; p < v.parents.size(); ++p) {
      if (p) out << ", ";
      out << json(g.var(v.parents[p]).name).dump();
    }
    out << "]}" << (i + 1 < g.size() ? "," : "") << "\n";
  }
  out << "  ],\n  \"cpts\": [\n";
  for (int i = 0; i < g.size(); ++i) {
    const Cpt& c = cbn.cpt(i);
    const int cs = g.var(i).cardinality;
    const std::size_t rows = c.values.size() / cs;
    out << "    {\"child\": " << json(g.var(i).name).dump() << ", \"rows\": [";
    for (std::size_t r = 0; r < rows; ++r) {
      if (r) out << ", ";
      out << "[";
      for (int s = 0; s < cs; ++s) {
        if (s) out << ", ";
        out << fmt_prob(c.values[r * cs + s]);
      }
      out << "]";
    }
    out << "]}" << (i + 1 < g.size() ? "," : "") << "\n";
  }
  out << "  ]\n}\n";
  return out.str();
}

Cbn load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return model_from_json(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_model(const Cbn& cbn, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file '" + path + "'");
  out << model_to_json(cbn);
  if (!out) throw IoError("failed writing model file '" + path + "'");
}

}  // namespace causalem
