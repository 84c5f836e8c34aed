#include "causalem/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "causalem/rng.hpp"

namespace causalem {

namespace {

// Accumulates a structure as observed vars (ids 0..n-1, in listed order) plus
// latents appended afterwards, each latent naming its observed children.
struct StructureBuilder {
  std::vector<std::string> names;
  std::vector<std::vector<int>> parents;        // observed -> observed
  std::vector<std::vector<int>> latent_children;

  int add(const std::string& name, std::vector<int> par = {}) {
    names.push_back(name);
    parents.push_back(std::move(par));
    return static_cast<int>(names.size()) - 1;
  }
  void confound(int a, int b) { latent_children.push_back({a, b}); }

  CausalDiagram build(int d, int k) const {
    const int n = static_cast<int>(names.size());
    std::vector<Variable> vars(n + latent_children.size());
    for (int i = 0; i < n; ++i) {
      vars[i].id = i;
      vars[i].name = names[i];
      vars[i].cardinality = d;
      vars[i].kind = VarKind::Observed;
      vars[i].parents = parents[i];
      std::sort(vars[i].parents.begin(), vars[i].parents.end());
    }
    for (std::size_t u = 0; u < latent_children.size(); ++u) {
      const int id = n + static_cast<int>(u);
      vars[id].id = id;
      vars[id].name = "U" + std::to_string(u);
      vars[id].cardinality = k;
      vars[id].kind = VarKind::Latent;
      for (int c : latent_children[u]) {
        vars[c].parents.push_back(id);
        std::sort(vars[c].parents.begin(), vars[c].parents.end());
      }
    }
    return CausalDiagram(std::move(vars));
  }
};

StructureBuilder chain_structure(int n) {
  if (n < 3 || n % 2 == 0)
    throw UnsupportedSize("chain size must be odd and >= 3, got " + std::to_string(n));
  StructureBuilder b;
  for (int i = 0; i < n; ++i)
    b.add("V" + std::to_string(i), i ? std::vector<int>{i - 1} : std::vector<int>{});
  // Confounders link consecutive even-indexed nodes; V1,V3,... stay
  // unconfounded, which is what makes the sink query identifiable.
  for (int j = 0; 2 * j + 2 <= n - 1; ++j) b.confound(2 * j, 2 * j + 2);
  return b;
}

StructureBuilder diamond_structure(int n) {
  if (n < 5 || n % 4 != 1)
    throw UnsupportedSize("diamond size must be 4k+1 and >= 5, got " + std::to_string(n));
  StructureBuilder b;
  for (int i = 0; i < n; ++i) b.add("V" + std::to_string(i));
  const int units = (n - 1) / 4;
  for (int j = 0; j < units; ++j) {
    const int t = 4 * j, l = 4 * j + 1, r = 4 * j + 2, bo = 4 * j + 3, nx = 4 * j + 4;
    b.parents[l] = {t};
    b.parents[r] = {t};
    b.parents[bo] = {l, r};
    b.parents[nx] = {bo};
    b.confound(t, r);
    b.confound(r, nx);
  }
  return b;
}

StructureBuilder cone_cloud_structure(int n) {
  int r = 0;
  while (r * (r + 1) / 2 < n) ++r;
  if (r * (r + 1) / 2 != n || r < 2)
    throw UnsupportedSize("cone-cloud size must be triangular (6, 15, 45, ...), got " +
                          std::to_string(n));
  auto id = [](int row, int j) { return row * (row - 1) / 2 + j; };
  StructureBuilder b;
  for (int row = 1; row <= r; ++row)
    for (int j = 0; j < row; ++j) b.add("V" + std::to_string(id(row, j)));
  // Edges point upward: node (row,j) feeds (row-1,j-1) and (row-1,j), so the
  // bottom row is parentless and everything funnels into the apex V0.
  for (int row = 1; row < r; ++row)
    for (int j = 0; j < row; ++j) b.parents[id(row, j)] = {id(row + 1, j), id(row + 1, j + 1)};
  // Within-row sibling confounders, skipping each row's first node.
  for (int row = 1; row <= r; ++row)
    for (int t = 0; 2 * t + 2 <= row - 1; ++t)
      b.confound(id(row, 2 * t + 1), id(row, 2 * t + 2));
  return b;
}

StructureBuilder model_structure(Family f) {
  StructureBuilder b;
  switch (f) {
    case Family::Model1: {  // napkin
      const int w = b.add("W");
      const int r = b.add("R", {w});
      const int x = b.add("X", {r});
      const int y = b.add("Y", {x});
      b.confound(w, x);
      b.confound(w, y);
      break;
    }
    case Family::Model2: {
      const int x1 = b.add("X1");
      const int r = b.add("R", {x1});
      const int z = b.add("Z", {r});
      const int x2 = b.add("X2");
      const int y = b.add("Y", {z, x2});
      b.confound(x1, z);
      b.confound(z, y);
      break;
    }
    case Family::Model3: {
      const int x = b.add("X");
      const int y = b.add("Y");
      b.add("Z", {x, y});
      b.confound(x, y);
      break;
    }
    case Family::Model3Prime: {
      const int x = b.add("X");
      const int z = b.add("Z", {x});
      const int y = b.add("Y", {z});
      b.confound(x, y);
      break;
    }
    case Family::Model4: {
      const int x1 = b.add("X1");
      const int r = b.add("R", {x1});
      const int z = b.add("Z");
      const int x2 = b.add("X2");
      const int x3 = b.add("X3", {z, x2});
      b.add("S", {x2, x3});
      const int y = b.add("Y", {r, z, x2});
      b.confound(x1, z);
      b.confound(z, y);
      b.confound(x3, z);
      break;
    }
    case Family::Model5: {
      const int z2 = b.add("Z2");
      const int x = b.add("X", {z2});
      const int z1 = b.add("Z1", {z2, x});
      const int z3 = b.add("Z3", {z2});
      const int y = b.add("Y", {z1, z3});
      b.confound(x, y);
      break;
    }
    case Family::Model6: {
      const int z2 = b.add("Z2");
      const int x1 = b.add("X1", {z2});
      const int x2 = b.add("X2");
      b.add("Y", {z2, x1, x2});
      b.confound(x1, x2);
      break;
    }
    case Family::Model7: {
      const int z2 = b.add("Z2");
      const int z3 = b.add("Z3");
      const int x1 = b.add("X1", {z2});
      const int x2 = b.add("X2", {z3});
      b.add("Y", {z2, z3, x1, x2});
      b.confound(x1, x2);
      b.confound(z2, z3);
      break;
    }
    case Family::Model8: {
      const int w = b.add("W");
      const int r = b.add("R", {w});
      const int x = b.add("X", {w, r});
      const int z = b.add("Z", {x});
      const int y = b.add("Y", {r, z});
      b.confound(x, y);
      break;
    }
    default:
      throw UnsupportedSize("not a fixed-size model family");
  }
  return b;
}

}  // namespace

Family family_from_string(const std::string& s) {
  if (s == "chain") return Family::Chain;
  if (s == "diamond") return Family::Diamond;
  if (s == "cone_cloud" || s == "cone-cloud") return Family::ConeCloud;
  if (s == "m1" || s == "model1") return Family::Model1;
  if (s == "m2" || s == "model2") return Family::Model2;
  if (s == "m3" || s == "model3") return Family::Model3;
  if (s == "m3prime" || s == "model3prime" || s == "m3'") return Family::Model3Prime;
  if (s == "m4" || s == "model4") return Family::Model4;
  if (s == "m5" || s == "model5") return Family::Model5;
  if (s == "m6" || s == "model6") return Family::Model6;
  if (s == "m7" || s == "model7") return Family::Model7;
  if (s == "m8" || s == "model8") return Family::Model8;
  throw ParseError("unknown family '" + s + "'");
}

std::string family_to_string(Family f) {
  switch (f) {
    case Family::Chain: return "chain";
    case Family::Diamond: return "diamond";
    case Family::ConeCloud: return "cone_cloud";
    case Family::Model1: return "m1";
    case Family::Model2: return "m2";
    case Family::Model3: return "m3";
    case Family::Model3Prime: return "m3prime";
    case Family::Model4: return "m4";
    case Family::Model5: return "m5";
    case Family::Model6: return "m6";
    case Family::Model7: return "m7";
    case Family::Model8: return "m8";
  }
  return "?";
}

CausalDiagram generate_structure(const GenSpec& spec) {
  if (spec.d < 2) throw UnsupportedSize("observed cardinality must be >= 2");
  if (spec.k < 2) throw UnsupportedSize("latent cardinality must be >= 2");
  switch (spec.family) {
    case Family::Chain:
      return chain_structure(spec.n).build(spec.d, spec.k);
    case Family::Diamond:
      return diamond_structure(spec.n).build(spec.d, spec.k);
    case Family::ConeCloud:
      return cone_cloud_structure(spec.n).build(spec.d, spec.k);
    default:
      return model_structure(spec.family).build(spec.d, spec.k);
  }
}

std::string default_query_text(const GenSpec& spec) {
  switch (spec.family) {
    case Family::Chain:
    case Family::Diamond:
      return "P(V" + std::to_string(spec.n - 1) + " | do(V0))";
    case Family::ConeCloud:
      if (spec.n == 45) return "P(V0 | do(V14, V36, V44))";
      return "P(V0 | do(V" + std::to_string(spec.n - 1) + "))";
    case Family::Model2:
    case Family::Model6:
    case Family::Model7:
      return "P(Y | do(X1, X2))";
    case Family::Model4:
      return "P(Y | do(X1, X2, X3))";
    default:
      return "P(Y | do(X))";
  }
}

Cbn random_cpts(const CausalDiagram& diagram, int d, int k, std::uint64_t seed) {
  if (d < 2 || k < 2)
    throw UnsupportedSize("random_cpts requires cardinalities >= 2");
  std::vector<Variable> vars = diagram.variables();
  for (Variable& v : vars)
    v.cardinality = (v.kind == VarKind::Latent) ? k : d;
  CausalDiagram g(std::move(vars));

  const Rng master(seed);
  std::vector<Cpt> cpts(g.size());
  std::vector<double> alpha, column;
  for (int i = 0; i < g.size(); ++i) {
    const Variable& v = g.var(i);
    Cpt c;
    c.child = i;
    c.parents = v.parents;
    std::size_t rows = 1;
    for (int p : c.parents) rows *= static_cast<std::size_t>(g.var(p).cardinality);
    c.values.resize(rows * static_cast<std::size_t>(v.cardinality));
    for (std::size_t r = 0; r < rows; ++r) {
      Rng rng = master.derive("cpt-column", static_cast<std::uint64_t>(i), r);
      alpha.resize(v.cardinality);
      // Fresh near-edge-of-simplex concentration per column.
      for (double& a : alpha) a = 1e-3 + (1.0 - 1e-3) * rng.uniform01();
      rng.dirichlet(alpha, column);
      for (int s = 0; s < v.cardinality; ++s) c.values[r * v.cardinality + s] = column[s];
    }
    cpts[i] = std::move(c);
  }
  return Cbn(std::move(g), std::move(cpts));
}

Dataset forward_sample(const Cbn& cbn, int m, std::uint64_t seed) {
  if (m < 1) throw DegenerateData("forward_sample needs m >= 1");
  const CausalDiagram& g = cbn.diagram();
  const std::vector<int> topo = g.topological_order();
  const std::vector<int> obs = g.observed_ids();

  Dataset out;
  out.var_ids = obs;
  for (int v : obs) out.cards.push_back(g.var(v).cardinality);
  out.rows.reserve(static_cast<std::size_t>(m) * obs.size());

  const Rng master(seed);
  std::vector<int> cfg(g.size(), 0);
  for (int r = 0; r < m; ++r) {
    Rng rng = master.derive("row", static_cast<std::uint64_t>(r));
    for (int v : topo) {
      const Cpt& c = cbn.cpt(v);
      std::size_t row = 0;
      for (int p : c.parents)
        row = row * static_cast<std::size_t>(g.var(p).cardinality) +
              static_cast<std::size_t>(cfg[p]);
      const int cs = g.var(v).cardinality;
      const double u = rng.uniform01();
      double cum = 0.0;
      int s = cs - 1;  // fallback against floating-point shortfall
      for (int t = 0; t < cs; ++t) {
        cum += c.values[row * cs + t];
        if (u < cum) {
          s = t;
          break;
        }
      }
      cfg[v] = s;
    }
    for (int v : obs) out.rows.push_back(cfg[v]);
  }
  return out;
}

}  // namespace causalem
