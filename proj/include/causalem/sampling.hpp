#ifndef CAUSALEM_SAMPLING_HPP
#define CAUSALEM_SAMPLING_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "causalem/model.hpp"

namespace causalem {

// Observed-variable samples; latent columns never appear. Rows are stored
// flattened, n_cols() entries per row.
struct Dataset {
  std::vector<int> var_ids;  // ascending observed ids
  std::vector<int> cards;    // parallel to var_ids
  std::vector<int> rows;

  int n_cols() const { return static_cast<int>(var_ids.size()); }
  int n_rows() const {
    return var_ids.empty() ? 0 : static_cast<int>(rows.size()) / n_cols();
  }
  int at(int row, int col) const { return rows[static_cast<std::size_t>(row) * n_cols() + col]; }
};

enum class Family {
  Chain,      // odd n: observed path V0->...->V_{n-1}, confounders on even pairs
  Diamond,    // n = 4k+1: serial rhombus units with two confounders each
  ConeCloud,  // triangular n = r(r+1)/2: grid converging on apex V0
  Model1, Model2, Model3, Model3Prime, Model4,
  Model5, Model6, Model7, Model8,
};

Family family_from_string(const std::string& s);  // throws ParseError
std::string family_to_string(Family f);

struct GenSpec {
  Family family = Family::Chain;
  int n = 0;       // node count for the scalable families; ignored for Model1..8
  int d = 2;       // observed cardinality
  int k = 2;       // latent cardinality
  std::uint64_t seed = 0;
};

// Fixture topology for the requested family. Observed variables get ids/names
// V0..V_{n-1} (the small models use their literature names); latents are
// appended as U0, U1, ... Throws UnsupportedSize when n is not one of the
// family's legal sizes.
CausalDiagram generate_structure(const GenSpec& spec);

// Default benchmark query for a generated structure, as CLI query text
// (sweep form), e.g. "P(V6 | do(V0))".
std::string default_query_text(const GenSpec& spec);

// Dirichlet CPTs: observed cardinalities set to d, latent to k, every CPT
// column drawn from Dirichlet(alpha) with alpha_i ~ Uniform[1e-3, 1) fresh
// per column. Deterministic given seed.
Cbn random_cpts(const CausalDiagram& diagram, int d, int k, std::uint64_t seed);

// m ancestral-sampling rows from the full joint; latent columns dropped.
Dataset forward_sample(const Cbn& cbn, int m, std::uint64_t seed);

// Data CSV: header of observed names in ascending-id order, then integer
// state rows; LF line endings. Reading validates names against the diagram
// and state ranges against the cardinalities.
void write_data_csv(const Dataset& data, const CausalDiagram& diagram,
                    const std::string& path);
Dataset read_data_csv(const std::string& path, const CausalDiagram& diagram);

}  // namespace causalem

#endif
