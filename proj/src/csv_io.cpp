#include <fstream>
#include <sstream>

#include "causalem/sampling.hpp"

namespace causalem {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

void write_data_csv(const Dataset& data, const CausalDiagram& diagram,
                    const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write data file '" + path + "'");
  for (int c = 0; c < data.n_cols(); ++c)
    out << (c ? "," : "") << diagram.var(data.var_ids[c]).name;
  out << "\n";
  for (int r = 0; r < data.n_rows(); ++r) {
    for (int c = 0; c < data.n_cols(); ++c)
      out << (c ? "," : "") << data.at(r, c);
    out << "\n";
  }
  if (!out) throw IoError("failed writing data file '" + path + "'");
}

Dataset read_data_csv(const std::string& path, const CausalDiagram& diagram) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open data file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty data file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_csv_line(line);
  Dataset out;
  for (const std::string& name : header) {
    const int id = diagram.var_id(name);  // throws UnknownVariable
    if (diagram.var(id).kind != VarKind::Observed)
      throw ParseError(path + ": column '" + name + "' is a latent variable");
    out.var_ids.push_back(id);
    out.cards.push_back(diagram.var(id).cardinality);
  }
  for (std::size_t c = 1; c < out.var_ids.size(); ++c)
    if (out.var_ids[c] <= out.var_ids[c - 1])
      throw ParseError(path + ": columns must be in ascending variable order");

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != out.var_ids.size())
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(out.var_ids.size()) + " fields, got " +
                       std::to_string(fields.size()));
    for (std::size_t c = 0; c < fields.size(); ++c) {
      int v;
      try {
        std::size_t pos = 0;
        v = std::stoi(fields[c], &pos);
        if (pos != fields[c].size()) throw std::invalid_argument(fields[c]);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(lineno) +
                         ": non-integer state '" + fields[c] + "'");
      }
      if (v < 0 || v >= out.cards[c])
        throw StateOutOfRange(path + ":" + std::to_string(lineno) + ": state " +
                              std::to_string(v) + " outside domain of '" +
                              header[c] + "'");
      out.rows.push_back(v);
    }
  }
  return out;
}

}  // namespace causalem
