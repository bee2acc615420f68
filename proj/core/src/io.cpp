#include "tropattn/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tropattn/attention.hpp"

namespace tropattn {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return {buf, res.ptr};
}

std::string format_number(const BigInt& x) { return x.str(); }

std::string csv_join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out.push_back(',');
    out += cells[i];
  }
  return out;
}

std::string csv_join(std::initializer_list<std::string> cells) {
  return csv_join(std::vector<std::string>(cells));
}

std::string csv_schema_line(const std::string& schema) { return "# schema: " + schema; }

std::string census_csv_header() { return "N,d,H,d_ff,L,n,seed,n_distinct,n_boundary,lower,upper"; }

std::string census_csv_row(std::uint64_t n_tokens, std::uint64_t dim, std::uint64_t n_heads,
                           std::uint64_t d_ff, std::uint64_t depth, const CensusReport& report,
                           const BigInt& lower, const BigInt& upper) {
  return csv_join({std::to_string(n_tokens), std::to_string(dim), std::to_string(n_heads),
                   std::to_string(d_ff), std::to_string(depth), std::to_string(report.n_samples),
                   std::to_string(report.seed), std::to_string(report.n_distinct),
                   std::to_string(report.n_boundary_discarded), format_number(lower),
                   format_number(upper)});
}

nlohmann::json to_json(const CensusReport& r) {
  return {{"n_samples", r.n_samples},
          {"n_distinct", r.n_distinct},
          {"n_boundary_discarded", r.n_boundary_discarded},
          {"seed", r.seed},
          {"box_lo", to_std(r.box.lo)},
          {"box_hi", to_std(r.box.hi)}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error("matrix must be a JSON array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j.front().size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto row = j.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != cols) throw Error("ragged matrix rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(to_std(m.row(r).transpose()));
  return out;
}

std::vector<Vector> rows_from_json(const nlohmann::json& j) {
  std::vector<Vector> out;
  for (const auto& row : j) out.push_back(to_vector(row.get<std::vector<double>>()));
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << content;
  if (!f) throw Error("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace tropattn
