#include "gdpen/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace gdpen {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool parse_row(const std::string& line, std::vector<double>& out) {
  out.clear();
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const std::string t = trim(cell);
    double v = 0.0;
    const char* end = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(t.data(), end, v);
    if (t.empty() || ec != std::errc() || ptr != end) return false;
    out.push_back(v);
  }
  return !out.empty();
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return in;
}

Matrix from_rows(const std::vector<std::vector<double>>& rows, const std::string& what) {
  if (rows.empty()) return Matrix(0, 0);
  const size_t cols = rows.front().size();
  Matrix m(rows.size(), cols);
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols)
      throw DimensionError(what + ": row " + std::to_string(r) + " has " +
                           std::to_string(rows[r].size()) + " entries, expected " +
                           std::to_string(cols));
    for (size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

Matrix matrix_from_json(const Json& j, const std::filesystem::path& base_dir) {
  if (j.is_string()) {
    std::filesystem::path p = j.get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    return read_matrix(p);
  }
  std::vector<std::vector<double>> rows;
  for (const Json& r : j) rows.push_back(r.get<std::vector<double>>());
  return from_rows(rows, "inline matrix");
}

IndexSet indices(const Json& j, int count) {
  if (j.is_string()) {
    if (j.get<std::string>() != "all") throw Error("index list must be an array or \"all\"");
    IndexSet all(count);
    for (int i = 0; i < count; ++i) all[i] = i;
    return all;
  }
  return j.get<IndexSet>();
}

}  // namespace

Matrix read_csv_matrix(const std::filesystem::path& path) {
  std::ifstream in = open(path);
  std::vector<std::vector<double>> rows;
  std::vector<double> row;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    if (!parse_row(line, row)) {
      if (rows.empty() && lineno == 1) continue;  // header
      throw Error(path.string() + ":" + std::to_string(lineno) + ": not a numeric row");
    }
    rows.push_back(row);
  }
  return from_rows(rows, path.string());
}

void write_csv_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? "," : "") << m(r, c);
    os << '\n';
  }
  write_text(path, os.str());
}

Matrix read_matrix_market(const std::filesystem::path& path) {
  std::ifstream in = open(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": empty file");
  std::string lower = line;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower.rfind("%%matrixmarket", 0) != 0) throw Error(path.string() + ": missing banner");
  const bool coordinate = lower.find("coordinate") != std::string::npos;
  const bool symmetric = lower.find("symmetric") != std::string::npos;
  if (lower.find("complex") != std::string::npos || lower.find("pattern") != std::string::npos)
    throw UnsupportedError(path.string() + ": only real matrices are supported");
  do {
    if (!std::getline(in, line)) throw Error(path.string() + ": missing size line");
  } while (trim(line).empty() || line[0] == '%');
  std::istringstream size(line);
  long rows = 0, cols = 0, nnz = 0;
  size >> rows >> cols;
  if (coordinate) size >> nnz;
  if (!size || rows < 0 || cols < 0) throw Error(path.string() + ": bad size line");
  Matrix m = Matrix::Zero(rows, cols);
  if (coordinate) {
    for (long k = 0; k < nnz; ++k) {
      long i = 0, j = 0;
      double v = 0.0;
      if (!(in >> i >> j >> v)) throw Error(path.string() + ": truncated entries");
      if (i < 1 || i > rows || j < 1 || j > cols) throw Error(path.string() + ": index out of range");
      m(i - 1, j - 1) = v;
      if (symmetric) m(j - 1, i - 1) = v;
    }
  } else {
    for (long j = 0; j < cols; ++j)
      for (long i = symmetric ? j : 0; i < rows; ++i) {
        double v = 0.0;
        if (!(in >> v)) throw Error(path.string() + ": truncated entries");
        m(i, j) = v;
        if (symmetric) m(j, i) = v;
      }
  }
  return m;
}

Matrix read_matrix(const std::filesystem::path& path) {
  if (path.extension() == ".mtx") return read_matrix_market(path);
  return read_csv_matrix(path);
}

Vector read_vector(const std::filesystem::path& path) {
  const Matrix m = read_matrix(path);
  if (m.rows() == 1) return m.row(0).transpose();
  if (m.cols() == 1) return m.col(0);
  throw DimensionError(path.string() + ": expected a single row or column");
}

void write_vector_csv(const std::filesystem::path& path, const Vector& v) {
  write_csv_matrix(path, Matrix(v));
}

PenaltySpec penalty_spec_from_json(const Json& j, const std::filesystem::path& base_dir) {
  PenaltySpec s;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "lasso") {
    s.kind = PenaltyKind::Lasso;
    s.p = j.at("p").get<int>();
    s.active = indices(j.at("active"), s.p);
    if (j.contains("free")) s.free = j.at("free").get<IndexSet>();
  } else if (kind == "group_lasso") {
    s.kind = PenaltyKind::GroupLasso;
    s.p = j.at("p").get<int>();
    s.groups = j.at("groups").get<std::vector<IndexSet>>();
    s.active = indices(j.at("active"), static_cast<int>(s.groups.size()));
    s.duplicate_overlaps = j.value("duplicate_overlaps", false);
    if (j.contains("subspace_basis")) s.subspace_basis = matrix_from_json(j.at("subspace_basis"), base_dir);
  } else if (kind == "analysis") {
    s.kind = PenaltyKind::Analysis;
    s.D = matrix_from_json(j.at("D"), base_dir);
    s.p = static_cast<int>(s.D.cols());
    s.base = std::make_shared<PenaltySpec>(penalty_spec_from_json(j.at("base"), base_dir));
  } else if (kind == "hybrid") {
    s.kind = PenaltyKind::Hybrid;
    s.first = std::make_shared<PenaltySpec>(penalty_spec_from_json(j.at("first"), base_dir));
    s.second = std::make_shared<PenaltySpec>(penalty_spec_from_json(j.at("second"), base_dir));
    s.p = s.first->p + s.second->p;
  } else {
    throw Error("unknown penalty kind '" + kind + "'");
  }
  return s;
}

Penalty read_penalty(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const Json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return make_penalty(penalty_spec_from_json(j, path.parent_path()));
}

}  // namespace gdpen
