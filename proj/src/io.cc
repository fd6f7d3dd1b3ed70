#include "nearopt/io.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "json.hpp"

namespace nearopt {

using nlohmann::json;

Matrix read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw DomainError(path + ": bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows[0].size()) throw DomainError(path + ": ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(rows.size(), rows[0].size());
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

void write_csv(const std::string& path, const Matrix& m) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw DomainError("cannot write " + path);
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) std::fprintf(f, c ? ",%.17g" : "%.17g", m(r, c));
    std::fputc('\n', f);
  }
  std::fclose(f);
}

namespace {

Matrix parse_matrix(const json& j, int rows, int cols, const std::string& base_dir) {
  if (j.is_string()) {
    std::filesystem::path p(j.get<std::string>());
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    Matrix m = read_csv(p.string());
    require(m.rows() == rows && (cols < 0 || m.cols() == cols), "ellitope: matrix " + p.string() + " has wrong shape");
    return m;
  }
  require(j.is_array(), "ellitope: matrix must be a path or an array");
  if (!j.empty() && j[0].is_array()) {
    require(static_cast<int>(j.size()) == rows, "ellitope: inline matrix has wrong row count");
    const int c = static_cast<int>(j[0].size());
    require(cols < 0 || c == cols, "ellitope: inline matrix has wrong column count");
    Matrix m(rows, c);
    for (int r = 0; r < rows; ++r) {
      require(static_cast<int>(j[r].size()) == c, "ellitope: ragged inline matrix");
      for (int k = 0; k < c; ++k) m(r, k) = j[r][k].get<double>();
    }
    return m;
  }
  require(cols >= 0 && static_cast<int>(j.size()) == rows * cols, "ellitope: flat inline matrix has wrong size");
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = j[r * cols + c].get<double>();
  return m;
}

TSet parse_tset(const json& j, int K) {
  const std::string v = j.at("variant").get<std::string>();
  if (v == "product") {
    std::vector<TSet> parts;
    for (const auto& f : j.at("factors")) parts.push_back(parse_tset(f, f.value("K", 1)));
    return TSet::product(parts);
  }
  if (v == "segment" || v == "UnitSegment") return TSet::unit_segment();
  if (v == "box" || v == "UnitBox") return TSet::unit_box(j.value("K", K));
  if (v == "pnorm" || v == "PNormBall") return TSet::pnorm_ball(j.value("K", K), j.at("p").get<double>());
  throw DomainError("ellitope: unknown tset variant '" + v + "'");
}

json tset_json(const TSet& T) {
  auto one = [](const TFactor& f) {
    json j;
    switch (f.kind) {
      case TSetKind::kUnitSegment: j["variant"] = "segment"; break;
      case TSetKind::kUnitBox: j["variant"] = "box"; break;
      case TSetKind::kPNormBall:
        j["variant"] = "pnorm";
        j["p"] = f.p;
        break;
    }
    j["K"] = f.K;
    return j;
  };
  if (T.is_basic()) return one(T.factors()[0]);
  json j;
  j["variant"] = "product";
  for (const auto& f : T.factors()) j["factors"].push_back(one(f));
  return j;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

RawEllitope parse_ellitope(const std::string& json_text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DomainError(std::string("ellitope: invalid JSON: ") + e.what());
  }
  try {
    const int K = j.at("K").get<int>();
    const auto& Sj = j.at("S");
    require(Sj.is_array() && static_cast<int>(Sj.size()) == K, "ellitope: S must list K matrices");
    const TSet tset = parse_tset(j.at("tset"), K);
    require(tset.K() == K, "ellitope: tset K differs from K");
    // With an injection P (n x n_core), the S_k live in the core dimension.
    const int n = j.at("n").get<int>();
    Matrix P;
    int dim = n;
    if (j.contains("P")) {
      P = parse_matrix(j.at("P"), n, j.value("n_core", -1), base_dir);
      dim = static_cast<int>(P.cols());
    }
    std::vector<Matrix> S;
    for (const auto& s : Sj) S.push_back(parse_matrix(s, dim, dim, base_dir));
    Ellitope core(std::move(S), tset);
    if (P.size() == 0) return RawEllitope::identity(core);
    return RawEllitope{core, P};
  } catch (const json::exception& e) {
    throw DomainError(std::string("ellitope: ") + e.what());
  }
}

RawEllitope read_ellitope(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_ellitope(ss.str(), std::filesystem::path(path).parent_path().string());
}

std::string ellitope_to_json(const RawEllitope& raw) {
  json j;
  j["n"] = raw.n();
  j["K"] = raw.core.K();
  j["tset"] = tset_json(raw.core.tset());
  for (const auto& Sk : raw.core.S()) j["S"].push_back(matrix_json(Sk));
  const bool identity = raw.P.rows() == raw.P.cols() && raw.P.isIdentity(0.0);
  if (!identity) {
    j["n_core"] = raw.core.n();
    j["P"] = matrix_json(raw.P);
  }
  return j.dump(1);
}

}  // namespace nearopt
