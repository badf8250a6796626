#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "sdcar/types.hpp"

namespace sdcar {

using Json = nlohmann::ordered_json;

/// {"rows": r, "cols": c, "data": [[re, im], ...]} in row-major order.
inline Json matrix_to_json(const Matrix& m) {
  Json data = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(Json::array({m(i, j).real(), m(i, j).imag()}));
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Matrix matrix_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
    throw Error(ErrorKind::ParseError, "matrix needs rows, cols and data");
  }
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (!data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw Error(ErrorKind::ParseError, "matrix data has " + std::to_string(data.size()) + " entries, expected " +
                                           std::to_string(rows * cols));
  }
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < rows * cols; ++k) {
    const auto& e = data[static_cast<std::size_t>(k)];
    if (!e.is_array() || e.size() != 2) throw Error(ErrorKind::ParseError, "matrix entry must be [re, im]");
    m(k / cols, k % cols) = Complex(e[0].get<double>(), e[1].get<double>());
  }
  return m;
}

inline Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open matrix file " + path);
  try {
    return matrix_from_json(Json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path + ": " + e.what());
  }
}

inline void write_matrix_file(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::ParseError, "cannot write " + path);
  out << matrix_to_json(m).dump() << '\n';
}

inline Json complex_to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

}  // namespace sdcar
