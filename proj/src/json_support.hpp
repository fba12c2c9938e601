#pragma once

// JSON reading helpers shared by the model and gain file loaders.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gridosc/error.hpp"
#include "gridosc/lti_core.hpp"

namespace gridosc::json_support {

using nlohmann::json;

[[noreturn]] inline void schema(const std::string& what) {
  throw Error(ErrorKind::SchemaViolation, what);
}

inline double number_at(const json& v, const std::string& where) {
  if (v.is_number()) {
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw Error(ErrorKind::NonFiniteEntry, where + " is not finite");
    return d;
  }
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    static const std::regex nonfinite("^[+-]?(nan|NaN|NAN|inf|Inf|INF|infinity|Infinity)$");
    if (std::regex_match(s, nonfinite)) throw Error(ErrorKind::NonFiniteEntry, where + " is " + s);
  }
  if (v.is_null()) throw Error(ErrorKind::NonFiniteEntry, where + " is null");
  schema(where + " must be a number");
}

inline int int_at(const json& obj, const char* key) {
  if (!obj.contains(key)) schema(std::string("missing key \"") + key + "\"");
  const json& v = obj.at(key);
  if (!v.is_number_integer()) schema(std::string("\"") + key + "\" must be an integer");
  return v.get<int>();
}

inline Matrix matrix_at(const json& obj, const char* key, Eigen::Index rows, Eigen::Index cols) {
  if (!obj.contains(key)) schema(std::string("missing key \"") + key + "\"");
  const json& v = obj.at(key);
  if (!v.is_array()) schema(std::string("\"") + key + "\" must be an array of rows");
  if (static_cast<Eigen::Index>(v.size()) != rows) {
    schema(std::string("\"") + key + "\" has " + std::to_string(v.size()) + " rows, expected " + std::to_string(rows));
  }
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = v[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      schema(std::string("\"") + key + "\" row " + std::to_string(i) + " must have " + std::to_string(cols) + " entries");
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      out(i, j) = number_at(row[static_cast<size_t>(j)],
                            std::string(key) + "[" + std::to_string(i) + "][" + std::to_string(j) + "]");
    }
  }
  return out;
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Python-style writers emit bare NaN / Infinity tokens, which are not JSON.
    static const std::regex bare_nonfinite(R"((^|[\[,:\s])-?(NaN|Infinity|nan|inf)([\],\s}]|$))");
    if (std::regex_search(text, bare_nonfinite)) {
      throw Error(ErrorKind::NonFiniteEntry, "file contains a non-finite number literal");
    }
    schema(std::string("malformed JSON: ") + e.what());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace gridosc::json_support
