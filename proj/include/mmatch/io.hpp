#pragma once

// JSON and CSV ingestion/emission for markets, matchings, patterns, output
// functions, couple data and joint tables.

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmatch/association.hpp"
#include "mmatch/market.hpp"

namespace mmatch::io {

using json = nlohmann::ordered_json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(what + ": malformed JSON (" + e.what() + ")");
  }
}

namespace detail {

inline const json& field(const json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key))
    throw DataError(what + ": missing field \"" + key + "\"");
  return j.at(key);
}

inline double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw DataError(what + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw DataError(what + ": non-finite number");
  return v;
}

inline AttrVector vector_of(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw DataError(what + ": expected a non-empty array");
  AttrVector v;
  for (const auto& e : j) v.push_back(number(e, what));
  return v;
}

inline DiscreteMeasure measure_of(const json& j, const std::string& side) {
  if (!j.is_array() || j.empty()) throw DataError(side + ": expected a non-empty atom array");
  DiscreteMeasure d;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string what = side + "[" + std::to_string(k) + "]";
    Atom a{vector_of(field(j[k], "attrs", what), what + ".attrs"),
           number(field(j[k], "mass", what), what + ".mass")};
    if (k == 0) d.dimension = a.attrs.size();
    d.atoms.push_back(std::move(a));
  }
  return d;
}

inline json vector_json(const AttrVector& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

}  // namespace detail

/// Parses a market; duplicate atoms are merged and negative masses or
/// dimension mismatches are rejected.
inline MarketInstance market_from_json(const json& j) {
  MarketInstance m{detail::measure_of(detail::field(j, "firms", "market"), "firms"),
                   detail::measure_of(detail::field(j, "workers", "market"), "workers")};
  return m;
}

inline json to_json(const DiscreteMeasure& d) {
  json a = json::array();
  for (const auto& atom : d.atoms) a.push_back({{"attrs", detail::vector_json(atom.attrs)}, {"mass", atom.mass}});
  return a;
}

inline json to_json(const MarketInstance& m) {
  return {{"firms", to_json(m.firms)}, {"workers", to_json(m.workers)}};
}

inline MatchingMeasure matching_from_json(const json& j) {
  const auto& cells = detail::field(j, "cells", "matching");
  if (!cells.is_array()) throw DataError("matching.cells: expected an array");
  MatchingMeasure M;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const std::string what = "cells[" + std::to_string(k) + "]";
    const auto x = detail::vector_of(detail::field(cells[k], "x", what), what + ".x");
    const auto y = detail::vector_of(detail::field(cells[k], "y", what), what + ".y");
    const double m = detail::number(detail::field(cells[k], "mass", what), what + ".mass");
    if (m < 0.0) throw DataError(what + ": negative mass " + format_number(m));
    M.add(x, y, m);
  }
  return M;
}

inline json to_json(const MatchingMeasure& M) {
  json cells = json::array();
  for (const auto& [c, m] : M.cells())
    cells.push_back({{"x", detail::vector_json(c.x)}, {"y", detail::vector_json(c.y)}, {"mass", m}});
  return {{"cells", cells}};
}

inline ComplementarityPattern pattern_from_json(const json& j) {
  ComplementarityPattern p;
  auto read = [&](const char* key, std::set<std::pair<int, int>>& out) {
    if (!j.contains(key)) return;
    const auto& arr = j.at(key);
    if (!arr.is_array()) throw DataError(std::string("pattern.") + key + ": expected an array");
    for (const auto& e : arr) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
        throw DataError(std::string("pattern.") + key + ": entries must be [i,j] integer pairs");
      out.emplace(e[0].get<int>(), e[1].get<int>());
    }
  };
  if (!j.is_object()) throw DataError("pattern: expected an object");
  read("P", p.P);
  read("N", p.N);
  return p;
}

inline json to_json(const ComplementarityPattern& p) {
  json P = json::array(), N = json::array();
  for (const auto& [i, k] : p.P) P.push_back({i, k});
  for (const auto& [i, k] : p.N) N.push_back({i, k});
  return {{"P", P}, {"N", N}};
}

inline Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw DataError(what + ": expected a non-empty matrix");
  Matrix m;
  for (const auto& row : j) m.push_back(detail::vector_of(row, what));
  for (const auto& row : m)
    if (row.size() != m.front().size()) throw DataError(what + ": ragged matrix");
  return m;
}

/// {"quadratic": [[...]]} (alias "theta") or {"tabulated": [{"x","y","q"}]}.
inline OutputSpec output_from_json(const json& j) {
  if (j.is_object() && j.contains("quadratic"))
    return OutputSpec::quadratic(matrix_from_json(j.at("quadratic"), "quadratic"));
  if (j.is_object() && j.contains("theta"))
    return OutputSpec::quadratic(matrix_from_json(j.at("theta"), "theta"));
  if (j.is_object() && j.contains("tabulated")) {
    std::map<Couple, double> t;
    const auto& arr = j.at("tabulated");
    if (!arr.is_array()) throw DataError("tabulated: expected an array");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const std::string what = "tabulated[" + std::to_string(k) + "]";
      t[{detail::vector_of(detail::field(arr[k], "x", what), what + ".x"),
         detail::vector_of(detail::field(arr[k], "y", what), what + ".y")}] =
          detail::number(detail::field(arr[k], "q", what), what + ".q");
    }
    return OutputSpec::tabulated(std::move(t));
  }
  throw DataError("output: expected \"quadratic\", \"theta\" or \"tabulated\"");
}

inline json to_json(const OutputSpec& Q) {
  if (Q.is_quadratic()) return {{"quadratic", Q.theta()}};
  if (Q.is_tabulated()) {
    json arr = json::array();
    for (const auto& [c, v] : Q.table())
      arr.push_back({{"x", detail::vector_json(c.x)}, {"y", detail::vector_json(c.y)}, {"q", v}});
    return {{"tabulated", arr}};
  }
  throw DataError("function-valued output has no JSON form");
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double csv_number(const std::string& s, std::size_t line, std::size_t col) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line) + ", column " + std::to_string(col) +
                    ": non-numeric cell \"" + s + "\"");
  }
}

/// Non-empty lines with their 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::string>> csv_lines(const std::string& text) {
  std::vector<std::pair<std::size_t, std::string>> out;
  std::istringstream ss(text);
  std::string line;
  std::size_t no = 0;
  while (std::getline(ss, line)) {
    ++no;
    if (!trim(line).empty()) out.emplace_back(no, line);
  }
  return out;
}

}  // namespace detail

struct CoupleParse {
  CoupleDataset data;
  std::vector<std::string> warnings;
};

/// Couples CSV: header `weight,x_1..x_K,y_1..y_L` or with attribute labels
/// such as `weight,x_E,x_H,y_E,y_H`. Columns labelled E or H are checked
/// against the 1..5 category range (warnings, not errors).
inline CoupleParse parse_couples(const std::string& text) {
  const auto lines = detail::csv_lines(text);
  if (lines.empty()) throw DataError("couples file is empty");
  const auto header = detail::split_csv(lines.front().second);
  if (header.empty() || header[0] != "weight")
    throw DataError("line " + std::to_string(lines.front().first) +
                    ": missing header (expected weight,x_...,y_...)");
  CoupleParse out;
  std::vector<int> side(header.size(), 0);  // 1: x, 2: y
  std::vector<bool> ranged(header.size(), false);
  for (std::size_t c = 1; c < header.size(); ++c) {
    const auto& h = header[c];
    if (h.rfind("x_", 0) == 0) {
      side[c] = 1;
      out.data.x_labels.push_back(h.substr(2));
    } else if (h.rfind("y_", 0) == 0) {
      side[c] = 2;
      out.data.y_labels.push_back(h.substr(2));
    } else {
      throw DataError("line " + std::to_string(lines.front().first) + ": unknown column \"" + h + "\"");
    }
    const auto label = h.substr(2);
    ranged[c] = label == "E" || label == "H";
  }
  if (out.data.x_labels.empty() || out.data.y_labels.empty())
    throw DataError("header needs at least one x_ and one y_ column");
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto& [no, line] = lines[k];
    const auto cells = detail::split_csv(line);
    if (cells.size() != header.size())
      throw DataError("line " + std::to_string(no) + ": expected " + std::to_string(header.size()) +
                      " cells, found " + std::to_string(cells.size()));
    CoupleRecord rec;
    rec.weight = detail::csv_number(cells[0], no, 1);
    if (rec.weight < 0.0) throw DataError("line " + std::to_string(no) + ": negative weight");
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const double v = detail::csv_number(cells[c], no, c + 1);
      if (ranged[c] && (v < 1.0 || v > 5.0 || v != std::round(v)))
        out.warnings.push_back("line " + std::to_string(no) + ": " + header[c] + "=" +
                               format_number(v) + " outside the 1..5 category range");
      (side[c] == 1 ? rec.x : rec.y).push_back(v);
    }
    out.data.records.push_back(std::move(rec));
  }
  if (out.data.records.empty()) throw DataError("couples file has a header but no records");
  return out;
}

/// Joint-table CSV: header `row,<column values>`, then `<row value>,<masses>`.
inline BivariateTable parse_joint_table(const std::string& text) {
  const auto lines = detail::csv_lines(text);
  if (lines.empty()) throw DataError("joint table file is empty");
  const auto header = detail::split_csv(lines.front().second);
  if (header.size() < 2) throw DataError("line 1: joint table header needs column values");
  BivariateTable t;
  for (std::size_t c = 1; c < header.size(); ++c)
    t.cols.push_back(detail::csv_number(header[c], lines.front().first, c + 1));
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto& [no, line] = lines[k];
    const auto cells = detail::split_csv(line);
    if (cells.size() != header.size())
      throw DataError("line " + std::to_string(no) + ": expected " + std::to_string(header.size()) +
                      " cells, found " + std::to_string(cells.size()));
    t.rows.push_back(detail::csv_number(cells[0], no, 1));
    std::vector<double> row;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const double v = detail::csv_number(cells[c], no, c + 1);
      if (v < 0.0) throw DataError("line " + std::to_string(no) + ": negative mass");
      row.push_back(v);
    }
    t.mass.push_back(std::move(row));
  }
  if (t.rows.empty()) throw DataError("joint table has no rows");
  for (std::size_t i = 1; i < t.rows.size(); ++i)
    if (!(t.rows[i] > t.rows[i - 1])) throw DataError("joint table rows must be increasing");
  for (std::size_t i = 1; i < t.cols.size(); ++i)
    if (!(t.cols[i] > t.cols[i - 1])) throw DataError("joint table columns must be increasing");
  return t;
}

}  // namespace mmatch::io
