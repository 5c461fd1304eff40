// Copyright 2026 The DCPD Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// File formats. Matrices and tensors are stored as raw little-endian f64 in
// row-major order next to a JSON sidecar `<path>.json`:
//
//   {"dims": [K, L, M] or [rows, cols], "order": "row-major", "dtype": "f64"}
//
// Matrices may also be read from plain CSV (any path ending in ".csv").

#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dcpd/dictionary.hpp"
#include "dcpd/error.hpp"
#include "dcpd/tensor.hpp"

namespace dcpd::io {

using Json = nlohmann::json;
namespace fs = std::filesystem;

inline std::string sidecar_path(const fs::path& data) { return data.string() + ".json"; }

/// Shortest text that parses back to exactly v.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

namespace detail {

inline void write_raw(const fs::path& path, const std::vector<double>& values,
                      const std::vector<Index>& dims, const Json& extra) {
  std::vector<double> le = values;
  if constexpr (std::endian::native == std::endian::big) {
    for (double& v : le) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      bits = __builtin_bswap64(bits);
      std::memcpy(&v, &bits, sizeof bits);
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(le.data()),
            static_cast<std::streamsize>(le.size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path.string());
  Json side = extra.is_object() ? extra : Json::object();
  side["dims"] = dims;
  side["order"] = "row-major";
  side["dtype"] = "f64";
  write_json(sidecar_path(path), side);
}

inline std::pair<std::vector<double>, Json> read_raw(const fs::path& path) {
  const Json side = read_json(sidecar_path(path));
  if (!side.contains("dims") || !side["dims"].is_array()) {
    throw IoError("sidecar of " + path.string() + " lacks a dims array");
  }
  if (side.value("order", "row-major") != "row-major" || side.value("dtype", "f64") != "f64") {
    throw IoError("unsupported layout in sidecar of " + path.string());
  }
  std::size_t count = 1;
  for (const auto& d : side["dims"]) {
    if (!d.is_number_integer() || d.get<long long>() <= 0) {
      throw IoError("invalid dims in sidecar of " + path.string());
    }
    count *= d.get<std::size_t>();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> values(count);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double)) {
    throw IoError(path.string() + ": expected " + std::to_string(count) + " values");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError(path.string() + ": trailing bytes after " + std::to_string(count) + " values");
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (double& v : values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      bits = __builtin_bswap64(bits);
      std::memcpy(&v, &bits, sizeof bits);
    }
  }
  return {std::move(values), side};
}

inline bool is_csv(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv";
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline bool parse_double(const std::string& s, double& v) {
  std::string t = s;
  t.erase(0, t.find_first_not_of(" \t\r"));
  t.erase(t.find_last_not_of(" \t\r") + 1);
  if (t.empty()) return false;
  char* end = nullptr;
  v = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size();
}

}  // namespace detail

inline Matrix read_csv_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    bool numeric = true;
    for (const auto& cell : detail::split(line, ',')) {
      double v;
      if (!detail::parse_double(cell, v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (first) {  // header line
        first = false;
        continue;
      }
      throw IoError(path.string() + ": non-numeric CSV row: " + line);
    }
    first = false;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError(path.string() + ": ragged CSV rows");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path.string() + ": empty CSV");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c)
      m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return m;
}

inline void write_matrix(const fs::path& path, const Matrix& m, const Json& extra = {}) {
  std::vector<double> values(static_cast<std::size_t>(m.size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c)
      values[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  detail::write_raw(path, values, {m.rows(), m.cols()}, extra);
}

/// Reads a matrix and returns the sidecar (empty object for CSV input).
inline std::pair<Matrix, Json> read_matrix_with_meta(const fs::path& path) {
  if (detail::is_csv(path)) {
    Json meta = Json::object();
    if (fs::exists(sidecar_path(path))) meta = read_json(sidecar_path(path));
    return {read_csv_matrix(path), meta};
  }
  auto [values, side] = detail::read_raw(path);
  if (side["dims"].size() != 2) throw IoError(path.string() + ": expected a 2-d matrix");
  const auto rows = side["dims"][0].get<Index>();
  const auto cols = side["dims"][1].get<Index>();
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = values[static_cast<std::size_t>(r * cols + c)];
  return {std::move(m), side};
}

inline Matrix read_matrix(const fs::path& path) { return read_matrix_with_meta(path).first; }

inline void write_tensor(const fs::path& path, const Tensor3& t) {
  detail::write_raw(path, t.values(), {t.K(), t.L(), t.M()}, {});
}

inline Tensor3 read_tensor(const fs::path& path) {
  auto [values, side] = detail::read_raw(path);
  if (side["dims"].size() != 3) throw IoError(path.string() + ": expected a 3-d tensor");
  const Dims dims{side["dims"][0].get<Index>(), side["dims"][1].get<Index>(),
                  side["dims"][2].get<Index>()};
  try {
    return Tensor3(dims, std::move(values));
  } catch (const ModelError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

/// Class labels as `atom_index,label` lines (header optional).
inline std::vector<int> read_class_labels(const fs::path& path, Index num_atoms) {
  const Matrix m = read_csv_matrix(path);
  if (m.cols() != 2) throw IoError(path.string() + ": expected atom_index,label columns");
  std::vector<int> labels(static_cast<std::size_t>(num_atoms), -1);
  for (Index r = 0; r < m.rows(); ++r) {
    const auto atom = static_cast<Index>(m(r, 0));
    if (atom < 0 || atom >= num_atoms) throw IoError(path.string() + ": atom index out of range");
    labels[static_cast<std::size_t>(atom)] = static_cast<int>(m(r, 1));
  }
  return labels;
}

inline void write_class_labels(const fs::path& path, const std::vector<int>& labels) {
  std::string text = "atom_index,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i)
    text += std::to_string(i) + "," + std::to_string(labels[i]) + "\n";
  write_text(path, text);
}

inline Dictionary read_dictionary(const fs::path& atoms,
                                  const std::optional<fs::path>& labels = std::nullopt) {
  Matrix d = read_matrix(atoms);
  std::optional<std::vector<int>> cls;
  if (labels) cls = read_class_labels(*labels, d.cols());
  return Dictionary(std::move(d), std::move(cls));
}

inline Json selection_to_json(const Selection& sel) {
  return Json{{"atoms", sel.indices}, {"signs", sel.signs}};
}

inline Selection selection_from_json(const Json& j) {
  Selection sel;
  try {
    sel.indices = j.at("atoms").get<std::vector<Index>>();
    sel.signs = j.contains("signs") ? j["signs"].get<std::vector<int>>()
                                    : std::vector<int>(sel.indices.size(), 1);
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed selection: ") + e.what());
  }
  return sel;
}

/// Index list as a bare JSON array or {"indices": [...]}.
inline std::vector<Index> read_indices(const fs::path& path) {
  const Json j = read_json(path);
  try {
    if (j.is_array()) return j.get<std::vector<Index>>();
    return j.at("indices").get<std::vector<Index>>();
  } catch (const Json::exception& e) {
    throw IoError(path.string() + ": malformed index list: " + e.what());
  }
}

}  // namespace dcpd::io
