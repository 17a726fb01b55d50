// Copyright 2026 The tcprune Authors
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

#pragma once

#include "tcprune/error.hpp"
#include "tcprune/types.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>

namespace tcprune::detail {

using nlohmann::json;

inline json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows()},
              {"cols", m.cols()},
              {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

inline json binary_to_json(const BinaryMatrix& m) {
  std::vector<int> data(m.data(), m.data() + m.size());
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Matrix matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
    throw InputError(where + ": expected {rows, cols, data}");
  }
  const auto rows = j.at("rows").get<long>();
  const auto cols = j.at("cols").get<long>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || !data.is_array() ||
      data.size() != static_cast<std::size_t>(rows * cols)) {
    throw InputError(where + ": data length does not match rows*cols");
  }
  Matrix m(rows, cols);
  for (long i = 0; i < rows * cols; ++i) {
    if (!data[static_cast<std::size_t>(i)].is_number()) {
      throw InputError(where + ": entry " + std::to_string(i) + " is not a number");
    }
    m.data()[i] = data[static_cast<std::size_t>(i)].get<double>();
  }
  return m;
}

inline BinaryMatrix binary_from_json(const json& j, const std::string& where) {
  const Matrix m = matrix_from_json(j, where);
  if (((m.array() != 0.0) && (m.array() != 1.0)).any()) {
    throw InputError(where + ": mask entries must be 0 or 1");
  }
  return m.cast<std::uint8_t>();
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Parses JSON text, reporting failures with a 1-based line number.
inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t pos = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n');
    std::ostringstream msg;
    msg << what << ": parse error at line " << line << ": " << e.what();
    throw InputError(msg.str());
  }
}

// Writes via a sibling temporary so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << text;
    if (!out) throw InputError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InputError("cannot move " + tmp.string() + " to " + path.string());
}

}  // namespace tcprune::detail
