/*
 * Copyright 2026 The sparsekl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "sparsekl/optimize.hpp"
#include "sparsekl/svgp.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sparsekl {

/// Numeric CSV table: a mandatory header row and one row per record.
struct Table {
  std::vector<std::string> header;
  Eigen::MatrixXd values; // rows x header.size()

  /// Position of a named column. Throws DataError if absent.
  Index column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

/// Comma separated, '.' decimal, LF or CRLF line endings. Throws DataError with
/// the 1-based line number on a row length mismatch, an unparsable field or a
/// non-finite value.
Table parse_csv(std::string_view text, std::string_view source = "<memory>");
Table read_csv(const std::filesystem::path &path);

/// Shortest round-trip formatting, so read_csv(write_csv(t)) is bit-identical.
std::string format_csv(const Table &t);
void write_csv(const std::filesystem::path &path, const Table &t);

/// Columns iter, objective, step_scale, grad_norm.
Table trace_table(const std::vector<TraceRow> &trace);

/// Model state as JSON: kernel, features, q_mean, q_chol (row-major), likelihood.
std::string state_to_json(const SVGPState &s);
/// Inverse of state_to_json. Throws DataError on malformed documents.
SVGPState state_from_json(std::string_view text);

void write_text(const std::filesystem::path &path, std::string_view text);
std::string read_text(const std::filesystem::path &path);

} // namespace sparsekl
