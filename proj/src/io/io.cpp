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

#include "sparsekl/io.hpp"

#include "sparsekl/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sparsekl {

using nlohmann::json;

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line);
}

} // namespace

Index Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<Index>(i);
  }
  throw DataError("missing column '" + std::string(name) + "'");
}

bool Table::has_column(std::string_view name) const {
  for (const auto &h : header) {
    if (h == name) return true;
  }
  return false;
}

Table parse_csv(std::string_view text, std::string_view source) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  Table t;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (!have_header) {
      for (auto f : fields) {
        const auto name = trim(f);
        if (name.empty()) throw DataError(where(source, line_no) + ": empty column name in header");
        t.header.emplace_back(name);
      }
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw DataError(where(source, line_no) + ": expected " + std::to_string(t.header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      std::string_view f = trim(fields[c]);
      if (!f.empty() && f.front() == '+') f.remove_prefix(1);
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw DataError(where(source, line_no) + ": column '" + t.header[c] + "' is not a number: '" +
                        std::string(f) + "'");
      }
      if (!std::isfinite(v)) {
        throw DataError(where(source, line_no) + ": column '" + t.header[c] + "' is not finite");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw DataError(std::string(source) + ": missing header row");
  t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(t.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) t.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return t;
}

Table read_csv(const std::filesystem::path &path) { return parse_csv(read_text(path), path.string()); }

std::string format_csv(const Table &t) {
  if (t.values.cols() != static_cast<Index>(t.header.size())) {
    throw DimensionError("CSV table has " + std::to_string(t.header.size()) + " names but " +
                         std::to_string(t.values.cols()) + " columns");
  }
  std::string out;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (j > 0) out += ',';
    out += t.header[j];
  }
  out += '\n';
  for (Index i = 0; i < t.values.rows(); ++i) {
    for (Index j = 0; j < t.values.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(t.values(i, j));
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::filesystem::path &path, const Table &t) { write_text(path, format_csv(t)); }

Table trace_table(const std::vector<TraceRow> &trace) {
  Table t{{"iter", "objective", "step_scale", "grad_norm"}, Eigen::MatrixXd(static_cast<Index>(trace.size()), 4)};
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto r = static_cast<Index>(i);
    t.values(r, 0) = trace[i].iter;
    t.values(r, 1) = trace[i].objective;
    t.values(r, 2) = trace[i].step_scale;
    t.values(r, 3) = trace[i].grad_norm;
  }
  return t;
}

namespace {

json vec_json(const Eigen::VectorXd &v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd json_vec(const json &j, const char *what) {
  if (!j.is_array()) throw DataError(std::string("checkpoint: '") + what + "' must be an array");
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw DataError(std::string("checkpoint: '") + what + "' must hold numbers");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

const json &field(const json &j, const char *key) {
  if (!j.is_object() || !j.contains(key)) throw DataError(std::string("checkpoint: missing '") + key + "'");
  return j.at(key);
}

double number(const json &j, const char *key) {
  const json &v = field(j, key);
  if (!v.is_number()) throw DataError(std::string("checkpoint: '") + key + "' must be a number");
  return v.get<double>();
}

} // namespace

std::string state_to_json(const SVGPState &s) {
  json doc;
  doc["kernel"] = {{"family", "squared_exponential"},
                   {"variance", s.kernel.variance()},
                   {"lengthscales", vec_json(s.kernel.lengthscales())},
                   {"mean_const", s.kernel.mean_const()}};
  json feats = json::array();
  for (const auto &f : s.features) {
    if (const auto *p = std::get_if<PointFeature>(&f)) {
      feats.push_back({{"type", "point"}, {"loc", vec_json(p->location)}});
    } else {
      const auto &w = std::get<GaussianWindowFeature>(f);
      feats.push_back({{"type", "gwindow"}, {"center", vec_json(w.center)}, {"widths", vec_json(w.widths)}});
    }
  }
  doc["features"] = feats;
  doc["q_mean"] = vec_json(s.q_mean);
  std::vector<double> chol;
  for (Index i = 0; i < s.q_chol.rows(); ++i)
    for (Index j = 0; j < s.q_chol.cols(); ++j) chol.push_back(s.q_chol(i, j));
  doc["q_chol"] = chol;
  json lik;
  if (const auto *g = std::get_if<GaussianNoise>(&s.likelihood)) {
    lik = {{"type", "gaussian"}, {"noise_var", g->noise_var}};
  } else if (const auto *p = std::get_if<PoissonExp>(&s.likelihood)) {
    lik = {{"type", "poisson"}, {"bin_width", p->bin_width}};
  } else {
    lik = {{"type", "bernoulli"}};
  }
  doc["likelihood"] = lik;
  return doc.dump(2) + "\n";
}

SVGPState state_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  try {
    const json &kj = field(doc, "kernel");
    Kernel kernel(number(kj, "variance"), json_vec(field(kj, "lengthscales"), "lengthscales"),
                  number(kj, "mean_const"));
    std::vector<InducingFeature> features;
    const json &fj = field(doc, "features");
    if (!fj.is_array()) throw DataError("checkpoint: 'features' must be an array");
    for (const auto &f : fj) {
      const std::string type = field(f, "type").get<std::string>();
      if (type == "point") {
        features.push_back(point_feature(json_vec(field(f, "loc"), "loc")));
      } else if (type == "gwindow") {
        features.push_back(gaussian_window(json_vec(field(f, "center"), "center"), json_vec(field(f, "widths"), "widths")));
      } else {
        throw DataError("checkpoint: unknown feature type '" + type + "'");
      }
    }
    const Eigen::VectorXd q_mean = json_vec(field(doc, "q_mean"), "q_mean");
    const Eigen::VectorXd chol = json_vec(field(doc, "q_chol"), "q_chol");
    const Index m = q_mean.size();
    if (chol.size() != m * m) throw DataError("checkpoint: 'q_chol' must hold M*M entries");
    Eigen::MatrixXd L(m, m);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < m; ++j) L(i, j) = chol[i * m + j];
    const json &lj = field(doc, "likelihood");
    const std::string lt = field(lj, "type").get<std::string>();
    Likelihood lik;
    if (lt == "gaussian") lik = GaussianNoise{number(lj, "noise_var")};
    else if (lt == "poisson") lik = PoissonExp{number(lj, "bin_width")};
    else if (lt == "bernoulli") lik = BernoulliProbit{};
    else throw DataError("checkpoint: unknown likelihood '" + lt + "'");
    SVGPState s{std::move(features), q_mean, L, kernel, lik};
    s.validate();
    return s;
  } catch (const json::exception &e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  } catch (const InvalidArgument &e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  } catch (const DimensionError &e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

void write_text(const std::filesystem::path &path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace sparsekl
