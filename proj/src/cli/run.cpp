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

#include "sparsekl/cli.hpp"

#include "sparsekl/errors.hpp"
#include "sparsekl/features.hpp"
#include "sparsekl/io.hpp"
#include "sparsekl/quadrature.hpp"
#include "sparsekl/svgp.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace sparsekl {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view task_name(Task t) {
  switch (t) {
  case Task::FitRegression: return "fit-regression";
  case Task::FitClassification: return "fit-classification";
  case Task::FitCox: return "fit-cox";
  case Task::Verify: return "verify";
  case Task::Generate: return "generate";
  }
  return "?";
}

Task parse_task(std::string_view name) {
  for (Task t : {Task::FitRegression, Task::FitClassification, Task::FitCox, Task::Verify, Task::Generate}) {
    if (task_name(t) == name) return t;
  }
  throw ConfigError("unknown task '" + std::string(name) +
                    "' (expected fit-regression, fit-classification, fit-cox, verify or generate)");
}

namespace {

// ---- config parsing ----

void check_keys(const json &obj, std::initializer_list<std::string_view> allowed, const std::string &where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  std::string unknown;
  for (const auto &[key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) throw ConfigError("unknown keys in " + where + ": " + unknown);
}

double get_number(const json &obj, const char *key, const std::string &where) {
  const json &v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(where + "." + key + " must be finite");
  return x;
}

double get_positive(const json &obj, const char *key, const std::string &where) {
  const double x = get_number(obj, key, where);
  if (!(x > 0.0)) throw ConfigError(where + "." + key + " must be positive");
  return x;
}

long long get_integer(const json &obj, const char *key, const std::string &where, long long lo) {
  const json &v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key + " must be an integer");
  const long long x = v.get<long long>();
  if (x < lo) throw ConfigError(where + "." + key + " must be at least " + std::to_string(lo));
  return x;
}

bool get_bool(const json &obj, const char *key, const std::string &where) {
  const json &v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(where + "." + key + " must be true or false");
  return v.get<bool>();
}

std::string get_string(const json &obj, const char *key, const std::string &where) {
  const json &v = obj.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + " must be a string");
  return v.get<std::string>();
}

Eigen::VectorXd get_vector(const json &obj, const char *key, const std::string &where) {
  const json &v = obj.at(key);
  if (v.is_number()) return Eigen::VectorXd::Constant(1, v.get<double>());
  if (!v.is_array() || v.empty()) throw ConfigError(where + "." + key + " must be a number or a non-empty array");
  Eigen::VectorXd out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(where + "." + key + " must hold numbers");
    out[static_cast<Index>(i)] = v[i].get<double>();
  }
  if (!out.allFinite()) throw ConfigError(where + "." + key + " must be finite");
  return out;
}

Domain parse_domain(const json &j, const std::string &where) {
  check_keys(j, {"lower", "upper"}, where);
  if (!j.contains("lower") || !j.contains("upper")) throw ConfigError(where + " needs lower and upper");
  Domain d{get_vector(j, "lower", where), get_vector(j, "upper", where)};
  try {
    d.validate();
  } catch (const InvalidArgument &e) {
    throw ConfigError(where + ": " + e.what());
  }
  return d;
}

ModelConfig parse_model(const json &j) {
  const std::string w = "model";
  check_keys(j, {"kernel", "num_inducing", "features", "window_width", "noise_var", "link", "domain", "quad_order",
                 "optimize_kernel", "optimize_features", "optimize_noise"},
             w);
  ModelConfig m;
  if (j.contains("kernel")) {
    const json &k = j.at("kernel");
    check_keys(k, {"variance", "lengthscales", "mean_const"}, "model.kernel");
    if (k.contains("variance")) m.variance = get_positive(k, "variance", "model.kernel");
    if (k.contains("lengthscales")) {
      m.lengthscales = get_vector(k, "lengthscales", "model.kernel");
      if (!(m.lengthscales->array() > 0.0).all()) throw ConfigError("model.kernel.lengthscales must be positive");
    }
    if (k.contains("mean_const")) m.mean_const = get_number(k, "mean_const", "model.kernel");
  }
  if (j.contains("num_inducing")) m.num_inducing = static_cast<Index>(get_integer(j, "num_inducing", w, 1));
  if (j.contains("features")) {
    const std::string f = get_string(j, "features", w);
    if (f == "point") m.features = FeatureKind::Point;
    else if (f == "gwindow") m.features = FeatureKind::GaussianWindow;
    else throw ConfigError("model.features must be \"point\" or \"gwindow\"");
  }
  if (j.contains("window_width")) m.window_width = get_positive(j, "window_width", w);
  if (j.contains("noise_var")) m.noise_var = get_positive(j, "noise_var", w);
  if (j.contains("link")) {
    try {
      m.link = parse_cox_link(get_string(j, "link", w));
    } catch (const InvalidArgument &e) {
      throw ConfigError(std::string("model.link: ") + e.what());
    }
  }
  if (j.contains("domain")) m.domain = parse_domain(j.at("domain"), "model.domain");
  if (j.contains("quad_order")) m.quad_order = static_cast<int>(get_integer(j, "quad_order", w, 2));
  if (j.contains("optimize_kernel")) m.optimize_kernel = get_bool(j, "optimize_kernel", w);
  if (j.contains("optimize_features")) m.optimize_features = get_bool(j, "optimize_features", w);
  if (j.contains("optimize_noise")) m.optimize_noise = get_bool(j, "optimize_noise", w);
  return m;
}

MaximizeConfig parse_optimizer(const json &j) {
  const std::string w = "optimizer";
  check_keys(j, {"max_iters", "tol", "step"}, w);
  MaximizeConfig c;
  if (j.contains("max_iters")) c.max_iters = static_cast<int>(get_integer(j, "max_iters", w, 0));
  if (j.contains("tol")) {
    c.tol = get_number(j, "tol", w);
    if (c.tol < 0.0) throw ConfigError("optimizer.tol must be non-negative");
  }
  if (j.contains("step")) c.step = get_positive(j, "step", w);
  return c;
}

VerifyConfig parse_verify(const json &j) {
  check_keys(j, {"instances", "tolerance"}, "verify");
  VerifyConfig v;
  if (j.contains("instances")) v.instances = static_cast<int>(get_integer(j, "instances", "verify", 1));
  if (j.contains("tolerance")) v.tolerance = get_positive(j, "tolerance", "verify");
  return v;
}

GenerateConfig parse_generate(const json &j) {
  const std::string w = "generate";
  check_keys(j, {"kind", "n", "noise_sd", "intensity"}, w);
  GenerateConfig g;
  if (j.contains("kind")) {
    const std::string k = get_string(j, "kind", w);
    if (k == "regression") g.kind = DatasetKind::Regression;
    else if (k == "classification") g.kind = DatasetKind::Classification;
    else if (k == "cox") g.kind = DatasetKind::Cox;
    else throw ConfigError("generate.kind must be regression, classification or cox");
  }
  if (j.contains("n")) g.n = static_cast<Index>(get_integer(j, "n", w, 1));
  if (j.contains("noise_sd")) {
    g.noise_sd = get_number(j, "noise_sd", w);
    if (g.noise_sd < 0.0) throw ConfigError("generate.noise_sd must be non-negative");
  }
  if (j.contains("intensity")) g.intensity = get_positive(j, "intensity", w);
  return g;
}

fs::path resolve(const fs::path &p, const fs::path &base) {
  return fs::absolute(p.is_absolute() ? p : base / p).lexically_normal();
}

} // namespace

RunConfig parse_config(std::string_view json_text, Task task, const fs::path &base_dir,
                       std::optional<std::uint64_t> seed_override, std::optional<fs::path> output_override) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error &e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(doc, {"task", "seed", "data", "output", "model", "optimizer", "verify", "generate"}, "config");
  RunConfig cfg;
  cfg.task = task;
  if (doc.contains("task")) {
    const Task named = parse_task(get_string(doc, "task", "config"));
    if (named != task) {
      throw ConfigError("config names task '" + std::string(task_name(named)) + "' but '" +
                        std::string(task_name(task)) + "' was requested");
    }
  }
  if (doc.contains("seed")) cfg.seed = static_cast<std::uint64_t>(get_integer(doc, "seed", "config", 0));
  if (seed_override) cfg.seed = seed_override;
  if (doc.contains("model")) cfg.model = parse_model(doc.at("model"));
  if (doc.contains("optimizer")) cfg.optimizer = parse_optimizer(doc.at("optimizer"));
  if (doc.contains("verify")) cfg.verify = parse_verify(doc.at("verify"));
  if (doc.contains("generate")) cfg.generate = parse_generate(doc.at("generate"));

  if (output_override) cfg.output = fs::absolute(*output_override).lexically_normal();
  else if (doc.contains("output")) cfg.output = resolve(get_string(doc, "output", "config"), base_dir);
  else cfg.output = resolve("out", base_dir);

  const bool fit = task == Task::FitRegression || task == Task::FitClassification || task == Task::FitCox;
  if (fit) {
    if (!doc.contains("data")) throw ConfigError("config.data is required for " + std::string(task_name(task)));
    cfg.data = resolve(get_string(doc, "data", "config"), base_dir);
    if (!fs::is_regular_file(cfg.data)) throw ConfigError("data file '" + cfg.data.string() + "' does not exist");
  } else if (doc.contains("data")) {
    throw ConfigError("config.data is not used by " + std::string(task_name(task)));
  }
  if ((task == Task::Verify || task == Task::Generate) && !cfg.seed) {
    throw ConfigError(std::string(task_name(task)) + " is stochastic and needs a seed (config.seed or --seed)");
  }
  if (task == Task::FitCox && !cfg.model.domain) throw ConfigError("fit-cox needs model.domain");
  return cfg;
}

namespace {

// ---- shared fitting helpers ----

double phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Dataset {
  std::vector<std::string> input_names;
  Eigen::MatrixXd X;
  Eigen::VectorXd Y;
};

Dataset load_supervised(const fs::path &path) {
  const Table t = read_csv(path);
  const Index yc = t.column("y");
  Dataset d;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (static_cast<Index>(c) != yc) d.input_names.push_back(t.header[c]);
  }
  if (d.input_names.empty()) throw DataError(path.string() + ": no input columns besides 'y'");
  if (t.values.rows() == 0) throw DataError(path.string() + ": no data rows");
  d.X.resize(t.values.rows(), static_cast<Index>(d.input_names.size()));
  for (std::size_t c = 0; c < d.input_names.size(); ++c) d.X.col(static_cast<Index>(c)) = t.values.col(t.column(d.input_names[c]));
  d.Y = t.values.col(yc);
  return d;
}

// M starting locations inside [lower, upper]: evenly spaced in 1D, a Halton
// sequence otherwise.
Eigen::MatrixXd initial_locations(const Eigen::VectorXd &lower, const Eigen::VectorXd &upper, Index m) {
  const Index d = lower.size();
  Eigen::MatrixXd Z(m, d);
  static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  for (Index i = 0; i < m; ++i) {
    for (Index a = 0; a < d; ++a) {
      double u;
      if (d == 1) {
        u = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
      } else {
        const int base = kPrimes[a % 10];
        double f = 1.0;
        u = 0.0;
        for (Index k = i + 1; k > 0; k /= base) {
          f /= base;
          u += f * static_cast<double>(k % base);
        }
      }
      Z(i, a) = lower[a] + (upper[a] - lower[a]) * u;
    }
  }
  return Z;
}

std::vector<InducingFeature> make_features(const ModelConfig &mc, const Eigen::MatrixXd &Z) {
  if (mc.features == FeatureKind::Point) return point_features(Z);
  std::vector<InducingFeature> out;
  for (Index i = 0; i < Z.rows(); ++i) {
    out.push_back(gaussian_window(Z.row(i).transpose(), Eigen::VectorXd::Constant(Z.cols(), mc.window_width)));
  }
  return out;
}

Eigen::VectorXd lengthscales_for(const ModelConfig &mc, Index d, double fallback) {
  if (!mc.lengthscales) return Eigen::VectorXd::Constant(d, fallback);
  if (mc.lengthscales->size() == 1) return Eigen::VectorXd::Constant(d, (*mc.lengthscales)[0]);
  if (mc.lengthscales->size() != d) {
    throw DataError("model.kernel.lengthscales has " + std::to_string(mc.lengthscales->size()) +
                    " entries but the data has " + std::to_string(d) + " input columns");
  }
  return *mc.lengthscales;
}

json trace_json_summary(const MaximizeResult &r) {
  return {{"iterations", r.iterations}, {"converged", r.converged}, {"objective", r.objective}};
}

void write_predictions(const fs::path &path, const std::vector<std::string> &names, const Eigen::MatrixXd &X,
                       const std::vector<std::pair<std::string, Eigen::VectorXd>> &cols) {
  Table t;
  t.header = names;
  for (const auto &c : cols) t.header.push_back(c.first);
  t.values.resize(X.rows(), static_cast<Index>(t.header.size()));
  t.values.leftCols(X.cols()) = X;
  for (std::size_t j = 0; j < cols.size(); ++j) t.values.col(X.cols() + static_cast<Index>(j)) = cols[j].second;
  write_csv(path, t);
}

Table concatenate_traces(const std::vector<const MaximizeResult *> &stages) {
  std::vector<TraceRow> rows;
  int offset = 0;
  for (const MaximizeResult *r : stages) {
    for (std::size_t i = (rows.empty() ? 0 : 1); i < r->trace.size(); ++i) {
      TraceRow row = r->trace[i];
      row.iter += offset;
      rows.push_back(row);
    }
    offset = rows.empty() ? 0 : rows.back().iter;
  }
  return trace_table(rows);
}

void finish(const RunConfig &cfg, json summary, Clock::time_point t0, std::ostream &log) {
  summary["task"] = task_name(cfg.task);
  if (cfg.seed) summary["seed"] = *cfg.seed;
  summary["wall_time_s"] = seconds_since(t0);
  write_text(cfg.output / "summary.json", summary.dump(2) + "\n");
  log << task_name(cfg.task) << ": final elbo " << summary.value("final_elbo", 0.0) << " after "
      << summary.value("iterations", 0) << " iterations, artifacts in " << cfg.output.string() << "\n";
}

// ---- tasks ----

int fit_regression(const RunConfig &cfg, std::ostream &log) {
  const auto t0 = Clock::now();
  const Dataset data = load_supervised(cfg.data);
  const ModelConfig &mc = cfg.model;
  const Index d = data.X.cols();
  const double y_mean = data.Y.mean();
  const double y_var = data.Y.size() > 1 ? (data.Y.array() - y_mean).square().sum() / static_cast<double>(data.Y.size() - 1) : 1.0;
  const Kernel kernel(mc.variance.value_or(y_var > 0.0 ? y_var : 1.0), lengthscales_for(mc, d, 1.0),
                      mc.mean_const.value_or(y_mean));
  const Eigen::MatrixXd Z0 = initial_locations(data.X.colwise().minCoeff(), data.X.colwise().maxCoeff(), mc.num_inducing);
  const SVGPState base = prior_state(make_features(mc, Z0), kernel, GaussianNoise{mc.noise_var});

  // Hyperparameters, noise and features through the collapsed bound.
  const FreeParameters free_a{false, mc.optimize_kernel.value_or(true), mc.optimize_noise.value_or(true),
                              mc.optimize_features.value_or(true)};
  auto collapsed_at = [&](const SVGPState &s) {
    return collapsed_bound(s.features, s.kernel, data.X, data.Y, std::get<GaussianNoise>(s.likelihood).noise_var);
  };
  SVGPState fitted = base;
  MaximizeResult stage_a{encode_state(base, FreeParameters{false, false, false, false}), collapsed_at(base), {}, 0, true};
  stage_a.trace.push_back(TraceRow{0, stage_a.objective, 0.0, 0.0});
  if (free_a.kernel || free_a.noise || free_a.features) {
    stage_a = maximize([&](const ParamVector &x) { return collapsed_at(decode_state(x, base)); },
                       encode_state(base, free_a), cfg.optimizer);
    fitted = decode_state(stage_a.x, base);
  }
  const double collapsed = collapsed_at(fitted);

  // q(u) through the uncollapsed ELBO from the prior.
  const SVGPState start = prior_state(fitted.features, fitted.kernel, fitted.likelihood);
  const MaximizeResult stage_b = maximize([&](const ParamVector &x) { return elbo(decode_state(x, start), data.X, data.Y); },
                                          encode_state(start, FreeParameters{}), cfg.optimizer);
  const SVGPState final_state = decode_state(stage_b.x, start);

  fs::create_directories(cfg.output);
  write_text(cfg.output / "checkpoint.json", state_to_json(final_state));
  const PredictiveMarginals pm = predictive_marginals(final_state, data.X);
  write_predictions(cfg.output / "predictions.csv", data.input_names, data.X, {{"mean", pm.mean}, {"variance", pm.var}});
  write_csv(cfg.output / "trace.csv", trace_table(stage_b.trace));
  write_csv(cfg.output / "trace_hyperparameters.csv", trace_table(stage_a.trace));
  json summary;
  summary["final_elbo"] = stage_b.objective;
  summary["iterations"] = stage_a.iterations + stage_b.iterations;
  summary["converged"] = stage_a.converged && stage_b.converged;
  summary["num_data"] = data.X.rows();
  summary["num_inducing"] = final_state.num_inducing();
  summary["collapsed_bound"] = collapsed;
  summary["collapsed_gap"] = collapsed - stage_b.objective;
  summary["stages"] = {{"hyperparameters", trace_json_summary(stage_a)}, {"variational", trace_json_summary(stage_b)}};
  finish(cfg, summary, t0, log);
  return kExitOk;
}

int fit_classification(const RunConfig &cfg, std::ostream &log) {
  const auto t0 = Clock::now();
  const Dataset data = load_supervised(cfg.data);
  const ModelConfig &mc = cfg.model;
  const Index d = data.X.cols();
  const Kernel kernel(mc.variance.value_or(1.0), lengthscales_for(mc, d, 1.0), mc.mean_const.value_or(0.0));
  const Eigen::MatrixXd Z0 = initial_locations(data.X.colwise().minCoeff(), data.X.colwise().maxCoeff(), mc.num_inducing);
  const SVGPState base = prior_state(make_features(mc, Z0), kernel, BernoulliProbit{});
  if (mc.optimize_noise.value_or(false)) throw ConfigError("model.optimize_noise has no meaning for classification");
  auto objective_for = [&](const SVGPState &ref) {
    return [&data, ref](const ParamVector &x) { return elbo(decode_state(x, ref), data.X, data.Y); };
  };

  // q(u) first, then jointly with the kernel and features. Both stages climb
  // the same ELBO, so the concatenated trace is one ascent.
  const MaximizeResult stage_a = maximize(objective_for(base), encode_state(base, FreeParameters{}), cfg.optimizer);
  const SVGPState after_a = decode_state(stage_a.x, base);
  const FreeParameters free_b{true, mc.optimize_kernel.value_or(true), false, mc.optimize_features.value_or(false)};
  MaximizeResult stage_b = stage_a;
  SVGPState final_state = after_a;
  if (free_b.kernel || free_b.features) {
    stage_b = maximize(objective_for(after_a), encode_state(after_a, free_b), cfg.optimizer);
    final_state = decode_state(stage_b.x, after_a);
  }

  fs::create_directories(cfg.output);
  write_text(cfg.output / "checkpoint.json", state_to_json(final_state));
  const PredictiveMarginals pm = predictive_marginals(final_state, data.X);
  Eigen::VectorXd prob(pm.mean.size());
  for (Index i = 0; i < prob.size(); ++i) prob[i] = phi(pm.mean[i] / std::sqrt(1.0 + pm.var[i]));
  write_predictions(cfg.output / "predictions.csv", data.input_names, data.X,
                    {{"mean", pm.mean}, {"variance", pm.var}, {"prob", prob}});
  const bool two_stages = free_b.kernel || free_b.features;
  write_csv(cfg.output / "trace.csv", two_stages ? concatenate_traces({&stage_a, &stage_b}) : trace_table(stage_a.trace));
  json summary;
  summary["final_elbo"] = stage_b.objective;
  summary["iterations"] = stage_a.iterations + (two_stages ? stage_b.iterations : 0);
  summary["converged"] = stage_b.converged;
  summary["num_data"] = data.X.rows();
  summary["num_inducing"] = final_state.num_inducing();
  summary["stages"] = {{"variational", trace_json_summary(stage_a)}, {"joint", trace_json_summary(stage_b)}};
  finish(cfg, summary, t0, log);
  return kExitOk;
}

Eigen::MatrixXd domain_grid(const Domain &dom) {
  const Index d = dom.dim();
  const Index per = d == 1 ? 200 : 50;
  Index total = 1;
  for (Index a = 0; a < d; ++a) total *= per;
  Eigen::MatrixXd G(total, d);
  for (Index r = 0; r < total; ++r) {
    Index rem = r;
    for (Index a = d - 1; a >= 0; --a) {
      const Index k = rem % per;
      rem /= per;
      G(r, a) = dom.lower[a] + (dom.upper[a] - dom.lower[a]) * static_cast<double>(k) / static_cast<double>(per - 1);
    }
  }
  return G;
}

int fit_cox(const RunConfig &cfg, std::ostream &log) {
  const auto t0 = Clock::now();
  const ModelConfig &mc = cfg.model;
  const Domain &dom = *mc.domain;
  const Table t = read_csv(cfg.data);
  if (t.values.cols() != dom.dim()) {
    throw DataError(cfg.data.string() + ": events have " + std::to_string(t.values.cols()) +
                    " columns but the domain has dimension " + std::to_string(dom.dim()));
  }
  const CoxModel model{dom, mc.link, t.values, mc.quad_order.value_or(default_cox_quadrature_order(dom.dim()))};
  model.validate();
  const double count = static_cast<double>(t.values.rows());
  double mean0 = mc.mean_const.value_or(0.0);
  if (!mc.mean_const) {
    const double rate = std::max(count, 1.0) / dom.volume();
    mean0 = mc.link == CoxLink::Exp ? std::log(rate) : std::sqrt(rate);
  }
  const Kernel kernel(mc.variance.value_or(1.0), lengthscales_for(mc, dom.dim(), (dom.upper - dom.lower).minCoeff() / 6.0), mean0);
  const SVGPState base =
      prior_state(make_features(mc, initial_locations(dom.lower, dom.upper, mc.num_inducing)), kernel, PoissonExp{1.0});
  if (mc.optimize_noise.value_or(false)) throw ConfigError("model.optimize_noise has no meaning for fit-cox");
  const FreeParameters free{true, mc.optimize_kernel.value_or(false), false, mc.optimize_features.value_or(false)};
  const QuadratureGrid grid = tensor_gauss_legendre(dom, model.quad_order);
  const MaximizeResult r = maximize(
      [&](const ParamVector &x) { return cox_elbo_terms(decode_state(x, base), model, grid).elbo; },
      encode_state(base, free), cfg.optimizer);
  const SVGPState final_state = decode_state(r.x, base);

  fs::create_directories(cfg.output);
  write_text(cfg.output / "checkpoint.json", state_to_json(final_state));
  const Eigen::MatrixXd G = domain_grid(dom);
  const PredictiveMarginals pm = predictive_marginals(final_state, G);
  Eigen::VectorXd lam(pm.mean.size());
  for (Index i = 0; i < lam.size(); ++i) lam[i] = expected_intensity(mc.link, pm.mean[i], pm.var[i]);
  std::vector<std::string> names;
  for (Index a = 0; a < dom.dim(); ++a) names.push_back(t.header[static_cast<std::size_t>(a)]);
  write_predictions(cfg.output / "predictions.csv", names, G, {{"mean", pm.mean}, {"variance", pm.var}, {"intensity", lam}});
  write_csv(cfg.output / "trace.csv", trace_table(r.trace));
  const CoxElboTerms terms = cox_elbo_terms(final_state, model, grid);
  json summary;
  summary["final_elbo"] = terms.elbo;
  summary["iterations"] = r.iterations;
  summary["converged"] = r.converged;
  summary["num_events"] = t.values.rows();
  summary["num_inducing"] = final_state.num_inducing();
  summary["link"] = cox_link_name(mc.link);
  summary["integrated_intensity"] = terms.integral_term;
  summary["kl"] = terms.kl;
  finish(cfg, summary, t0, log);
  return kExitOk;
}

int verify(const RunConfig &cfg, std::ostream &log) {
  const auto t0 = Clock::now();
  const VerifyReport rep = run_verification(*cfg.seed, cfg.verify.instances, cfg.verify.tolerance);
  fs::create_directories(cfg.output);
  write_text(cfg.output / "verify_report.json", verify_report_json(rep));
  for (const auto &f : rep.families) {
    log << "verify " << f.name << ": max_diff " << f.max_diff << " (tolerance " << f.tolerance << ") "
        << (f.passed ? "passed" : "FAILED") << "\n";
  }
  log << "verify: " << rep.instances.size() << " instances in " << seconds_since(t0) << " s, report in "
      << (cfg.output / "verify_report.json").string() << "\n";
  return rep.passed ? kExitOk : kExitVerification;
}

double sine_mixture(double x) { return std::sin(x) + 0.5 * std::sin(2.3 * x); }

int generate(const RunConfig &cfg, std::ostream &log) {
  const GenerateConfig &g = cfg.generate;
  std::mt19937_64 rng(*cfg.seed);
  Table t;
  if (g.kind == DatasetKind::Cox) {
    const Domain dom = cfg.model.domain.value_or(
        Domain{Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 4.0 * std::numbers::pi)});
    const double c = g.intensity;
    auto lam = [c](const Eigen::VectorXd &x) {
      return c * (1.0 + std::sin(x[0]) * (x.size() > 1 ? std::cos(x[1]) : 1.0));
    };
    t.values = sample_inhomogeneous_pp(lam, 2.0 * c, dom, *cfg.seed);
    for (Index a = 0; a < dom.dim(); ++a) t.header.push_back("x" + std::to_string(a));
  } else {
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::normal_distribution<double> z;
    t.header = {"x0", "y"};
    t.values.resize(g.n, 2);
    for (Index i = 0; i < g.n; ++i) {
      const double x = u(rng);
      t.values(i, 0) = x;
      if (g.kind == DatasetKind::Regression) {
        t.values(i, 1) = sine_mixture(x) + g.noise_sd * z(rng);
      } else {
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        t.values(i, 1) = coin(rng) < phi(3.0 * sine_mixture(x)) ? 1.0 : 0.0;
      }
    }
  }
  fs::create_directories(cfg.output);
  write_csv(cfg.output / "data.csv", t);
  log << "generate: " << t.values.rows() << " rows written to " << (cfg.output / "data.csv").string() << "\n";
  return kExitOk;
}

} // namespace

int run(const RunConfig &cfg, std::ostream &log, std::ostream &err) {
  try {
    switch (cfg.task) {
    case Task::FitRegression: return fit_regression(cfg, log);
    case Task::FitClassification: return fit_classification(cfg, log);
    case Task::FitCox: return fit_cox(cfg, log);
    case Task::Verify: return verify(cfg, log);
    case Task::Generate: return generate(cfg, log);
    }
  } catch (const ConfigError &e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidArgument &e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NotPositiveDefinite &e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const NonFiniteError &e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error &e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error &e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception &e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

int run_command(std::string_view task, const fs::path &config_path, std::optional<std::uint64_t> seed,
                std::optional<fs::path> out, std::ostream &log, std::ostream &err) {
  RunConfig cfg;
  try {
    const Task t = parse_task(task);
    if (!fs::is_regular_file(config_path)) throw ConfigError("config file '" + config_path.string() + "' does not exist");
    const fs::path abs = fs::absolute(config_path);
    cfg = parse_config(read_text(abs), t, abs.parent_path(), seed, out);
  } catch (const Error &e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  return run(cfg, log, err);
}

} // namespace sparsekl
