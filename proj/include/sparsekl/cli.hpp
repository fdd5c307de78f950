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

#include "sparsekl/cox.hpp"
#include "sparsekl/optimize.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace sparsekl {

enum class Task { FitRegression, FitClassification, FitCox, Verify, Generate };

std::string_view task_name(Task t);
/// Throws ConfigError for unknown names.
Task parse_task(std::string_view name);

enum class FeatureKind { Point, GaussianWindow };
enum class DatasetKind { Regression, Classification, Cox };

struct ModelConfig {
  std::optional<double> variance;             // default: 1 (fit-regression: sample variance of y)
  std::optional<Eigen::VectorXd> lengthscales; // one value broadcasts over dimensions
  std::optional<double> mean_const;           // default: data dependent
  Index num_inducing = 10;
  FeatureKind features = FeatureKind::Point;
  double window_width = 0.5;
  double noise_var = 0.1;
  CoxLink link = CoxLink::Exp;
  std::optional<Domain> domain; // fit-cox and generate cox
  std::optional<int> quad_order;
  std::optional<bool> optimize_kernel;
  std::optional<bool> optimize_features;
  std::optional<bool> optimize_noise;
};

struct VerifyConfig {
  int instances = 150;
  double tolerance = 1e-8;
};

struct GenerateConfig {
  DatasetKind kind = DatasetKind::Regression;
  Index n = 100;
  double noise_sd = 0.2;
  double intensity = 8.0; // cox: lambda(x) = intensity * (1 + sin x_0 [* cos x_1])
};

struct RunConfig {
  Task task = Task::Verify;
  std::optional<std::uint64_t> seed;
  std::filesystem::path data;   // absolute after parsing
  std::filesystem::path output; // absolute after parsing
  ModelConfig model;
  MaximizeConfig optimizer;
  VerifyConfig verify;
  GenerateConfig generate;
};

/// Parses a JSON config. Relative paths resolve against `base_dir`. Unknown
/// keys, wrong types, missing required fields, a missing seed for a stochastic
/// task and data files that do not exist raise ConfigError.
RunConfig parse_config(std::string_view json_text, Task task, const std::filesystem::path &base_dir,
                       std::optional<std::uint64_t> seed_override = std::nullopt,
                       std::optional<std::filesystem::path> output_override = std::nullopt);

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitVerification = 4;
inline constexpr int kExitNumerical = 5;

/// Runs a parsed config and writes its artifacts under cfg.output. Returns the
/// exit status; errors are reported on `err`.
int run(const RunConfig &cfg, std::ostream &log, std::ostream &err);

/// Reads the config file, applies overrides and runs it.
int run_command(std::string_view task, const std::filesystem::path &config_path,
                std::optional<std::uint64_t> seed, std::optional<std::filesystem::path> out,
                std::ostream &log, std::ostream &err);

/// One random instance of the verification suite.
struct VerifyInstance {
  std::uint64_t instance_seed = 0;
  double full_kl = 0.0;
  double titsias_kl = 0.0;
  double elbo_gap = 0.0;
  double chain_conditional = 0.0;
  double chain_marginal = 0.0;
  double chain_joint = 0.0;
  double aug_gap = 0.0;            // matched conditional, exactly zero in theory
  double aug_gap_mismatched = 0.0; // covariance doubled
  double aug_closed_form = 0.0;    // expected conditional KL for the mismatched case
  double push_diff = 0.0;
  // Scaled discrepancies per family.
  double equivalence_diff = 0.0;
  double chain_diff = 0.0;
  double aug_diff = 0.0;
};

struct FamilySummary {
  std::string name;
  double max_diff = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct VerifyReport {
  std::uint64_t seed = 0;
  std::vector<VerifyInstance> instances;
  std::vector<FamilySummary> families; // equivalence, chain_rule, augmentation_gap, pushforward
  double min_mismatched_gap = 0.0;     // the augmentation family also needs this above 0.01
  bool passed = false;
};

/// Seeded finite-oracle suite: three-way equivalence, chain rule, augmentation
/// gap and deterministic push-forward on `instances` random models.
VerifyReport run_verification(std::uint64_t seed, int instances, double tolerance);

std::string verify_report_json(const VerifyReport &r);

} // namespace sparsekl
