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

#include "sparsekl/quadrature.hpp"

#include <string_view>
#include <variant>

namespace sparsekl {

inline constexpr int kDefaultQuadratureOrder = 20;

/// y = f + N(0, noise_var).
struct GaussianNoise {
  double noise_var = 1.0;
};

/// P(y = +1 | f) = Phi(f). Labels: any y > 0 is the positive class.
struct BernoulliProbit {};

/// y ~ Poisson(bin_width * exp(f)).
struct PoissonExp {
  double bin_width = 1.0;
};

using Likelihood = std::variant<GaussianNoise, BernoulliProbit, PoissonExp>;

std::string_view likelihood_name(const Likelihood &lik);

/// Throws InvalidArgument for non-positive noise variance or bin width.
void validate(const Likelihood &lik);

double log_density(const Likelihood &lik, double f, double y);

/// E_{f ~ N(mean, var)}[log p(y | f)]. Closed form for GaussianNoise,
/// Gauss-Hermite with `order` nodes otherwise. Throws for order < 1.
double variational_expectation(const Likelihood &lik, double mean, double var, double y,
                               int order = kDefaultQuadratureOrder);

/// As above with a precomputed Gauss-Hermite rule.
double variational_expectation(const Likelihood &lik, double mean, double var, double y,
                               const QuadratureRule &gh);

/// Same expectation, always by Gauss-Hermite quadrature.
double variational_expectation_quadrature(const Likelihood &lik, double mean, double var,
                                          double y, int order = kDefaultQuadratureOrder);

/// log Phi(x), accurate in the far left tail.
double log_normal_cdf(double x);

} // namespace sparsekl
