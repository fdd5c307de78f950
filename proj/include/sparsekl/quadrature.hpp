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

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace sparsekl {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::size_t size() const noexcept { return nodes.size(); }
};

/// Gauss-Hermite rule for int exp(-x^2) f(x) dx. Throws for n < 1.
QuadratureRule gauss_hermite(int n);

/// Gauss-Legendre rule on [a, b]. Throws for n < 1.
QuadratureRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

/// E[f(x)] for x ~ N(mean, var) with a Gauss-Hermite rule.
template <typename F>
double gaussian_expectation(const QuadratureRule &gh, double mean, double var, F &&f) {
  const double scale = std::sqrt(2.0 * var);
  double acc = 0.0;
  for (std::size_t i = 0; i < gh.size(); ++i) {
    acc += gh.weights[i] * f(mean + scale * gh.nodes[i]);
  }
  return acc / std::sqrt(std::numbers::pi);
}

/// Adaptive Gauss-Legendre: recursive bisection until the 15-point estimate
/// and the sum of its halves agree to `abs_tol`.
double adaptive_gauss_legendre(const std::function<double(double)> &f, double a,
                               double b, double abs_tol = 1e-9, int max_depth = 40);

} // namespace sparsekl
