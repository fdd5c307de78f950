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

#include "sparsekl/likelihood.hpp"

#include "sparsekl/errors.hpp"
#include "sparsekl/quadrature.hpp"

#include <cmath>
#include <numbers>

namespace sparsekl {

namespace {

template <class... Ts> struct overloaded : Ts... {
  using Ts::operator()...;
};

} // namespace

std::string_view likelihood_name(const Likelihood &lik) {
  return std::visit(overloaded{[](const GaussianNoise &) { return std::string_view("gaussian"); },
                               [](const BernoulliProbit &) { return std::string_view("bernoulli"); },
                               [](const PoissonExp &) { return std::string_view("poisson"); }},
                    lik);
}

void validate(const Likelihood &lik) {
  if (const auto *g = std::get_if<GaussianNoise>(&lik)) {
    if (!(g->noise_var > 0.0) || !std::isfinite(g->noise_var)) {
      throw InvalidArgument("Gaussian likelihood: noise variance must be positive");
    }
  }
  if (const auto *p = std::get_if<PoissonExp>(&lik)) {
    if (!(p->bin_width > 0.0) || !std::isfinite(p->bin_width)) {
      throw InvalidArgument("Poisson likelihood: bin width must be positive");
    }
  }
}

double log_normal_cdf(double x) {
  if (x > -37.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  // Asymptotic tail series.
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2));
}

double log_density(const Likelihood &lik, double f, double y) {
  return std::visit(
      overloaded{
          [&](const GaussianNoise &g) {
            const double r = y - f;
            return -0.5 * std::log(2.0 * std::numbers::pi * g.noise_var) -
                   0.5 * r * r / g.noise_var;
          },
          [&](const BernoulliProbit &) { return log_normal_cdf(y > 0.0 ? f : -f); },
          [&](const PoissonExp &p) {
            return y * (f + std::log(p.bin_width)) - p.bin_width * std::exp(f) -
                   std::lgamma(y + 1.0);
          }},
      lik);
}

double variational_expectation_quadrature(const Likelihood &lik, double mean, double var,
                                          double y, int order) {
  if (order < 1) throw InvalidArgument("quadrature order must be at least 1");
  const QuadratureRule gh = gauss_hermite(order);
  return gaussian_expectation(gh, mean, var, [&](double f) { return log_density(lik, f, y); });
}

double variational_expectation(const Likelihood &lik, double mean, double var, double y,
                               const QuadratureRule &gh) {
  if (const auto *g = std::get_if<GaussianNoise>(&lik)) {
    const double r = y - mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * g->noise_var) -
           0.5 * (r * r + var) / g->noise_var;
  }
  return gaussian_expectation(gh, mean, var, [&](double f) { return log_density(lik, f, y); });
}

double variational_expectation(const Likelihood &lik, double mean, double var, double y,
                               int order) {
  if (order < 1) throw InvalidArgument("quadrature order must be at least 1");
  if (const auto *g = std::get_if<GaussianNoise>(&lik)) {
    const double r = y - mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * g->noise_var) -
           0.5 * (r * r + var) / g->noise_var;
  }
  return variational_expectation_quadrature(lik, mean, var, y, order);
}

} // namespace sparsekl
