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

#include "sparsekl/features.hpp"
#include "sparsekl/gaussian.hpp"
#include "sparsekl/kernel.hpp"
#include "sparsekl/likelihood.hpp"

#include <Eigen/Dense>

#include <vector>

namespace sparsekl {

/// Sparse variational state: q(u) = N(q_mean, q_chol q_chol^T) over the
/// inducing features, extended off the features by the prior conditional.
struct SVGPState {
  std::vector<InducingFeature> features;
  Eigen::VectorXd q_mean;
  Eigen::MatrixXd q_chol;
  Kernel kernel;
  Likelihood likelihood;

  Index num_inducing() const noexcept { return static_cast<Index>(features.size()); }

  /// Throws unless M >= 1, shapes agree, q_chol is lower-triangular with a
  /// strictly positive diagonal and the likelihood parameters are valid.
  void validate() const;

  GaussianDist q_u() const;
};

/// State with q(u) equal to the prior at the features.
SVGPState prior_state(std::vector<InducingFeature> features, Kernel kernel,
                      Likelihood likelihood);

/// Prior p(u) at the features.
GaussianDist inducing_prior(const std::vector<InducingFeature> &features, const Kernel &k);

struct PredictiveMarginals {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

PredictiveMarginals predictive_marginals(const SVGPState &s, const Eigen::MatrixXd &Xstar);

/// Sum over data of E_q[log p(y_i | f_i)].
double expected_log_lik(const SVGPState &s, const Eigen::MatrixXd &X,
                        const Eigen::VectorXd &Y, const Likelihood &lik,
                        int order = kDefaultQuadratureOrder);

/// KL(q(u) || p(u)).
double inducing_kl(const SVGPState &s);

/// expected_log_lik - KL(q(u) || p(u)).
double elbo(const SVGPState &s, const Eigen::MatrixXd &X, const Eigen::VectorXd &Y,
            const Likelihood &lik, int order = kDefaultQuadratureOrder);

/// Uses the state's own likelihood.
double elbo(const SVGPState &s, const Eigen::MatrixXd &X, const Eigen::VectorXd &Y);

struct VariationalParams {
  Eigen::VectorXd q_mean;
  Eigen::MatrixXd q_chol;
};

/// Optimal Gaussian q(u) under a Gaussian likelihood.
VariationalParams collapsed_optimal_q(const std::vector<InducingFeature> &features,
                                      const Kernel &kernel, const Eigen::MatrixXd &X,
                                      const Eigen::VectorXd &Y, double noise_var);

/// ELBO at the collapsed optimum:
/// log N(Y | mu_X, Q_XX + noise I) - tr(K_XX - Q_XX) / (2 noise).
double collapsed_bound(const std::vector<InducingFeature> &features, const Kernel &kernel,
                       const Eigen::MatrixXd &X, const Eigen::VectorXd &Y, double noise_var);

} // namespace sparsekl
