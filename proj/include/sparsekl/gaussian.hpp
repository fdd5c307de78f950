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

#include "sparsekl/kernel.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace sparsekl {

using IndexList = std::vector<Index>;

/// Finite-dimensional Gaussian N(mean, cov) with a cached lower Cholesky factor
/// of cov + jitter * I. All densities and divergences are evaluated through the
/// factor.
class GaussianDist {
public:
  /// Factorizes with the default jitter schedule.
  GaussianDist(Eigen::VectorXd mean, Eigen::MatrixXd cov);
  GaussianDist(Eigen::VectorXd mean, Eigen::MatrixXd cov, double base_jitter);

  /// Builds from an existing lower factor; cov = L L^T and jitter = 0.
  static GaussianDist from_cholesky(Eigen::VectorXd mean, Eigen::MatrixXd lower);

  Index dim() const noexcept { return mean_.size(); }
  const Eigen::VectorXd &mean() const noexcept { return mean_; }
  const Eigen::MatrixXd &cov() const noexcept { return cov_; }
  const Eigen::MatrixXd &chol() const noexcept { return chol_; }
  double jitter() const noexcept { return jitter_; }
  double log_det() const;

private:
  GaussianDist() = default;

  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd chol_;
  double jitter_ = 0.0;
};

/// KL(q || p), Cholesky solves only.
double mvn_kl(const GaussianDist &q, const GaussianDist &p);

double mvn_logpdf(const GaussianDist &p, const Eigen::Ref<const Eigen::VectorXd> &x);

/// Restriction to `idx` (in the order given).
GaussianDist mvn_marginal(const GaussianDist &p, std::span<const Index> idx);

/// Distribution of the unobserved coordinates (increasing order) given
/// x[obs_idx] = obs_val.
GaussianDist mvn_condition(const GaussianDist &joint, std::span<const Index> obs_idx,
                           const Eigen::Ref<const Eigen::VectorXd> &obs_val);

/// Affine Gaussian conditional: U | V = v ~ N(offset + gain * v, cov).
struct GaussianConditional {
  Eigen::MatrixXd gain;
  Eigen::VectorXd offset;
  Eigen::MatrixXd cov;

  Index target_dim() const noexcept { return offset.size(); }
  Index given_dim() const noexcept { return gain.cols(); }
};

/// Conditional of joint[target] given joint[given]; the two lists must be
/// disjoint.
GaussianConditional conditional_of(const GaussianDist &joint,
                                   std::span<const Index> target,
                                   std::span<const Index> given);

/// Joint over [V, U] from a marginal over V and a conditional U | V.
GaussianDist compose(const GaussianDist &marginal_v, const GaussianConditional &cond);

/// E_{v ~ q_v}[ KL(q_{U|V=v} || p_{U|V=v}) ] in closed form.
double expected_conditional_kl(const GaussianConditional &q_cond,
                               const GaussianConditional &p_cond,
                               const GaussianDist &q_v);

/// Indices 0..n-1 not contained in `idx`, in increasing order.
IndexList complement(Index n, std::span<const Index> idx);

/// Throws IndexError unless every entry is in [0, n) and entries are distinct.
void validate_indices(Index n, std::span<const Index> idx, const char *what);

} // namespace sparsekl
