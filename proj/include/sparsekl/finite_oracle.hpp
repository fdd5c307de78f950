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

#include "sparsekl/gaussian.hpp"
#include "sparsekl/kernel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>

namespace sparsekl {

/// Relative first-attempt jitter inside the oracle computations. The SVGP
/// route of check_finite_equivalence keeps the library default.
inline constexpr double kOracleJitterRel = 1e-14;

/// Finite index set with data subset D, inducing subset Z, a Gaussian prior over
/// every point and a Gaussian observation model Y = f_D + noise.
///
/// Points of X outside D and Z play the role of held-out function values.
struct FiniteModel {
  Eigen::MatrixXd X;
  IndexList D;
  IndexList Z;
  Kernel kernel;
  GaussianDist prior;
  Eigen::VectorXd Y;
  double noise_var;

  /// Prior is the kernel's finite marginal at X.
  static FiniteModel from_kernel(Kernel kernel, Eigen::MatrixXd X, IndexList D, IndexList Z,
                                 Eigen::VectorXd Y, double noise_var);

  Index size() const noexcept { return X.rows(); }

  void validate() const;
};

/// q(f_Z); off Z the approximation is the prior conditional p(f_{X\Z} | f_Z).
struct ApproxPosterior {
  /// Stored through its Cholesky factor (zero jitter) so every route sees the
  /// same covariance.
  explicit ApproxPosterior(const GaussianDist &q);
  GaussianDist q_u;
};

/// Approximation restricted to the index list `target` (any order, may mix Z
/// and non-Z indices).
GaussianDist extend_approximation(const FiniteModel &m, const ApproxPosterior &q,
                                  std::span<const Index> target);

/// p(f_X | Y).
GaussianDist exact_posterior(const FiniteModel &m);

/// log N(Y | mu_D, Sigma_DD + noise I).
double log_marginal_likelihood(const FiniteModel &m);

/// KL over D u Z between the approximation and the posterior.
double titsias_kl(const FiniteModel &m, const ApproxPosterior &q);

/// KL over all of X between the approximation and the posterior.
double full_kl(const FiniteModel &m, const ApproxPosterior &q);

struct EquivalenceReport {
  double full = 0.0;
  double titsias = 0.0;
  double elbo_gap = 0.0; // log_marginal_likelihood - elbo
  double max_abs_diff = 0.0;
};

/// Three routes to the same divergence: full_kl, titsias_kl and the slack of
/// the sparse variational ELBO.
EquivalenceReport check_finite_equivalence(const FiniteModel &m, const ApproxPosterior &q);

/// Collapsed-optimal q(u) for the model's inducing points.
ApproxPosterior collapsed_approximation(const FiniteModel &m);

/// Exact posterior marginal on Z.
ApproxPosterior posterior_approximation(const FiniteModel &m);

struct ChainRuleTerms {
  double conditional_term = 0.0;
  double marginal_term = 0.0;
};

/// KL(q || p) = E_{q_V}[KL(q_{U|V} || p_{U|V})] + KL(q_V || p_V). U and V must
/// partition 0..n-1.
ChainRuleTerms kl_chain_rule_decompose(const GaussianDist &joint_q, const GaussianDist &joint_p,
                                       std::span<const Index> U, std::span<const Index> V);

struct AugmentationGap {
  double kl_union = 0.0;
  double kl_X = 0.0;
  double gap = 0.0;
  double expected_conditional_kl = 0.0; // closed form of the gap
};

/// Prior conditional of f_Z given the remaining points of X.
GaussianConditional augmentation_prior_conditional(const FiniteModel &m);

/// Same conditional with its covariance multiplied by `factor` (2.0 is the
/// standard mismatched case).
GaussianConditional scaled_conditional(const GaussianConditional &c, double factor);

/// Treats Z as an augmentation set A appended to the original index set
/// X_o = X \ Z. The union approximation is q_{X_o} (marginal of the sparse
/// approximation) composed with `q_conditional` for f_A | f_{X_o}. Requires
/// Z and D disjoint.
AugmentationGap augmentation_gap(const FiniteModel &m, const ApproxPosterior &q,
                                 const GaussianConditional &q_conditional);

struct PushforwardReport {
  GaussianDist q_A_from_construction;
  GaussianDist q_A_pushforward;
  double max_diff = 0.0;
  double kl_union = 0.0;
  double kl_X = 0.0;
};

/// Deterministic augmentation u = A f_X.
///
/// Builds Q_X = int P(f_X | u) dq_A(u) with P the prior, pushes Q_X forward
/// through A and compares with q_A. The union KL against `reference_X` (with
/// u attached deterministically) is evaluated through the chain rule over the
/// non-degenerate split (A first, then X | A) and compared with the KL on X.
/// Throws InvalidArgument if A is rank deficient.
PushforwardReport pushforward_check(const GaussianDist &prior_X, const GaussianDist &reference_X,
                                    const GaussianDist &q_A, const Eigen::MatrixXd &A_map);

/// Prior from the model, reference = exact posterior.
PushforwardReport pushforward_check(const FiniteModel &m, const GaussianDist &q_A,
                                    const Eigen::MatrixXd &A_map);

/// Which relation Z has to D in a generated instance.
enum class InducingLayout { Disjoint, Subset, Equal };

struct InstanceShape {
  Index max_points = 12;
  Index max_data = 6;
  Index max_inducing = 4;
};

/// Seeded random instance with well-separated inputs in 1 or 2 dimensions.
FiniteModel random_finite_model(std::uint64_t seed, InducingLayout layout,
                                const InstanceShape &shape = {});

/// Seeded random q(u) over the model's inducing points.
ApproxPosterior random_approximation(const FiniteModel &m, std::uint64_t seed);

} // namespace sparsekl
