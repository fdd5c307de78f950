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

#include "sparsekl/finite_oracle.hpp"

#include "sparsekl/errors.hpp"
#include "sparsekl/features.hpp"
#include "sparsekl/linalg.hpp"
#include "sparsekl/svgp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace sparsekl {

namespace {

Eigen::MatrixXd take(const Eigen::MatrixXd &m, std::span<const Index> rows,
                     std::span<const Index> cols) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Index>(i), static_cast<Index>(j)) = m(rows[i], cols[j]);
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd &v, std::span<const Index> idx) {
  Eigen::VectorXd out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Index>(i)] = v[idx[i]];
  return out;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd &m, std::span<const Index> rows) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

bool contains(std::span<const Index> idx, Index i) {
  return std::find(idx.begin(), idx.end(), i) != idx.end();
}

IndexList concat(std::span<const Index> a, std::span<const Index> b) {
  IndexList out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

} // namespace

FiniteModel FiniteModel::from_kernel(Kernel kernel, Eigen::MatrixXd X, IndexList D, IndexList Z,
                                     Eigen::VectorXd Y, double noise_var) {
  const BaseJitterScope exact(kOracleJitterRel);
  GaussianDist prior(prior_mean(kernel, X), kernel_matrix(kernel, X, X));
  FiniteModel m{std::move(X),     std::move(D), std::move(Z), std::move(kernel),
                std::move(prior), std::move(Y), noise_var};
  m.validate();
  return m;
}

void FiniteModel::validate() const {
  const Index n = X.rows();
  if (prior.dim() != n) {
    throw DimensionError("FiniteModel: prior dimension " + std::to_string(prior.dim()) +
                         " but " + std::to_string(n) + " points");
  }
  if (D.empty()) throw IndexError("FiniteModel: data subset D is empty");
  validate_indices(n, D, "FiniteModel D");
  validate_indices(n, Z, "FiniteModel Z");
  if (static_cast<Index>(D.size()) != Y.size()) {
    throw DimensionError("FiniteModel: " + std::to_string(D.size()) + " data points but " +
                         std::to_string(Y.size()) + " observations");
  }
  if (!(noise_var > 0.0)) throw InvalidArgument("FiniteModel: noise variance must be positive");
}

ApproxPosterior::ApproxPosterior(const GaussianDist &q)
    : q_u(GaussianDist::from_cholesky(q.mean(), q.chol())) {}

GaussianDist extend_approximation(const FiniteModel &m, const ApproxPosterior &q,
                                  std::span<const Index> target) {
  const BaseJitterScope exact(kOracleJitterRel);
  validate_indices(m.size(), target, "extend_approximation");
  const IndexList &Z = m.Z;
  if (Z.empty()) throw IndexError("extend_approximation: model has no inducing points");
  if (q.q_u.dim() != static_cast<Index>(Z.size())) {
    throw DimensionError("extend_approximation: q(u) has dimension " +
                         std::to_string(q.q_u.dim()) + " for " + std::to_string(Z.size()) +
                         " inducing points");
  }
  IndexList rest;
  for (Index t : target) {
    if (!contains(Z, t)) rest.push_back(t);
  }
  // Moments over [Z, rest]: f_Z ~ q, f_rest | f_Z ~ prior conditional.
  const GaussianConditional cond = conditional_of(m.prior, rest, Z);
  const Index nz = static_cast<Index>(Z.size());
  const Index nr = static_cast<Index>(rest.size());
  const Eigen::MatrixXd &S = q.q_u.cov();
  Eigen::VectorXd mean(nz + nr);
  mean << q.q_u.mean(), cond.offset + cond.gain * q.q_u.mean();
  Eigen::MatrixXd cov(nz + nr, nz + nr);
  const Eigen::MatrixXd cross = cond.gain * S;
  cov.topLeftCorner(nz, nz) = S;
  cov.bottomLeftCorner(nr, nz) = cross;
  cov.topRightCorner(nz, nr) = cross.transpose();
  cov.bottomRightCorner(nr, nr) = cond.cov + cross * cond.gain.transpose();

  IndexList position;
  position.reserve(target.size());
  Index next_rest = nz;
  for (Index t : target) {
    const auto it = std::find(Z.begin(), Z.end(), t);
    position.push_back(it != Z.end() ? static_cast<Index>(it - Z.begin()) : next_rest++);
  }
  return GaussianDist(take(mean, position), symmetrize(take(cov, position, position)));
}

GaussianDist exact_posterior(const FiniteModel &m) {
  const BaseJitterScope exact(kOracleJitterRel);
  m.validate();
  const IndexList all = complement(m.size(), {});
  const Eigen::MatrixXd &Sigma = m.prior.cov();
  Eigen::MatrixXd S = take(Sigma, m.D, m.D);
  S.diagonal().array() += m.noise_var;
  const Eigen::MatrixXd L = cholesky_jittered(S).lower;
  const Eigen::MatrixXd W = solve_lower(L, take(Sigma, m.D, all));
  const Eigen::VectorXd resid = m.Y - take(m.prior.mean(), m.D);
  const Eigen::VectorXd mean = m.prior.mean() + W.transpose() * solve_lower(L, resid);
  return GaussianDist(mean, symmetrize(Sigma - W.transpose() * W));
}

double log_marginal_likelihood(const FiniteModel &m) {
  const BaseJitterScope exact(kOracleJitterRel);
  m.validate();
  Eigen::MatrixXd S = take(m.prior.cov(), m.D, m.D);
  S.diagonal().array() += m.noise_var;
  return mvn_logpdf(GaussianDist(take(m.prior.mean(), m.D), S), m.Y);
}

double titsias_kl(const FiniteModel &m, const ApproxPosterior &q) {
  const BaseJitterScope exact(kOracleJitterRel);
  IndexList data_only;
  for (Index d : m.D) {
    if (!contains(m.Z, d)) data_only.push_back(d);
  }
  const IndexList target = concat(m.Z, data_only);
  return mvn_kl(extend_approximation(m, q, target), mvn_marginal(exact_posterior(m), target));
}

double full_kl(const FiniteModel &m, const ApproxPosterior &q) {
  const BaseJitterScope exact(kOracleJitterRel);
  const IndexList target = concat(m.Z, complement(m.size(), m.Z));
  return mvn_kl(extend_approximation(m, q, target), mvn_marginal(exact_posterior(m), target));
}

EquivalenceReport check_finite_equivalence(const FiniteModel &m, const ApproxPosterior &q) {
  EquivalenceReport r;
  r.full = full_kl(m, q);
  r.titsias = titsias_kl(m, q);
  SVGPState s{point_features(take_rows(m.X, m.Z)), q.q_u.mean(), q.q_u.chol(), m.kernel,
              GaussianNoise{m.noise_var}};
  r.elbo_gap = log_marginal_likelihood(m) - elbo(s, take_rows(m.X, m.D), m.Y);
  r.max_abs_diff = std::max({std::abs(r.full - r.titsias), std::abs(r.full - r.elbo_gap),
                             std::abs(r.titsias - r.elbo_gap)});
  return r;
}

ApproxPosterior collapsed_approximation(const FiniteModel &m) {
  const auto opt = collapsed_optimal_q(point_features(take_rows(m.X, m.Z)), m.kernel,
                                       take_rows(m.X, m.D), m.Y, m.noise_var);
  return ApproxPosterior(GaussianDist::from_cholesky(opt.q_mean, opt.q_chol));
}

ApproxPosterior posterior_approximation(const FiniteModel &m) {
  const BaseJitterScope exact(kOracleJitterRel);
  return ApproxPosterior(mvn_marginal(exact_posterior(m), m.Z));
}

ChainRuleTerms kl_chain_rule_decompose(const GaussianDist &joint_q, const GaussianDist &joint_p,
                                       std::span<const Index> U, std::span<const Index> V) {
  const BaseJitterScope exact(kOracleJitterRel);
  if (joint_q.dim() != joint_p.dim()) {
    throw DimensionError("kl_chain_rule_decompose: dimensions " + std::to_string(joint_q.dim()) +
                         " and " + std::to_string(joint_p.dim()));
  }
  const IndexList all = concat(U, V);
  validate_indices(joint_q.dim(), all, "kl_chain_rule_decompose");
  if (static_cast<Index>(all.size()) != joint_q.dim()) {
    throw IndexError("kl_chain_rule_decompose: partition does not cover every index");
  }
  // Work with the covariances the joint factors actually represent, so the two
  // terms add up to mvn_kl(joint_q, joint_p) whatever jitter those carried.
  const GaussianDist q_eff(joint_q.mean(), symmetrize(joint_q.chol() * joint_q.chol().transpose()));
  const GaussianDist p_eff(joint_p.mean(), symmetrize(joint_p.chol() * joint_p.chol().transpose()));
  ChainRuleTerms out;
  if (V.empty()) {
    out.conditional_term = mvn_kl(q_eff, p_eff);
    return out;
  }
  const GaussianDist q_v = mvn_marginal(q_eff, V);
  out.marginal_term = mvn_kl(q_v, mvn_marginal(p_eff, V));
  if (!U.empty()) {
    out.conditional_term = expected_conditional_kl(conditional_of(q_eff, U, V),
                                                   conditional_of(p_eff, U, V), q_v);
  }
  return out;
}

GaussianConditional augmentation_prior_conditional(const FiniteModel &m) {
  const BaseJitterScope exact(kOracleJitterRel);
  return conditional_of(m.prior, m.Z, complement(m.size(), m.Z));
}

GaussianConditional scaled_conditional(const GaussianConditional &c, double factor) {
  if (!(factor > 0.0)) throw InvalidArgument("scaled_conditional: factor must be positive");
  GaussianConditional out = c;
  out.cov *= factor;
  return out;
}

AugmentationGap augmentation_gap(const FiniteModel &m, const ApproxPosterior &q,
                                 const GaussianConditional &q_conditional) {
  const BaseJitterScope exact(kOracleJitterRel);
  m.validate();
  for (Index z : m.Z) {
    if (contains(m.D, z)) {
      throw IndexError("augmentation_gap: augmentation set must be disjoint from the data");
    }
  }
  const IndexList original = complement(m.size(), m.Z);
  const Index nz = static_cast<Index>(m.Z.size());
  const Index no = static_cast<Index>(original.size());
  if (q_conditional.target_dim() != nz || q_conditional.given_dim() != no ||
      q_conditional.gain.rows() != nz || q_conditional.cov.rows() != nz ||
      q_conditional.cov.cols() != nz) {
    throw DimensionError("augmentation_gap: conditional must map " + std::to_string(no) +
                         " original coordinates to " + std::to_string(nz) +
                         " augmenting coordinates");
  }
  const GaussianDist posterior = exact_posterior(m);
  const GaussianDist q_x = extend_approximation(m, q, original);
  const GaussianDist q_union = compose(q_x, q_conditional);
  AugmentationGap out;
  out.kl_X = mvn_kl(q_x, mvn_marginal(posterior, original));
  out.kl_union = mvn_kl(q_union, mvn_marginal(posterior, concat(original, m.Z)));
  out.gap = out.kl_union - out.kl_X;
  out.expected_conditional_kl =
      expected_conditional_kl(q_conditional, augmentation_prior_conditional(m), q_x);
  return out;
}

PushforwardReport pushforward_check(const GaussianDist &prior_X, const GaussianDist &reference_X,
                                    const GaussianDist &q_A, const Eigen::MatrixXd &A_map) {
  const BaseJitterScope exact(kOracleJitterRel);
  const Index n = prior_X.dim();
  const Index k = A_map.rows();
  if (A_map.cols() != n || reference_X.dim() != n || q_A.dim() != k) {
    throw DimensionError("pushforward_check: map is " + std::to_string(k) + "x" +
                         std::to_string(A_map.cols()) + ", prior dimension " +
                         std::to_string(n) + ", q_A dimension " + std::to_string(q_A.dim()));
  }
  if (k == 0 || k > n) throw InvalidArgument("pushforward_check: map must have 1..n rows");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A_map);
  if (lu.rank() < k) throw InvalidArgument("pushforward_check: map is rank deficient");

  // Q_X = int P(f | u) dq_A(u), with the prior conditional of f given u = A f.
  const Eigen::MatrixXd &Sigma = prior_X.cov();
  const Eigen::MatrixXd C = Sigma * A_map.transpose();
  const Eigen::MatrixXd LG = cholesky_jittered(symmetrize(A_map * C)).lower;
  const Eigen::MatrixXd W = solve_lower(LG, C.transpose());
  const Eigen::MatrixXd gain = solve_lower_transpose(LG, W).transpose();
  const Eigen::MatrixXd spread = gain * q_A.chol();
  const Eigen::VectorXd q_mean = prior_X.mean() + gain * (q_A.mean() - A_map * prior_X.mean());
  const Eigen::MatrixXd q_cov =
      symmetrize(Sigma - W.transpose() * W + spread * spread.transpose());
  const GaussianDist q_X(q_mean, q_cov);

  PushforwardReport out{q_A, GaussianDist(A_map * q_mean, symmetrize(A_map * q_cov * A_map.transpose())),
                        0.0, 0.0, 0.0};
  out.max_diff = std::max(
      (out.q_A_pushforward.mean() - out.q_A_from_construction.mean()).cwiseAbs().maxCoeff(),
      (out.q_A_pushforward.cov() - out.q_A_from_construction.cov()).cwiseAbs().maxCoeff());
  out.kl_X = mvn_kl(q_X, reference_X);

  // Union KL over coordinates (u, w) = (A f, N^T f), N an orthonormal basis of
  // ker A: KL(q_A || ref_A) + E_{q_A}[KL(P(w | u) || Ref(w | u))].
  Eigen::MatrixXd T(n, n);
  T.topRows(k) = A_map;
  if (k < n) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A_map.transpose());
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    T.bottomRows(n - k) = Q.rightCols(n - k).transpose();
  }
  const GaussianDist prior_t(T * prior_X.mean(), symmetrize(T * Sigma * T.transpose()));
  const GaussianDist ref_t(T * reference_X.mean(),
                           symmetrize(T * reference_X.cov() * T.transpose()));
  IndexList u_idx(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) u_idx[static_cast<std::size_t>(i)] = i;
  const IndexList w_idx = complement(n, u_idx);
  out.kl_union = mvn_kl(q_A, mvn_marginal(ref_t, u_idx));
  if (!w_idx.empty()) {
    out.kl_union += expected_conditional_kl(conditional_of(prior_t, w_idx, u_idx),
                                            conditional_of(ref_t, w_idx, u_idx), q_A);
  }
  return out;
}

PushforwardReport pushforward_check(const FiniteModel &m, const GaussianDist &q_A,
                                    const Eigen::MatrixXd &A_map) {
  return pushforward_check(m.prior, exact_posterior(m), q_A, A_map);
}

namespace {

Eigen::MatrixXd separated_points(std::mt19937_64 &rng, Index n, Index d, double ell) {
  const double min_sep = 0.6 * ell;
  const double side =
      d == 1 ? 1.2 * min_sep * static_cast<double>(n) + ell
             : 1.6 * min_sep * std::sqrt(static_cast<double>(n)) + ell;
  std::uniform_real_distribution<double> u(0.0, side);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Eigen::MatrixXd X(n, d);
    bool ok = true;
    for (Index i = 0; i < n && ok; ++i) {
      for (int tries = 0; tries < 1000; ++tries) {
        for (Index a = 0; a < d; ++a) X(i, a) = u(rng);
        ok = true;
        for (Index j = 0; j < i; ++j) {
          if ((X.row(i) - X.row(j)).norm() < min_sep) {
            ok = false;
            break;
          }
        }
        if (ok) break;
      }
    }
    if (ok) return X;
  }
  throw InvalidArgument("random_finite_model: could not place separated points");
}

Eigen::MatrixXd random_covariance(std::mt19937_64 &rng, Index n, double lo, double hi) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd G(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) G(i, j) = z(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd eig(n);
  for (Index i = 0; i < n; ++i) eig[i] = u(rng);
  return symmetrize(Q * eig.asDiagonal() * Q.transpose());
}

Index uniform_index(std::mt19937_64 &rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

} // namespace

FiniteModel random_finite_model(std::uint64_t seed, InducingLayout layout,
                                const InstanceShape &shape) {
  const BaseJitterScope exact(kOracleJitterRel);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const Index d = 1 + uniform_index(rng, 0, 1);
  const double variance = 0.5 + 1.5 * u01(rng);
  const double ell = 0.5 + u01(rng);
  const double mean_const = -1.0 + 2.0 * u01(rng);
  const double noise_var = 0.05 + 0.45 * u01(rng);

  Index n_data = 0;
  Index n_ind = 0;
  switch (layout) {
  case InducingLayout::Disjoint:
    n_data = uniform_index(rng, 1, shape.max_data);
    n_ind = uniform_index(rng, 1, std::min(shape.max_inducing, shape.max_points - n_data));
    break;
  case InducingLayout::Subset:
    n_data = uniform_index(rng, 2, shape.max_data);
    n_ind = uniform_index(rng, 1, std::min(shape.max_inducing, n_data - 1));
    break;
  case InducingLayout::Equal:
    n_data = uniform_index(rng, 1, std::min(shape.max_data, shape.max_inducing));
    n_ind = n_data;
    break;
  }
  const Index used = layout == InducingLayout::Disjoint ? n_data + n_ind : n_data;
  const Index n = uniform_index(rng, used, shape.max_points);

  IndexList perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  IndexList D(perm.begin(), perm.begin() + n_data);
  IndexList Z;
  switch (layout) {
  case InducingLayout::Disjoint:
    Z.assign(perm.begin() + n_data, perm.begin() + n_data + n_ind);
    break;
  case InducingLayout::Subset:
  case InducingLayout::Equal:
    Z.assign(D.begin(), D.begin() + n_ind);
    std::shuffle(Z.begin(), Z.end(), rng);
    break;
  }

  Kernel kernel = Kernel::isotropic(variance, ell, d, mean_const);
  Eigen::MatrixXd X = separated_points(rng, n, d, ell);
  const GaussianDist prior(prior_mean(kernel, X), kernel_matrix(kernel, X, X));
  std::normal_distribution<double> z;
  Eigen::VectorXd e(n);
  for (Index i = 0; i < n; ++i) e[i] = z(rng);
  const Eigen::VectorXd f = prior.mean() + prior.chol() * e;
  Eigen::VectorXd Y(n_data);
  for (Index i = 0; i < n_data; ++i) {
    Y[i] = f[D[static_cast<std::size_t>(i)]] + std::sqrt(noise_var) * z(rng);
  }
  return FiniteModel::from_kernel(std::move(kernel), std::move(X), std::move(D), std::move(Z),
                                  std::move(Y), noise_var);
}

ApproxPosterior random_approximation(const FiniteModel &m, std::uint64_t seed) {
  const BaseJitterScope exact(kOracleJitterRel);
  std::mt19937_64 rng(seed);
  const Index nz = static_cast<Index>(m.Z.size());
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd mean(nz);
  for (Index i = 0; i < nz; ++i) mean[i] = m.kernel.mean_const() + u(rng);
  const double v = m.kernel.variance();
  return ApproxPosterior(GaussianDist(mean, random_covariance(rng, nz, 0.05 * v, 0.8 * v)));
}

} // namespace sparsekl
