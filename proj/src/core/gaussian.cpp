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

#include "sparsekl/gaussian.hpp"

#include "sparsekl/errors.hpp"
#include "sparsekl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace sparsekl {

namespace {

void check_shapes(const Eigen::VectorXd &mean, const Eigen::MatrixXd &cov) {
  if (cov.rows() != cov.cols() || cov.rows() != mean.size()) {
    throw DimensionError("GaussianDist: mean of length " + std::to_string(mean.size()) +
                         " with covariance " + std::to_string(cov.rows()) + "x" +
                         std::to_string(cov.cols()));
  }
}

Eigen::MatrixXd take(const Eigen::MatrixXd &m, std::span<const Index> rows,
                     std::span<const Index> cols) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      out(static_cast<Index>(i), static_cast<Index>(j)) = m(rows[i], cols[j]);
    }
  }
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd &v, std::span<const Index> idx) {
  Eigen::VectorXd out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Index>(i)] = v[idx[i]];
  return out;
}

} // namespace

GaussianDist::GaussianDist(Eigen::VectorXd mean, Eigen::MatrixXd cov)
    : mean_(std::move(mean)) {
  check_shapes(mean_, cov);
  auto factor = cholesky_jittered(cov);
  cov_ = symmetrize(cov);
  chol_ = std::move(factor.lower);
  jitter_ = factor.jitter;
}

GaussianDist::GaussianDist(Eigen::VectorXd mean, Eigen::MatrixXd cov, double base_jitter)
    : mean_(std::move(mean)) {
  check_shapes(mean_, cov);
  auto factor = cholesky_jittered(cov, base_jitter);
  cov_ = symmetrize(cov);
  chol_ = std::move(factor.lower);
  jitter_ = factor.jitter;
}

GaussianDist GaussianDist::from_cholesky(Eigen::VectorXd mean, Eigen::MatrixXd lower) {
  check_shapes(mean, lower);
  for (Index i = 0; i < lower.rows(); ++i) {
    if (!(lower(i, i) > 0.0)) {
      throw InvalidArgument("from_cholesky: diagonal must be strictly positive");
    }
    for (Index j = i + 1; j < lower.cols(); ++j) {
      if (lower(i, j) != 0.0) {
        throw InvalidArgument("from_cholesky: factor must be lower-triangular");
      }
    }
  }
  GaussianDist out;
  out.mean_ = std::move(mean);
  out.cov_ = symmetrize(lower * lower.transpose());
  out.chol_ = std::move(lower);
  out.jitter_ = 0.0;
  return out;
}

double GaussianDist::log_det() const { return log_det_from_cholesky(chol_); }

double mvn_kl(const GaussianDist &q, const GaussianDist &p) {
  if (q.dim() != p.dim()) {
    throw DimensionError("mvn_kl: dimensions " + std::to_string(q.dim()) + " and " +
                         std::to_string(p.dim()));
  }
  const Index n = q.dim();
  if (n == 0) return 0.0;
  const Eigen::MatrixXd scaled = solve_lower(p.chol(), q.chol());
  const Eigen::VectorXd diff = solve_lower(p.chol(), p.mean() - q.mean());
  const double kl = 0.5 * (scaled.squaredNorm() + diff.squaredNorm() -
                           static_cast<double>(n) + p.log_det() - q.log_det());
  return std::max(kl, 0.0);
}

double mvn_logpdf(const GaussianDist &p, const Eigen::Ref<const Eigen::VectorXd> &x) {
  if (x.size() != p.dim()) {
    throw DimensionError("mvn_logpdf: point of length " + std::to_string(x.size()) +
                         " for dimension " + std::to_string(p.dim()));
  }
  const Eigen::VectorXd white = solve_lower(p.chol(), x - p.mean());
  return -0.5 * (static_cast<double>(p.dim()) * std::log(2.0 * std::numbers::pi) +
                 p.log_det() + white.squaredNorm());
}

void validate_indices(Index n, std::span<const Index> idx, const char *what) {
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (Index i : idx) {
    if (i < 0 || i >= n) {
      throw IndexError(std::string(what) + ": index " + std::to_string(i) +
                       " out of range [0, " + std::to_string(n) + ")");
    }
    if (seen[static_cast<std::size_t>(i)]) {
      throw IndexError(std::string(what) + ": duplicate index " + std::to_string(i));
    }
    seen[static_cast<std::size_t>(i)] = true;
  }
}

IndexList complement(Index n, std::span<const Index> idx) {
  std::vector<bool> in(static_cast<std::size_t>(n), false);
  for (Index i : idx) {
    if (i >= 0 && i < n) in[static_cast<std::size_t>(i)] = true;
  }
  IndexList out;
  for (Index i = 0; i < n; ++i) {
    if (!in[static_cast<std::size_t>(i)]) out.push_back(i);
  }
  return out;
}

GaussianDist mvn_marginal(const GaussianDist &p, std::span<const Index> idx) {
  validate_indices(p.dim(), idx, "mvn_marginal");
  if (idx.empty()) throw IndexError("mvn_marginal: empty index list");
  return GaussianDist(take(p.mean(), idx), take(p.cov(), idx, idx));
}

GaussianDist mvn_condition(const GaussianDist &joint, std::span<const Index> obs_idx,
                           const Eigen::Ref<const Eigen::VectorXd> &obs_val) {
  validate_indices(joint.dim(), obs_idx, "mvn_condition");
  if (static_cast<Index>(obs_idx.size()) != obs_val.size()) {
    throw DimensionError("mvn_condition: " + std::to_string(obs_idx.size()) +
                         " indices but " + std::to_string(obs_val.size()) + " values");
  }
  const IndexList rest = complement(joint.dim(), obs_idx);
  if (rest.empty()) throw IndexError("mvn_condition: all indices observed");
  const GaussianConditional cond = conditional_of(joint, rest, obs_idx);
  return GaussianDist(cond.offset + cond.gain * obs_val, cond.cov);
}

GaussianConditional conditional_of(const GaussianDist &joint,
                                   std::span<const Index> target,
                                   std::span<const Index> given) {
  validate_indices(joint.dim(), target, "conditional_of(target)");
  validate_indices(joint.dim(), given, "conditional_of(given)");
  for (Index t : target) {
    if (std::find(given.begin(), given.end(), t) != given.end()) {
      throw IndexError("conditional_of: target and given overlap at index " +
                       std::to_string(t));
    }
  }
  const Eigen::VectorXd mu_t = take(joint.mean(), target);
  const Eigen::MatrixXd cov_tt = take(joint.cov(), target, target);
  GaussianConditional out;
  if (given.empty()) {
    out.gain = Eigen::MatrixXd::Zero(mu_t.size(), 0);
    out.offset = mu_t;
    out.cov = cov_tt;
    return out;
  }
  const Eigen::VectorXd mu_g = take(joint.mean(), given);
  const Eigen::MatrixXd cov_gg = take(joint.cov(), given, given);
  const Eigen::MatrixXd cov_gt = take(joint.cov(), given, target);
  const Eigen::MatrixXd L = cholesky_jittered(cov_gg).lower;
  const Eigen::MatrixXd W = solve_lower(L, cov_gt);
  out.gain = solve_lower_transpose(L, W).transpose();
  out.offset = mu_t - out.gain * mu_g;
  out.cov = symmetrize(cov_tt - W.transpose() * W);
  return out;
}

GaussianDist compose(const GaussianDist &marginal_v, const GaussianConditional &cond) {
  if (cond.given_dim() != marginal_v.dim() || cond.cov.rows() != cond.target_dim() ||
      cond.cov.cols() != cond.target_dim() || cond.gain.rows() != cond.target_dim()) {
    throw DimensionError("compose: conditional expects " +
                         std::to_string(cond.given_dim()) + " given coordinates, marginal has " +
                         std::to_string(marginal_v.dim()));
  }
  const Index nv = marginal_v.dim();
  const Index nu = cond.target_dim();
  const Eigen::MatrixXd &sv = marginal_v.cov();
  Eigen::VectorXd mean(nv + nu);
  mean << marginal_v.mean(), cond.offset + cond.gain * marginal_v.mean();
  Eigen::MatrixXd cov(nv + nu, nv + nu);
  const Eigen::MatrixXd cross = cond.gain * sv;
  cov.topLeftCorner(nv, nv) = sv;
  cov.bottomLeftCorner(nu, nv) = cross;
  cov.topRightCorner(nv, nu) = cross.transpose();
  cov.bottomRightCorner(nu, nu) = symmetrize(cond.cov + cross * cond.gain.transpose());
  return GaussianDist(std::move(mean), std::move(cov));
}

double expected_conditional_kl(const GaussianConditional &q_cond,
                               const GaussianConditional &p_cond,
                               const GaussianDist &q_v) {
  if (q_cond.target_dim() != p_cond.target_dim() ||
      q_cond.given_dim() != p_cond.given_dim() || q_cond.given_dim() != q_v.dim()) {
    throw DimensionError("expected_conditional_kl: conditional shapes disagree");
  }
  const Index n = q_cond.target_dim();
  if (n == 0) return 0.0;
  const auto Lq = cholesky_jittered(q_cond.cov).lower;
  const auto Lp = cholesky_jittered(p_cond.cov).lower;
  const Eigen::MatrixXd gain_diff = q_cond.gain - p_cond.gain;
  const Eigen::VectorXd mean_diff =
      q_cond.offset - p_cond.offset + gain_diff * q_v.mean();
  const Eigen::MatrixXd H = solve_lower(Lp, gain_diff);
  // Through the cached factor, like mvn_kl, so q_v means N(mean, L L^T).
  const double spread = (H * q_v.chol()).squaredNorm();
  const double kl = 0.5 * (solve_lower(Lp, Lq).squaredNorm() +
                           solve_lower(Lp, mean_diff).squaredNorm() + spread -
                           static_cast<double>(n) + log_det_from_cholesky(Lp) -
                           log_det_from_cholesky(Lq));
  return std::max(kl, 0.0);
}

} // namespace sparsekl
