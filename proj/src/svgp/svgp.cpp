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

#include "sparsekl/svgp.hpp"

#include "sparsekl/errors.hpp"
#include "sparsekl/linalg.hpp"
#include "sparsekl/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace sparsekl {

namespace {

void check_data(const Eigen::MatrixXd &X, const Eigen::VectorXd &Y, const Kernel &k) {
  if (X.rows() != Y.size()) {
    throw DimensionError("data: " + std::to_string(X.rows()) + " inputs but " +
                         std::to_string(Y.size()) + " observations");
  }
  if (X.cols() != k.input_dim()) {
    throw DimensionError("data: inputs have " + std::to_string(X.cols()) +
                         " columns, kernel dimension " + std::to_string(k.input_dim()));
  }
}

PredictiveMarginals predict_with(const SVGPState &s, const GaussianDist &p_u,
                                 const Eigen::MatrixXd &Xstar) {
  const Eigen::MatrixXd Kuf = assemble_Kuf(s.features, s.kernel, Xstar);
  const Eigen::MatrixXd &L = p_u.chol();
  const Eigen::MatrixXd A = solve_lower(L, Kuf);       // L^-1 Kuf
  const Eigen::MatrixXd B = solve_lower_transpose(L, A); // Kuu^-1 Kuf
  PredictiveMarginals out;
  out.mean = prior_mean(s.kernel, Xstar) + B.transpose() * (s.q_mean - p_u.mean());
  const Eigen::MatrixXd SB = s.q_chol.transpose() * B;
  out.var = (Eigen::VectorXd::Constant(Xstar.rows(), s.kernel.variance()) -
             A.colwise().squaredNorm().transpose() + SB.colwise().squaredNorm().transpose())
                .cwiseMax(0.0);
  return out;
}

double ell_from(const PredictiveMarginals &pm, const Eigen::VectorXd &Y, const Likelihood &lik,
                int order) {
  if (order < 1) throw InvalidArgument("quadrature order must be at least 1");
  validate(lik);
  const QuadratureRule gh = gauss_hermite(order);
  double acc = 0.0;
  for (Index i = 0; i < Y.size(); ++i) {
    acc += variational_expectation(lik, pm.mean[i], pm.var[i], Y[i], gh);
  }
  return acc;
}

} // namespace

void SVGPState::validate() const {
  const Index m = num_inducing();
  if (m < 1) throw InvalidArgument("SVGPState: needs at least one inducing feature");
  for (const auto &f : features) {
    if (feature_dim(f) != kernel.input_dim()) {
      throw DimensionError("SVGPState: feature dimension " + std::to_string(feature_dim(f)) +
                           " vs kernel dimension " + std::to_string(kernel.input_dim()));
    }
  }
  if (q_mean.size() != m || q_chol.rows() != m || q_chol.cols() != m) {
    throw DimensionError("SVGPState: q_mean/q_chol do not match " + std::to_string(m) +
                         " features");
  }
  for (Index i = 0; i < m; ++i) {
    if (!(q_chol(i, i) > 0.0)) {
      throw InvalidArgument("SVGPState: q_chol diagonal must be strictly positive");
    }
    for (Index j = i + 1; j < m; ++j) {
      if (q_chol(i, j) != 0.0) throw InvalidArgument("SVGPState: q_chol must be lower-triangular");
    }
  }
  sparsekl::validate(likelihood);
}

GaussianDist SVGPState::q_u() const { return GaussianDist::from_cholesky(q_mean, q_chol); }

GaussianDist inducing_prior(const std::vector<InducingFeature> &features, const Kernel &k) {
  return GaussianDist(feature_means(features, k), assemble_Kuu(features, k));
}

SVGPState prior_state(std::vector<InducingFeature> features, Kernel kernel,
                      Likelihood likelihood) {
  const GaussianDist p_u = inducing_prior(features, kernel);
  SVGPState s{std::move(features), p_u.mean(), p_u.chol(), std::move(kernel),
              std::move(likelihood)};
  s.validate();
  return s;
}

PredictiveMarginals predictive_marginals(const SVGPState &s, const Eigen::MatrixXd &Xstar) {
  s.validate();
  if (Xstar.cols() != s.kernel.input_dim()) {
    throw DimensionError("predictive_marginals: inputs have " + std::to_string(Xstar.cols()) +
                         " columns, kernel dimension " + std::to_string(s.kernel.input_dim()));
  }
  return predict_with(s, inducing_prior(s.features, s.kernel), Xstar);
}

double expected_log_lik(const SVGPState &s, const Eigen::MatrixXd &X, const Eigen::VectorXd &Y,
                        const Likelihood &lik, int order) {
  s.validate();
  check_data(X, Y, s.kernel);
  return ell_from(predict_with(s, inducing_prior(s.features, s.kernel), X), Y, lik, order);
}

double inducing_kl(const SVGPState &s) {
  s.validate();
  return mvn_kl(s.q_u(), inducing_prior(s.features, s.kernel));
}

double elbo(const SVGPState &s, const Eigen::MatrixXd &X, const Eigen::VectorXd &Y,
            const Likelihood &lik, int order) {
  s.validate();
  check_data(X, Y, s.kernel);
  const GaussianDist p_u = inducing_prior(s.features, s.kernel);
  const double ell = ell_from(predict_with(s, p_u, X), Y, lik, order);
  return ell - mvn_kl(s.q_u(), p_u);
}

double elbo(const SVGPState &s, const Eigen::MatrixXd &X, const Eigen::VectorXd &Y) {
  return elbo(s, X, Y, s.likelihood);
}

namespace {

struct CollapsedPieces {
  Eigen::MatrixXd L;  // chol(Kuu)
  Eigen::MatrixXd A;  // L^-1 Kuf / sigma
  Eigen::MatrixXd LB; // chol(I + A A^T)
  Eigen::VectorXd r;  // Y - prior mean
  Eigen::VectorXd mu_u;
};

CollapsedPieces collapsed_pieces(const std::vector<InducingFeature> &features,
                                 const Kernel &kernel, const Eigen::MatrixXd &X,
                                 const Eigen::VectorXd &Y, double noise_var) {
  if (!(noise_var > 0.0)) throw InvalidArgument("collapsed: noise variance must be positive");
  check_data(X, Y, kernel);
  const GaussianDist p_u = inducing_prior(features, kernel);
  CollapsedPieces c;
  c.L = p_u.chol();
  c.mu_u = p_u.mean();
  c.A = solve_lower(c.L, assemble_Kuf(features, kernel, X)) / std::sqrt(noise_var);
  Eigen::MatrixXd B = c.A * c.A.transpose();
  B.diagonal().array() += 1.0;
  // B >= I, so no jitter is needed; a relative jitter would scale with the
  // data size and bias log det B.
  Eigen::LLT<Eigen::MatrixXd> llt(symmetrize(B));
  c.LB = llt.info() == Eigen::Success ? Eigen::MatrixXd(llt.matrixL())
                                      : cholesky_jittered(symmetrize(B)).lower;
  c.r = Y - prior_mean(kernel, X);
  return c;
}

} // namespace

VariationalParams collapsed_optimal_q(const std::vector<InducingFeature> &features,
                                      const Kernel &kernel, const Eigen::MatrixXd &X,
                                      const Eigen::VectorXd &Y, double noise_var) {
  const CollapsedPieces c = collapsed_pieces(features, kernel, X, Y, noise_var);
  // S = L B^-1 L^T = C^T C with C = LB^-1 L^T; a QR of C gives the lower factor
  // without another jittered factorization.
  const Eigen::MatrixXd C = solve_lower(c.LB, c.L.transpose());
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(C);
  Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index i = 0; i < R.rows(); ++i) {
    if (R(i, i) < 0.0) R.row(i) *= -1.0;
  }
  VariationalParams out;
  out.q_chol = R.transpose();
  const Eigen::VectorXd t = solve_lower(c.LB, c.A * c.r);
  out.q_mean = c.mu_u + c.L * solve_lower_transpose(c.LB, t) / std::sqrt(noise_var);
  return out;
}

double collapsed_bound(const std::vector<InducingFeature> &features, const Kernel &kernel,
                       const Eigen::MatrixXd &X, const Eigen::VectorXd &Y, double noise_var) {
  const CollapsedPieces c = collapsed_pieces(features, kernel, X, Y, noise_var);
  const double n = static_cast<double>(Y.size());
  const Eigen::VectorXd proj = solve_lower(c.LB, c.A * c.r) / std::sqrt(noise_var);
  const double log_det_b = log_det_from_cholesky(c.LB);
  return -0.5 * n * std::log(2.0 * std::numbers::pi * noise_var) - 0.5 * log_det_b -
         0.5 * c.r.squaredNorm() / noise_var + 0.5 * proj.squaredNorm() -
         0.5 * n * kernel.variance() / noise_var + 0.5 * c.A.squaredNorm();
}

} // namespace sparsekl
