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

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace sparsekl::testing {

using Rng = std::mt19937_64;

inline Eigen::MatrixXd random_matrix(Rng &rng, Index rows, Index cols,
                                     double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

inline Eigen::VectorXd random_vector(Rng &rng, Index n, double lo = -1.0,
                                     double hi = 1.0) {
  return random_matrix(rng, n, 1, lo, hi).col(0);
}

/// SPD matrix with eigenvalues in [lo, hi] and a random orientation.
inline Eigen::MatrixXd random_spd(Rng &rng, Index n, double lo = 0.3, double hi = 2.0) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rng, n, n));
  const Eigen::MatrixXd Q = qr.householderQ();
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd eig(n);
  for (Index i = 0; i < n; ++i) eig[i] = u(rng);
  Eigen::MatrixXd A = Q * eig.asDiagonal() * Q.transpose();
  return 0.5 * (A + A.transpose());
}

inline GaussianDist random_gaussian(Rng &rng, Index n) {
  return GaussianDist(random_vector(rng, n), random_spd(rng, n));
}

/// Standard normal draws through the distribution's Cholesky factor.
inline Eigen::VectorXd sample(const GaussianDist &p, Rng &rng) {
  std::normal_distribution<double> z;
  Eigen::VectorXd e(p.dim());
  for (Index i = 0; i < p.dim(); ++i) e[i] = z(rng);
  return p.mean() + p.chol() * e;
}

inline double min_eigenvalue(const Eigen::MatrixXd &A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Running mean and standard error.
struct MeanEstimate {
  double sum = 0.0;
  double sum_sq = 0.0;
  long n = 0;
  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++n;
  }
  double mean() const { return sum / static_cast<double>(n); }
  double std_error() const {
    const double m = mean();
    const double var = (sum_sq / static_cast<double>(n) - m * m) *
                       static_cast<double>(n) / static_cast<double>(n - 1);
    return std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
  }
};

} // namespace sparsekl::testing
