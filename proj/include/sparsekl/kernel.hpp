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

#include <Eigen/Dense>

namespace sparsekl {

using Index = Eigen::Index;

enum class KernelFamily { SquaredExponential };

/// Squared-exponential covariance with ARD lengthscales and a constant prior
/// mean: k(x, x') = variance * exp(-0.5 * sum_a ((x_a - x'_a) / l_a)^2).
///
/// Immutable after construction; the constructor rejects non-positive or
/// non-finite hyperparameters.
class Kernel {
public:
  Kernel(double variance, Eigen::VectorXd lengthscales, double mean_const = 0.0);

  /// Isotropic convenience constructor.
  static Kernel isotropic(double variance, double lengthscale, Index dim,
                          double mean_const = 0.0);

  KernelFamily family() const noexcept { return KernelFamily::SquaredExponential; }
  double variance() const noexcept { return variance_; }
  const Eigen::VectorXd &lengthscales() const noexcept { return lengthscales_; }
  double mean_const() const noexcept { return mean_const_; }
  Index input_dim() const noexcept { return lengthscales_.size(); }

  double operator()(const Eigen::Ref<const Eigen::VectorXd> &x1,
                    const Eigen::Ref<const Eigen::VectorXd> &x2) const;

private:
  double variance_;
  Eigen::VectorXd lengthscales_;
  double mean_const_;
};

/// Gram matrix between the rows of X1 (n1 x d) and X2 (n2 x d).
Eigen::MatrixXd kernel_matrix(const Kernel &k, const Eigen::MatrixXd &X1,
                              const Eigen::MatrixXd &X2);

/// Prior mean vector at the rows of X.
Eigen::VectorXd prior_mean(const Kernel &k, const Eigen::MatrixXd &X);

} // namespace sparsekl
