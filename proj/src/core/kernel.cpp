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

#include "sparsekl/kernel.hpp"

#include "sparsekl/errors.hpp"
#include "sparsekl/simd.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace sparsekl {

namespace {

std::string shape(const Eigen::MatrixXd &m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

} // namespace

Kernel::Kernel(double variance, Eigen::VectorXd lengthscales, double mean_const)
    : variance_(variance), lengthscales_(std::move(lengthscales)),
      mean_const_(mean_const) {
  if (!(variance_ > 0.0) || !std::isfinite(variance_)) {
    throw InvalidArgument("kernel variance must be positive and finite");
  }
  if (lengthscales_.size() == 0) {
    throw InvalidArgument("kernel needs at least one lengthscale");
  }
  for (Index a = 0; a < lengthscales_.size(); ++a) {
    if (!(lengthscales_[a] > 0.0) || !std::isfinite(lengthscales_[a])) {
      throw InvalidArgument("kernel lengthscales must be positive and finite");
    }
  }
  if (!std::isfinite(mean_const_)) {
    throw InvalidArgument("kernel mean must be finite");
  }
}

Kernel Kernel::isotropic(double variance, double lengthscale, Index dim,
                         double mean_const) {
  return Kernel(variance, Eigen::VectorXd::Constant(dim, lengthscale), mean_const);
}

double Kernel::operator()(const Eigen::Ref<const Eigen::VectorXd> &x1,
                          const Eigen::Ref<const Eigen::VectorXd> &x2) const {
  if (x1.size() != input_dim() || x2.size() != input_dim()) {
    throw DimensionError("kernel evaluation: inputs of length " +
                         std::to_string(x1.size()) + " and " +
                         std::to_string(x2.size()) + ", kernel dimension " +
                         std::to_string(input_dim()));
  }
  double r2 = 0.0;
  for (Index a = 0; a < input_dim(); ++a) {
    const double diff = x1[a] / lengthscales_[a] - x2[a] / lengthscales_[a];
    r2 = r2 + diff * diff;
  }
  return variance_ * std::exp(-0.5 * r2);
}

Eigen::MatrixXd kernel_matrix(const Kernel &k, const Eigen::MatrixXd &X1,
                              const Eigen::MatrixXd &X2) {
  const Index d = k.input_dim();
  if (X1.cols() != d || X2.cols() != d) {
    throw DimensionError("kernel_matrix: input shapes " + shape(X1) + " and " +
                         shape(X2) + " do not match kernel dimension " +
                         std::to_string(d));
  }
  const Index n1 = X1.rows();
  const Index n2 = X2.rows();
  Eigen::MatrixXd K(n1, n2);
  if (n1 == 0 || n2 == 0) return K;

  // Scaled X2 in dimension-major order for the row kernel.
  std::vector<double> columns(static_cast<std::size_t>(d * n2));
  for (Index a = 0; a < d; ++a) {
    for (Index j = 0; j < n2; ++j) {
      columns[static_cast<std::size_t>(a * n2 + j)] = X2(j, a) / k.lengthscales()[a];
    }
  }
  std::vector<double> point(static_cast<std::size_t>(d));
  std::vector<double> r2(static_cast<std::size_t>(n2));
  for (Index i = 0; i < n1; ++i) {
    for (Index a = 0; a < d; ++a) {
      point[static_cast<std::size_t>(a)] = X1(i, a) / k.lengthscales()[a];
    }
    simd::sqdist_row(point, columns, static_cast<std::size_t>(n2), r2);
    for (Index j = 0; j < n2; ++j) {
      K(i, j) = k.variance() * std::exp(-0.5 * r2[static_cast<std::size_t>(j)]);
    }
  }
  return K;
}

Eigen::VectorXd prior_mean(const Kernel &k, const Eigen::MatrixXd &X) {
  return Eigen::VectorXd::Constant(X.rows(), k.mean_const());
}

} // namespace sparsekl
