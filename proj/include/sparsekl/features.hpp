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

#include <variant>
#include <vector>

namespace sparsekl {

/// Evaluation functional u = f(location).
struct PointFeature {
  Eigen::VectorXd location;
};

/// Integral functional u = int N(s; center, diag(widths^2)) f(s) ds. The window
/// is a probability density, so the prior mean of u equals the kernel mean.
struct GaussianWindowFeature {
  Eigen::VectorXd center;
  Eigen::VectorXd widths;
};

using InducingFeature = std::variant<PointFeature, GaussianWindowFeature>;

InducingFeature point_feature(Eigen::VectorXd location);

/// Throws InvalidArgument unless every width is strictly positive.
InducingFeature gaussian_window(Eigen::VectorXd center, Eigen::VectorXd widths);

Index feature_dim(const InducingFeature &f);

/// Point location or window center.
const Eigen::VectorXd &feature_location(const InducingFeature &f);

bool is_point(const InducingFeature &f);

/// cov(u, f(x)) = int g(s) k(s, x) ds.
double feature_point_cov(const InducingFeature &f, const Kernel &k,
                         const Eigen::Ref<const Eigen::VectorXd> &x);

/// cov(u_1, u_2) = int int g_1(s) g_2(t) k(s, t) ds dt. Symmetric in its
/// feature arguments bit for bit.
double feature_feature_cov(const InducingFeature &f1, const InducingFeature &f2,
                           const Kernel &k);

/// Prior mean E[u].
double feature_prior_mean(const InducingFeature &f, const Kernel &k);

Eigen::MatrixXd assemble_Kuu(const std::vector<InducingFeature> &features, const Kernel &k);

/// M x n cross-covariance between features and the rows of X.
Eigen::MatrixXd assemble_Kuf(const std::vector<InducingFeature> &features, const Kernel &k,
                             const Eigen::MatrixXd &X);

Eigen::VectorXd feature_means(const std::vector<InducingFeature> &features, const Kernel &k);

/// Point features at the rows of Z.
std::vector<InducingFeature> point_features(const Eigen::MatrixXd &Z);

} // namespace sparsekl
