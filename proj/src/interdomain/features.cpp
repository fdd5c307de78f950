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

#include "sparsekl/features.hpp"

#include "sparsekl/errors.hpp"

#include <cmath>
#include <string>

namespace sparsekl {

namespace {

void require_dim(Index got, Index want, const char *what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": feature dimension " + std::to_string(got) +
                         " does not match kernel dimension " + std::to_string(want));
  }
}

// Squared smoothing widths per dimension (zero for point features).
Eigen::VectorXd squared_widths(const InducingFeature &f) {
  if (const auto *w = std::get_if<GaussianWindowFeature>(&f)) {
    return w->widths.array().square();
  }
  return Eigen::VectorXd::Zero(feature_dim(f));
}

// SE kernel convolved with Gaussian windows whose squared widths sum to `extra`.
double smoothed_se(const Kernel &k, const Eigen::VectorXd &a, const Eigen::VectorXd &b,
                   const Eigen::VectorXd &extra) {
  double log_scale = 0.0;
  double r2 = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const double ell2 = k.lengthscales()[i] * k.lengthscales()[i];
    const double total = ell2 + extra[i];
    const double diff = a[i] - b[i];
    log_scale += 0.5 * std::log(ell2 / total);
    r2 += diff * diff / total;
  }
  return k.variance() * std::exp(log_scale - 0.5 * r2);
}

} // namespace

InducingFeature point_feature(Eigen::VectorXd location) {
  return PointFeature{std::move(location)};
}

InducingFeature gaussian_window(Eigen::VectorXd center, Eigen::VectorXd widths) {
  if (center.size() != widths.size()) {
    throw DimensionError("gaussian_window: center has " + std::to_string(center.size()) +
                         " coordinates, widths " + std::to_string(widths.size()));
  }
  for (Index a = 0; a < widths.size(); ++a) {
    if (!(widths[a] > 0.0) || !std::isfinite(widths[a])) {
      throw InvalidArgument("gaussian_window: widths must be strictly positive");
    }
  }
  return GaussianWindowFeature{std::move(center), std::move(widths)};
}

Index feature_dim(const InducingFeature &f) { return feature_location(f).size(); }

const Eigen::VectorXd &feature_location(const InducingFeature &f) {
  if (const auto *p = std::get_if<PointFeature>(&f)) return p->location;
  return std::get<GaussianWindowFeature>(f).center;
}

bool is_point(const InducingFeature &f) { return std::holds_alternative<PointFeature>(f); }

double feature_point_cov(const InducingFeature &f, const Kernel &k,
                         const Eigen::Ref<const Eigen::VectorXd> &x) {
  require_dim(feature_dim(f), k.input_dim(), "feature_point_cov");
  if (x.size() != k.input_dim()) {
    throw DimensionError("feature_point_cov: point of length " + std::to_string(x.size()));
  }
  if (const auto *p = std::get_if<PointFeature>(&f)) return k(p->location, x);
  const auto &w = std::get<GaussianWindowFeature>(f);
  return smoothed_se(k, w.center, x, squared_widths(f));
}

double feature_feature_cov(const InducingFeature &f1, const InducingFeature &f2,
                           const Kernel &k) {
  require_dim(feature_dim(f1), k.input_dim(), "feature_feature_cov");
  require_dim(feature_dim(f2), k.input_dim(), "feature_feature_cov");
  if (is_point(f1) && is_point(f2)) {
    return k(feature_location(f1), feature_location(f2));
  }
  // w1^2 + w2^2 is commutative, so the result is symmetric in (f1, f2).
  const Eigen::VectorXd extra = squared_widths(f1) + squared_widths(f2);
  return smoothed_se(k, feature_location(f1), feature_location(f2), extra);
}

double feature_prior_mean(const InducingFeature &, const Kernel &k) { return k.mean_const(); }

namespace {

bool all_points(const std::vector<InducingFeature> &features) {
  for (const auto &f : features) {
    if (!is_point(f)) return false;
  }
  return true;
}

Eigen::MatrixXd locations(const std::vector<InducingFeature> &features, Index d) {
  Eigen::MatrixXd Z(static_cast<Index>(features.size()), d);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto &loc = feature_location(features[i]);
    require_dim(loc.size(), d, "assemble");
    Z.row(static_cast<Index>(i)) = loc.transpose();
  }
  return Z;
}

} // namespace

Eigen::MatrixXd assemble_Kuu(const std::vector<InducingFeature> &features, const Kernel &k) {
  if (features.empty()) throw InvalidArgument("assemble_Kuu: no features");
  if (all_points(features)) {
    const Eigen::MatrixXd Z = locations(features, k.input_dim());
    return kernel_matrix(k, Z, Z);
  }
  const Index m = static_cast<Index>(features.size());
  Eigen::MatrixXd K(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j <= i; ++j) {
      const double v = feature_feature_cov(features[static_cast<std::size_t>(i)],
                                           features[static_cast<std::size_t>(j)], k);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

Eigen::MatrixXd assemble_Kuf(const std::vector<InducingFeature> &features, const Kernel &k,
                             const Eigen::MatrixXd &X) {
  if (features.empty()) throw InvalidArgument("assemble_Kuf: no features");
  if (X.cols() != k.input_dim()) {
    throw DimensionError("assemble_Kuf: inputs have " + std::to_string(X.cols()) +
                         " columns, kernel dimension " + std::to_string(k.input_dim()));
  }
  if (all_points(features)) {
    return kernel_matrix(k, locations(features, k.input_dim()), X);
  }
  const Index m = static_cast<Index>(features.size());
  Eigen::MatrixXd K(m, X.rows());
  for (Index i = 0; i < m; ++i) {
    const auto &f = features[static_cast<std::size_t>(i)];
    if (is_point(f)) {
      Eigen::MatrixXd z = feature_location(f).transpose();
      K.row(i) = kernel_matrix(k, z, X).row(0);
    } else {
      for (Index j = 0; j < X.rows(); ++j) {
        K(i, j) = feature_point_cov(f, k, X.row(j).transpose());
      }
    }
  }
  return K;
}

Eigen::VectorXd feature_means(const std::vector<InducingFeature> &features, const Kernel &k) {
  Eigen::VectorXd mu(static_cast<Index>(features.size()));
  for (std::size_t i = 0; i < features.size(); ++i) {
    mu[static_cast<Index>(i)] = feature_prior_mean(features[i], k);
  }
  return mu;
}

std::vector<InducingFeature> point_features(const Eigen::MatrixXd &Z) {
  std::vector<InducingFeature> out;
  out.reserve(static_cast<std::size_t>(Z.rows()));
  for (Index i = 0; i < Z.rows(); ++i) out.push_back(point_feature(Z.row(i).transpose()));
  return out;
}

} // namespace sparsekl
