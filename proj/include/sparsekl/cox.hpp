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

#include "sparsekl/quadrature.hpp"
#include "sparsekl/svgp.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string_view>

namespace sparsekl {

/// Inverse link rho mapping the latent function to a positive intensity.
enum class CoxLink { Exp, Square };

std::string_view cox_link_name(CoxLink link);
/// Parses "exp" or "square"; throws InvalidArgument otherwise.
CoxLink parse_cox_link(std::string_view name);

/// Axis-aligned box [lower, upper] in 1 or 2 dimensions.
struct Domain {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Index dim() const noexcept { return lower.size(); }
  double volume() const;
  bool contains(const Eigen::Ref<const Eigen::VectorXd> &x) const;
  /// Throws InvalidArgument unless d is 1 or 2 and lower < upper componentwise.
  void validate() const;
};

/// Gauss-Legendre order per dimension: 50 in 1D, 20 in 2D.
int default_cox_quadrature_order(Index dim);

inline constexpr int kSquareLinkHermiteOrder = 64;
inline constexpr double kLogSquareClamp = -30.0;

struct CoxModel {
  Domain domain;
  CoxLink link = CoxLink::Exp;
  Eigen::MatrixXd events; // one event per row
  int quad_order = 50;    // per dimension

  /// Throws InvalidArgument for a bad domain or quad_order < 2, DataError
  /// for events outside the domain or of the wrong dimension.
  void validate() const;
};

/// Tensor-product Gauss-Legendre nodes (one per row) and weights on a box.
struct QuadratureGrid {
  Eigen::MatrixXd nodes;
  Eigen::VectorXd weights;
};

QuadratureGrid tensor_gauss_legendre(const Domain &domain, int order);

/// E[log rho(f)] for f ~ N(mean, var).
double expected_log_intensity(CoxLink link, double mean, double var);

/// E[rho(f)] for f ~ N(mean, var).
double expected_intensity(CoxLink link, double mean, double var);

struct CoxElboTerms {
  double kl = 0.0;             // KL(q(u) || p(u))
  double event_term = 0.0;     // sum over events of E[log rho(f_y)]
  double integral_term = 0.0;  // sum over grid of w_g E[rho(f_g)]
  double elbo = 0.0;           // -kl + event_term - integral_term
};

/// Terms summed in a fixed order (events in input order, grid in node order).
CoxElboTerms cox_elbo_terms(const SVGPState &s, const CoxModel &m);
double cox_elbo(const SVGPState &s, const CoxModel &m);

/// Same with a precomputed tensor_gauss_legendre(m.domain, m.quad_order) grid,
/// for repeated evaluation inside an optimizer.
CoxElboTerms cox_elbo_terms(const SVGPState &s, const CoxModel &m, const QuadratureGrid &grid);

/// Posterior mean intensity E_q[rho(f(x))] at each row of Xstar. Throws
/// DataError for points outside the domain.
Eigen::VectorXd fitted_intensity(const SVGPState &s, const CoxModel &m, const Eigen::MatrixXd &Xstar);

/// Lewis-Shedler thinning of a homogeneous process with rate `upper_bound`.
///
/// The bound is spot-checked on the default tensor Gauss-Legendre grid of the
/// domain; a violation throws InvalidArgument naming the grid point. Same seed,
/// same events.
Eigen::MatrixXd sample_inhomogeneous_pp(const std::function<double(const Eigen::VectorXd &)> &intensity,
                                        double upper_bound, const Domain &domain,
                                        std::uint64_t seed);

} // namespace sparsekl
