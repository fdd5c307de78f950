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
#include "sparsekl/svgp.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace sparsekl {

/// How a block's raw (unconstrained) values map to model values.
enum class Transform {
  Identity,
  Log,              // value = exp(raw)
  SoftplusDiagonal, // packed lower triangle; diagonal = softplus(raw), rest identity
};

std::string_view transform_name(Transform t);

struct ParamBlock {
  std::string name;
  Index offset = 0;
  Index size = 0;
  Transform transform = Transform::Identity;
  Index matrix_dim = 0; // SoftplusDiagonal only: M for an M x M lower triangle
};

class ParamLayout {
public:
  /// Appends a block; names must be unique.
  const ParamBlock &add(std::string name, Index size, Transform transform);
  /// Lower-triangular M x M block packed column by column, diagonal through softplus.
  const ParamBlock &add_lower_triangular(std::string name, Index m);

  const ParamBlock &block(std::string_view name) const;
  bool has(std::string_view name) const;
  const std::vector<ParamBlock> &blocks() const noexcept { return blocks_; }
  Index size() const noexcept { return size_; }

  /// "name[j]" for flat coordinate i.
  std::string coordinate_name(Index i) const;

private:
  std::vector<ParamBlock> blocks_;
  Index size_ = 0;
};

/// Flat vector of raw parameters plus the layout naming its slices.
struct ParamVector {
  ParamLayout layout;
  Eigen::VectorXd values;

  Eigen::VectorXd raw(std::string_view name) const;
  void set_raw(std::string_view name, const Eigen::Ref<const Eigen::VectorXd> &v);

  /// Block mapped through its transform.
  Eigen::VectorXd constrained(std::string_view name) const;
  /// Sets a block from model values through the inverse transform.
  void set_constrained(std::string_view name, const Eigen::Ref<const Eigen::VectorXd> &v);

  /// Raw blocks in layout order.
  std::vector<Eigen::VectorXd> unpack() const;
  /// Concatenates raw blocks; inverse of unpack, bit for bit.
  static ParamVector pack(const ParamLayout &layout, const std::vector<Eigen::VectorXd> &blocks);
};

double softplus(double x);
double softplus_inverse(double y);

/// Applies a transform to raw values. Log and softplus outputs are floored at
/// the smallest positive normal double so they never reach zero.
Eigen::VectorXd to_constrained(const ParamBlock &block, const Eigen::Ref<const Eigen::VectorXd> &raw);
Eigen::VectorXd to_unconstrained(const ParamBlock &block, const Eigen::Ref<const Eigen::VectorXd> &value);

/// Packed lower triangle (column by column) to a dense M x M matrix and back.
Eigen::MatrixXd unpack_lower(const Eigen::Ref<const Eigen::VectorXd> &packed, Index m);
Eigen::VectorXd pack_lower(const Eigen::MatrixXd &L);

using Objective = std::function<double(const ParamVector &)>;

inline constexpr double kDefaultGradStep = 1e-5;

/// Central differences with step h * (1 + |x_i|). Throws NonFiniteError naming
/// the coordinate if any probe is not finite.
Eigen::VectorXd numeric_grad(const Objective &objective, const ParamVector &x,
                             double h = kDefaultGradStep);

struct TraceRow {
  int iter = 0;
  double objective = 0.0;
  double step_scale = 0.0; // backtracking factor of the accepted step
  double grad_norm = 0.0;
};

struct MaximizeConfig {
  int max_iters = 2000;
  double step = 0.05;   // initial per-parameter step
  double tol = 1e-8;    // relative change in objective that ends the run
  double grad_step = kDefaultGradStep;
  int max_halvings = 40;
  /// Called with the starting point and after every accepted step.
  std::function<void(const ParamVector &, const TraceRow &)> on_accept;
};

struct MaximizeResult {
  ParamVector x;
  double objective = 0.0;
  std::vector<TraceRow> trace; // row 0 is the starting point
  int iterations = 0;
  bool converged = false;
};

/// Sign-based ascent with per-parameter adaptive steps (grow by 1.2 while the
/// gradient sign is stable, halve on a flip) and backtracking: the proposed
/// move is halved until the objective does not decrease, so the trace is
/// non-decreasing. Stops after max_iters, when an accepted step changes the
/// objective by less than tol * (1 + |objective|), or when no non-decreasing
/// step is found. Throws NonFiniteError if the objective is not finite at x0.
MaximizeResult maximize(const Objective &objective, const ParamVector &x0,
                        const MaximizeConfig &config = {});

/// Which parts of an SVGP state are optimized.
struct FreeParameters {
  bool variational = true; // q_mean, q_chol
  bool kernel = false;     // log_variance, log_lengthscales
  bool noise = false;      // log_noise (Gaussian likelihood only)
  bool features = false;   // feature_centers, log_widths (windows only)
};

/// Raw parameter vector for the free parts of `s`.
ParamVector encode_state(const SVGPState &s, const FreeParameters &free);

/// `base` with every block present in `x` replaced.
SVGPState decode_state(const ParamVector &x, const SVGPState &base);

} // namespace sparsekl
