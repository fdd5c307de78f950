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

inline constexpr double kBaseJitterRel = 1e-10;
inline constexpr double kMaxJitterRel = 1e-2;
inline constexpr double kJitterGrowth = 10.0;

struct JitteredCholesky {
  Eigen::MatrixXd lower;
  double jitter = 0.0; // absolute amount added to the diagonal
};

/// base_jitter_rel() * mean(diag A).
double default_base_jitter(const Eigen::MatrixXd &A);

/// Relative first-attempt jitter used by the default schedule on this thread
/// (kBaseJitterRel unless a BaseJitterScope is active).
double base_jitter_rel() noexcept;

/// Lowers (or raises) the relative first-attempt jitter for the current thread
/// until destruction. The escalation factor and cap are unchanged. Used by the
/// exact finite-model computations, where a 1e-10 diagonal shift is visible at
/// the tolerances being checked.
class BaseJitterScope {
public:
  explicit BaseJitterScope(double rel);
  ~BaseJitterScope();
  BaseJitterScope(const BaseJitterScope &) = delete;
  BaseJitterScope &operator=(const BaseJitterScope &) = delete;

private:
  double previous_;
};

/// Lower Cholesky factor of A + jitter * I.
///
/// The first attempt uses `base_jitter`; on failure the jitter grows by
/// kJitterGrowth until it would exceed kMaxJitterRel * mean(diag A). Throws
/// NotPositiveDefinite carrying the last attempted jitter when every attempt
/// fails, InvalidArgument if A is not symmetric to 1e-10 relative.
JitteredCholesky cholesky_jittered(const Eigen::MatrixXd &A, double base_jitter);
JitteredCholesky cholesky_jittered(const Eigen::MatrixXd &A);

/// Solves L X = B for lower-triangular L.
Eigen::MatrixXd solve_lower(const Eigen::MatrixXd &L, const Eigen::MatrixXd &B);

/// Solves L^T X = B for lower-triangular L.
Eigen::MatrixXd solve_lower_transpose(const Eigen::MatrixXd &L,
                                      const Eigen::MatrixXd &B);

/// (L L^T)^{-1} B via two triangular solves.
Eigen::MatrixXd cholesky_solve(const Eigen::MatrixXd &L, const Eigen::MatrixXd &B);

/// log det(L L^T).
double log_det_from_cholesky(const Eigen::MatrixXd &L);

/// 0.5 * (A + A^T).
Eigen::MatrixXd symmetrize(const Eigen::MatrixXd &A);

/// Largest |A - A^T| relative to max |A| (0 for the zero matrix).
double relative_asymmetry(const Eigen::MatrixXd &A);

} // namespace sparsekl
