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

#include "sparsekl/linalg.hpp"

#include "sparsekl/errors.hpp"

#include <cmath>
#include <sstream>

namespace sparsekl {

namespace {

bool try_factor(const Eigen::MatrixXd &A, double jitter, Eigen::MatrixXd &lower) {
  Eigen::MatrixXd shifted = A;
  shifted.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  for (Index i = 0; i < lower.rows(); ++i) {
    if (!(lower(i, i) > 0.0) || !std::isfinite(lower(i, i))) return false;
  }
  return true;
}

thread_local double t_base_jitter_rel = kBaseJitterRel;

} // namespace

double base_jitter_rel() noexcept { return t_base_jitter_rel; }

BaseJitterScope::BaseJitterScope(double rel) : previous_(t_base_jitter_rel) {
  if (!(rel > 0.0) || rel > kMaxJitterRel) {
    throw InvalidArgument("BaseJitterScope: relative jitter must be in (0, " +
                          std::to_string(kMaxJitterRel) + "]");
  }
  t_base_jitter_rel = rel;
}

BaseJitterScope::~BaseJitterScope() { t_base_jitter_rel = previous_; }

double default_base_jitter(const Eigen::MatrixXd &A) {
  if (A.rows() == 0) return 0.0;
  return t_base_jitter_rel * A.diagonal().mean();
}

double relative_asymmetry(const Eigen::MatrixXd &A) {
  const double scale = A.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (A - A.transpose()).cwiseAbs().maxCoeff() / scale;
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd &A) {
  return 0.5 * (A + A.transpose());
}

JitteredCholesky cholesky_jittered(const Eigen::MatrixXd &A, double base_jitter) {
  if (A.rows() != A.cols()) {
    throw DimensionError("cholesky_jittered: matrix is " + std::to_string(A.rows()) +
                         "x" + std::to_string(A.cols()) + ", expected square");
  }
  const Index n = A.rows();
  if (n == 0) return {Eigen::MatrixXd(0, 0), 0.0};
  if (!A.allFinite()) {
    throw NotPositiveDefinite("cholesky_jittered: matrix has non-finite entries",
                              base_jitter);
  }
  if (relative_asymmetry(A) > 1e-10) {
    throw InvalidArgument("cholesky_jittered: matrix is not symmetric");
  }
  if (!(base_jitter > 0.0)) {
    throw InvalidArgument("cholesky_jittered: base jitter must be positive");
  }
  const double mean_diag = A.diagonal().mean();
  if (!(mean_diag > 0.0)) {
    throw NotPositiveDefinite("not positive definite: non-positive mean diagonal",
                              base_jitter);
  }
  const double cap = kMaxJitterRel * mean_diag;

  JitteredCholesky out;
  double jitter = base_jitter;
  for (;;) {
    if (try_factor(A, jitter, out.lower)) {
      out.jitter = jitter;
      return out;
    }
    const double next = jitter * kJitterGrowth;
    if (next > cap * (1.0 + 1e-12)) break;
    jitter = next;
  }
  std::ostringstream os;
  os << "not positive definite: Cholesky failed with jitter " << jitter
     << " (cap " << cap << ")";
  throw NotPositiveDefinite(os.str(), jitter);
}

JitteredCholesky cholesky_jittered(const Eigen::MatrixXd &A) {
  if (A.rows() != A.cols()) {
    throw DimensionError("cholesky_jittered: matrix is not square");
  }
  if (A.rows() == 0) return {Eigen::MatrixXd(0, 0), 0.0};
  const double base = default_base_jitter(A);
  if (!(base > 0.0)) {
    throw NotPositiveDefinite("not positive definite: non-positive mean diagonal",
                              base);
  }
  return cholesky_jittered(A, base);
}

Eigen::MatrixXd solve_lower(const Eigen::MatrixXd &L, const Eigen::MatrixXd &B) {
  return L.triangularView<Eigen::Lower>().solve(B);
}

Eigen::MatrixXd solve_lower_transpose(const Eigen::MatrixXd &L,
                                      const Eigen::MatrixXd &B) {
  return L.transpose().triangularView<Eigen::Upper>().solve(B);
}

Eigen::MatrixXd cholesky_solve(const Eigen::MatrixXd &L, const Eigen::MatrixXd &B) {
  return solve_lower_transpose(L, solve_lower(L, B));
}

double log_det_from_cholesky(const Eigen::MatrixXd &L) {
  return 2.0 * L.diagonal().array().log().sum();
}

} // namespace sparsekl
