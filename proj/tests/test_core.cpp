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

#include "doctest.h"
#include "test_util.hpp"

#include "sparsekl/errors.hpp"
#include "sparsekl/gaussian.hpp"
#include "sparsekl/kernel.hpp"
#include "sparsekl/linalg.hpp"

#include <cmath>
#include <numbers>

using namespace sparsekl;
using namespace sparsekl::testing;

TEST_CASE("kernel_matrix: diagonal equals the signal variance") {
  const Kernel k(1.0, Eigen::VectorXd::Ones(1));
  Eigen::MatrixXd x(1, 1);
  x << 0.0;
  CHECK(kernel_matrix(k, x, x)(0, 0) == 1.0);
}

TEST_CASE("kernel_matrix: unit-distance value") {
  const Kernel k(2.0, Eigen::VectorXd::Ones(1));
  Eigen::MatrixXd x1(1, 1), x2(1, 1);
  x1 << 0.0;
  x2 << 1.0;
  CHECK(kernel_matrix(k, x1, x2)(0, 0) == doctest::Approx(2.0 * std::exp(-0.5)).epsilon(1e-15));
  CHECK(kernel_matrix(k, x1, x2)(0, 0) == doctest::Approx(1.21306).epsilon(1e-5));
}

TEST_CASE("kernel_matrix: ARD formula matches direct evaluation") {
  Rng rng(11);
  Eigen::VectorXd ell(3);
  ell << 0.5, 1.3, 2.0;
  const Kernel k(1.7, ell);
  const Eigen::MatrixXd X1 = random_matrix(rng, 6, 3, -2, 2);
  const Eigen::MatrixXd X2 = random_matrix(rng, 4, 3, -2, 2);
  const Eigen::MatrixXd K = kernel_matrix(k, X1, X2);
  for (Index i = 0; i < 6; ++i) {
    for (Index j = 0; j < 4; ++j) {
      double r2 = 0.0;
      for (Index a = 0; a < 3; ++a) r2 += std::pow((X1(i, a) - X2(j, a)) / ell[a], 2);
      CHECK(K(i, j) == doctest::Approx(1.7 * std::exp(-0.5 * r2)).epsilon(1e-14));
    }
  }
}

TEST_CASE("kernel_matrix: random inputs give a symmetric PSD matrix") {
  Rng rng(3);
  const Kernel k(1.3, Eigen::VectorXd::Constant(2, 0.8));
  const Eigen::MatrixXd X = random_matrix(rng, 5, 2, -2, 2);
  const Eigen::MatrixXd K = kernel_matrix(k, X, X);
  CHECK(relative_asymmetry(K) <= 1e-12);
  CHECK(min_eigenvalue(K) >= -1e-10 * K.trace());
}

TEST_CASE("kernel_matrix: exchangeable exactly") {
  Rng rng(5);
  Eigen::VectorXd ell(2);
  ell << 0.7, 1.9;
  const Kernel k(0.9, ell);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::MatrixXd X1 = random_matrix(rng, 7, 2, -3, 3);
    const Eigen::MatrixXd X2 = random_matrix(rng, 5, 2, -3, 3);
    const Eigen::MatrixXd K12 = kernel_matrix(k, X1, X2);
    const Eigen::MatrixXd K21 = kernel_matrix(k, X2, X1);
    CHECK((K12 - K21.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("kernel_matrix: dimension mismatch names both shapes") {
  const Kernel k(1.0, Eigen::VectorXd::Ones(2));
  const Eigen::MatrixXd X1 = Eigen::MatrixXd::Zero(3, 2);
  const Eigen::MatrixXd X2 = Eigen::MatrixXd::Zero(4, 1);
  try {
    kernel_matrix(k, X1, X2);
    FAIL("expected DimensionError");
  } catch (const DimensionError &e) {
    const std::string msg = e.what();
    CHECK(msg.find("3x2") != std::string::npos);
    CHECK(msg.find("4x1") != std::string::npos);
  }
}

TEST_CASE("Kernel rejects invalid hyperparameters") {
  CHECK_THROWS_AS(Kernel(0.0, Eigen::VectorXd::Ones(1)), InvalidArgument);
  CHECK_THROWS_AS(Kernel(1.0, Eigen::VectorXd::Zero(1)), InvalidArgument);
  CHECK_THROWS_AS(Kernel(1.0, Eigen::VectorXd(0)), InvalidArgument);
}

TEST_CASE("cholesky_jittered: identity uses the base jitter") {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
  const auto f = cholesky_jittered(I);
  CHECK(f.jitter == doctest::Approx(1e-10).epsilon(1e-12));
  CHECK((f.lower - I).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("cholesky_jittered: hand factorization") {
  Eigen::MatrixXd A(2, 2);
  A << 4, 2, 2, 2;
  const auto f = cholesky_jittered(A);
  Eigen::MatrixXd expected(2, 2);
  expected << 2, 0, 1, 1;
  CHECK((f.lower - expected).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(f.lower(0, 1) == 0.0);
}

TEST_CASE("cholesky_jittered: rank-1 matrix escalates jitter and reconstructs") {
  Eigen::Vector2d v(1.0, 1.0);
  const Eigen::MatrixXd A = v * v.transpose();
  const auto f = cholesky_jittered(A);
  CHECK(f.jitter >= 1e-10);
  CHECK(f.jitter <= 1e-2 * A.diagonal().mean());
  Eigen::MatrixXd target = A;
  target.diagonal().array() += f.jitter;
  CHECK((f.lower * f.lower.transpose() - target).cwiseAbs().maxCoeff() <=
        1e-10 * target.cwiseAbs().maxCoeff());
}

TEST_CASE("cholesky_jittered: indefinite matrix reports the attempted jitter") {
  Eigen::MatrixXd A(2, 2);
  A << 1, 0, 0, -1;
  // mean diagonal is zero
  CHECK_THROWS_AS(cholesky_jittered(A, 1e-10), NotPositiveDefinite);
  Eigen::MatrixXd B(2, 2);
  B << 2, 0, 0, -1;
  try {
    cholesky_jittered(B);
    FAIL("expected NotPositiveDefinite");
  } catch (const NotPositiveDefinite &e) {
    CHECK(e.attempted_jitter() == doctest::Approx(0.5e-2).epsilon(1e-6));
    CHECK(std::string(e.what()).find("not positive definite") != std::string::npos);
  }
}

TEST_CASE("cholesky_jittered: asymmetric input is rejected") {
  Eigen::MatrixXd A(2, 2);
  A << 1, 0.5, 0.4, 1;
  CHECK_THROWS_AS(cholesky_jittered(A), InvalidArgument);
}

TEST_CASE("cholesky_jittered: well-conditioned inputs never need more than 1e-6 relative jitter") {
  Rng rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::MatrixXd A = random_spd(rng, 8, 1e-7, 1.0);
    const auto f = cholesky_jittered(A);
    CHECK(f.jitter <= 1e-6 * A.diagonal().mean());
  }
}

TEST_CASE("mvn_kl: identical measures give zero") {
  Rng rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const GaussianDist p = random_gaussian(rng, 4);
    CHECK(std::abs(mvn_kl(p, p)) <= 1e-12);
  }
}

TEST_CASE("mvn_kl: 1D mean shift") {
  const GaussianDist q(Eigen::VectorXd::Constant(1, 1.0), Eigen::MatrixXd::Identity(1, 1));
  const GaussianDist p(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
  CHECK(mvn_kl(q, p) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("mvn_kl: Monte-Carlo oracle on a random 3D pair") {
  Rng rng(7);
  const GaussianDist q = random_gaussian(rng, 3);
  const GaussianDist p = random_gaussian(rng, 3);
  MeanEstimate est;
  for (int s = 0; s < 1000000; ++s) {
    const Eigen::VectorXd x = sample(q, rng);
    est.add(mvn_logpdf(q, x) - mvn_logpdf(p, x));
  }
  const double kl = mvn_kl(q, p);
  CHECK(std::abs(kl - est.mean()) <= 3.0 * est.std_error());
}

TEST_CASE("mvn_kl: nonnegative and zero only at equal parameters") {
  Rng rng(23);
  for (int rep = 0; rep < 200; ++rep) {
    const Index n = 1 + rep % 6;
    const GaussianDist q = random_gaussian(rng, n);
    const GaussianDist p = random_gaussian(rng, n);
    const double kl = mvn_kl(q, p);
    CHECK(kl >= 0.0);
    CHECK(kl > 1e-9);
  }
}

TEST_CASE("mvn_kl: dimension mismatch") {
  Rng rng(1);
  CHECK_THROWS_AS(mvn_kl(random_gaussian(rng, 2), random_gaussian(rng, 3)), DimensionError);
}

TEST_CASE("mvn_logpdf: textbook values") {
  const GaussianDist p1(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
  CHECK(mvn_logpdf(p1, Eigen::VectorXd::Zero(1)) ==
        doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)).epsilon(1e-9));
  CHECK(mvn_logpdf(p1, Eigen::VectorXd::Zero(1)) == doctest::Approx(-0.918939).epsilon(1e-6));
  const GaussianDist p2(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  CHECK(mvn_logpdf(p2, Eigen::VectorXd::Ones(2)) ==
        doctest::Approx(-std::log(2 * std::numbers::pi) - 1.0).epsilon(1e-9));
  CHECK_THROWS_AS(mvn_logpdf(p2, Eigen::VectorXd::Ones(3)), DimensionError);
}

TEST_CASE("mvn_logpdf: density integrates to one on a 4D grid") {
  Rng rng(29);
  const GaussianDist p = random_gaussian(rng, 4);
  const int pts = 28;
  Eigen::VectorXd sd = p.cov().diagonal().cwiseSqrt();
  Eigen::VectorXd step = 12.0 * sd / (pts - 1);
  double total = 0.0;
  Eigen::VectorXd x(4);
  for (int i = 0; i < pts; ++i)
    for (int j = 0; j < pts; ++j)
      for (int k = 0; k < pts; ++k)
        for (int l = 0; l < pts; ++l) {
          const int c[4] = {i, j, k, l};
          for (int a = 0; a < 4; ++a) x[a] = p.mean()[a] - 6.0 * sd[a] + c[a] * step[a];
          total += std::exp(mvn_logpdf(p, x));
        }
  total *= step.prod();
  CHECK(std::abs(total - 1.0) <= 1e-3);
}

TEST_CASE("mvn_marginal: subsetting") {
  Eigen::Vector2d mu(1, 2);
  Eigen::Matrix2d S;
  S << 2, 1, 1, 3;
  const GaussianDist p(mu, S);
  const IndexList all{0, 1};
  const GaussianDist same = mvn_marginal(p, all);
  CHECK((same.mean() - p.mean()).norm() == 0.0);
  CHECK((same.cov() - p.cov()).norm() == 0.0);
  const IndexList first{0};
  const GaussianDist m = mvn_marginal(p, first);
  CHECK(m.mean()[0] == 1.0);
  CHECK(m.cov()(0, 0) == 2.0);
  const IndexList bad{2};
  CHECK_THROWS_AS(mvn_marginal(p, bad), IndexError);
}

TEST_CASE("mvn_marginal: marginal of marginal equals marginal of the composed indices") {
  Rng rng(31);
  const GaussianDist p = random_gaussian(rng, 6);
  const IndexList outer{5, 1, 3, 0};
  const IndexList inner{2, 0};
  const IndexList composed{3, 5};
  const GaussianDist a = mvn_marginal(mvn_marginal(p, outer), inner);
  const GaussianDist b = mvn_marginal(p, composed);
  CHECK((a.mean() - b.mean()).norm() == 0.0);
  CHECK((a.cov() - b.cov()).norm() == 0.0);
}

TEST_CASE("mvn_condition: independent blocks leave the marginal unchanged") {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(3, 3);
  S << 2, 0.5, 0, 0.5, 1, 0, 0, 0, 4;
  const GaussianDist p(Eigen::Vector3d(1, -1, 3), S);
  const IndexList obs{2};
  const GaussianDist c = mvn_condition(p, obs, Eigen::VectorXd::Constant(1, 10.0));
  const IndexList keep{0, 1};
  const GaussianDist m = mvn_marginal(p, keep);
  CHECK((c.mean() - m.mean()).norm() < 1e-12);
  CHECK((c.cov() - m.cov()).norm() < 1e-12);
}

TEST_CASE("mvn_condition: bivariate textbook conditional") {
  Eigen::Matrix2d S;
  S << 1, 0.5, 0.5, 1;
  const GaussianDist p(Eigen::Vector2d::Zero(), S);
  const IndexList obs{1};
  const GaussianDist c = mvn_condition(p, obs, Eigen::VectorXd::Constant(1, 1.0));
  CHECK(c.mean()[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(c.cov()(0, 0) == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("mvn_condition: errors") {
  Rng rng(4);
  const GaussianDist p = random_gaussian(rng, 3);
  const IndexList all{0, 1, 2};
  CHECK_THROWS_AS(mvn_condition(p, all, Eigen::VectorXd::Zero(3)), IndexError);
  const IndexList out{3};
  CHECK_THROWS_AS(mvn_condition(p, out, Eigen::VectorXd::Zero(1)), IndexError);
  const IndexList dup{1, 1};
  CHECK_THROWS_AS(mvn_condition(p, dup, Eigen::VectorXd::Zero(2)), IndexError);
}

TEST_CASE("mvn_condition: law of total covariance reassembles the joint") {
  Rng rng(37);
  const GaussianDist p = random_gaussian(rng, 5);
  const IndexList obs{1, 4};
  const IndexList rest{0, 2, 3};
  const GaussianDist marg_obs = mvn_marginal(p, obs);
  const GaussianDist marg_rest = mvn_marginal(p, rest);
  // Conditional mean is affine in the observation; recover its gain by probing.
  const Eigen::VectorXd base = mvn_condition(p, obs, Eigen::VectorXd::Zero(2)).mean();
  Eigen::MatrixXd gain(3, 2);
  for (Index k = 0; k < 2; ++k) {
    gain.col(k) = mvn_condition(p, obs, Eigen::VectorXd::Unit(2, k)).mean() - base;
  }
  const Eigen::MatrixXd cond_cov = mvn_condition(p, obs, Eigen::VectorXd::Zero(2)).cov();
  const Eigen::VectorXd mean_of_means = base + gain * marg_obs.mean();
  const Eigen::MatrixXd total = cond_cov + gain * marg_obs.cov() * gain.transpose();
  CHECK((mean_of_means - marg_rest.mean()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((total - marg_rest.cov()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("conditioning then marginalizing commutes with direct marginalization") {
  Rng rng(41);
  for (int rep = 0; rep < 20; ++rep) {
    const GaussianDist p = random_gaussian(rng, 6);
    const IndexList obs{0, 3};
    const Eigen::VectorXd val = random_vector(rng, 2);
    // condition on {0,3}, keep coordinate 2 (position 1 among {1,2,4,5})
    const GaussianDist c = mvn_condition(p, obs, val);
    const IndexList pick{1};
    const GaussianDist route_a = mvn_marginal(c, pick);
    // marginalize to {0,2,3} first, then condition on positions {0,2}
    const IndexList sub{0, 2, 3};
    const IndexList sub_obs{0, 2};
    const GaussianDist route_b = mvn_condition(mvn_marginal(p, sub), sub_obs, val);
    CHECK(std::abs(route_a.mean()[0] - route_b.mean()[0]) < 1e-9);
    CHECK(std::abs(route_a.cov()(0, 0) - route_b.cov()(0, 0)) < 1e-9);
  }
}

TEST_CASE("GaussianDist: invariants") {
  Rng rng(43);
  const Eigen::MatrixXd S = random_spd(rng, 5);
  const GaussianDist p(random_vector(rng, 5), S);
  CHECK(relative_asymmetry(p.cov()) <= 1e-12);
  Eigen::MatrixXd target = S;
  target.diagonal().array() += p.jitter();
  CHECK((p.chol() * p.chol().transpose() - target).cwiseAbs().maxCoeff() <=
        1e-10 * target.cwiseAbs().maxCoeff());
  CHECK_THROWS_AS(GaussianDist(Eigen::VectorXd::Zero(2), S), DimensionError);
}

TEST_CASE("expected_conditional_kl: chain rule against direct KL") {
  Rng rng(47);
  for (int rep = 0; rep < 20; ++rep) {
    const GaussianDist q = random_gaussian(rng, 5);
    const GaussianDist p = random_gaussian(rng, 5);
    const IndexList u{0, 2, 4};
    const IndexList v{1, 3};
    const double cond = expected_conditional_kl(conditional_of(q, u, v), conditional_of(p, u, v),
                                                mvn_marginal(q, v));
    const double marg = mvn_kl(mvn_marginal(q, v), mvn_marginal(p, v));
    CHECK(std::abs(cond + marg - mvn_kl(q, p)) <= 1e-9);
  }
}
