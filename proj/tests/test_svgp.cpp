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

#include "sparsekl/errors.hpp"
#include "sparsekl/finite_oracle.hpp"
#include "sparsekl/linalg.hpp"
#include "sparsekl/svgp.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

using namespace sparsekl;
using sparsekl::testing::Rng;

namespace {

Eigen::MatrixXd rows_of(const Eigen::MatrixXd &X, const IndexList &idx) {
  Eigen::MatrixXd out(static_cast<Index>(idx.size()), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = X.row(idx[i]);
  return out;
}

struct Problem {
  Kernel kernel;
  Eigen::MatrixXd X;
  Eigen::VectorXd Y;
  double noise;
  Eigen::MatrixXd Z;
};

// 1D regression data on separated inputs; inducing inputs a subset of X.
Problem random_problem(std::uint64_t seed, Index n = 10, Index m = 4) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd xs = Eigen::VectorXd::LinSpaced(n, 0.0, 0.7 * static_cast<double>(n));
  for (Index i = 0; i < n; ++i) xs[i] += 0.2 * u(rng);
  Problem p{Kernel::isotropic(0.5 + u(rng), 0.8 + 0.6 * u(rng), 1, -0.5 + u(rng)),
            xs, Eigen::VectorXd(n), 0.05 + 0.3 * u(rng), Eigen::MatrixXd(m, 1)};
  for (Index i = 0; i < n; ++i) p.Y[i] = std::sin(p.X(i, 0)) + 0.3 * (u(rng) - 0.5);
  IndexList perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  for (Index i = 0; i < m; ++i) p.Z(i, 0) = xs[perm[static_cast<std::size_t>(i)]];
  return p;
}

double exact_lml(const Problem &p) {
  Eigen::MatrixXd S = kernel_matrix(p.kernel, p.X, p.X);
  S.diagonal().array() += p.noise;
  return mvn_logpdf(GaussianDist(prior_mean(p.kernel, p.X), S), p.Y);
}

SVGPState state_from(const Problem &p, const VariationalParams &v) {
  return SVGPState{point_features(p.Z), v.q_mean, v.q_chol, p.kernel, GaussianNoise{p.noise}};
}

// (q_mean, lower triangle of q_chol) as one vector and back.
Eigen::VectorXd flatten(const SVGPState &s) {
  const Index m = s.num_inducing();
  Eigen::VectorXd v(m + m * (m + 1) / 2);
  v.head(m) = s.q_mean;
  Index k = m;
  for (Index j = 0; j < m; ++j)
    for (Index i = j; i < m; ++i) v[k++] = s.q_chol(i, j);
  return v;
}

SVGPState unflatten(SVGPState s, const Eigen::VectorXd &v) {
  const Index m = s.num_inducing();
  s.q_mean = v.head(m);
  Index k = m;
  for (Index j = 0; j < m; ++j)
    for (Index i = j; i < m; ++i) s.q_chol(i, j) = v[k++];
  return s;
}

} // namespace

TEST_CASE("predictive marginals under the prior q equal the prior") {
  const Problem p = random_problem(1);
  const SVGPState s = prior_state(point_features(p.Z), p.kernel, GaussianNoise{p.noise});
  const Eigen::MatrixXd Xs = Eigen::VectorXd::LinSpaced(25, -2.0, 9.0);
  const PredictiveMarginals pm = predictive_marginals(s, Xs);
  for (Index i = 0; i < Xs.rows(); ++i) {
    CHECK(std::abs(pm.mean[i] - p.kernel.mean_const()) <= 1e-9);
    CHECK(std::abs(pm.var[i] - p.kernel.variance()) <= 1e-9);
  }
}

TEST_CASE("predictive marginals interpolate a collapsed q at a feature") {
  const Problem p = random_problem(2);
  SVGPState s = prior_state(point_features(p.Z), p.kernel, GaussianNoise{p.noise});
  s.q_mean = Eigen::VectorXd::Constant(s.num_inducing(), 1.7);
  s.q_chol = 1e-9 * Eigen::MatrixXd::Identity(s.num_inducing(), s.num_inducing());
  const PredictiveMarginals pm = predictive_marginals(s, p.Z.topRows(1));
  CHECK(pm.mean[0] == doctest::Approx(1.7).epsilon(1e-8));
  CHECK(pm.var[0] >= 0.0);
  CHECK(pm.var[0] <= 1e-8);
}

TEST_CASE("predictive marginals match the finite extension") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Index d = 1 + static_cast<Index>(seed % 2);
    const Kernel k(1.3, Eigen::VectorXd::Constant(d, 1.1), 0.2);
    // Inducing inputs about one lengthscale apart keep Kzz well conditioned.
    Eigen::MatrixXd Z = sparsekl::testing::random_matrix(rng, 3, d, -0.2, 0.2);
    Z.col(0) += Eigen::Vector3d(-1.5, 0.0, 1.5);
    const Eigen::MatrixXd Xs = sparsekl::testing::random_matrix(rng, 5, d, -3.0, 3.0);
    Eigen::MatrixXd all(8, d);
    all << Z, Xs;
    const FiniteModel m = FiniteModel::from_kernel(k, all, {3}, {0, 1, 2}, Eigen::VectorXd::Zero(1), 1.0);
    const ApproxPosterior q = random_approximation(m, seed);
    const SVGPState s{point_features(Z), q.q_u.mean(), q.q_u.chol(), k, GaussianNoise{1.0}};
    const PredictiveMarginals pm = predictive_marginals(s, Xs);
    const GaussianDist ext = extend_approximation(m, q, IndexList{3, 4, 5, 6, 7});
    CHECK((pm.mean - ext.mean()).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((pm.var - ext.cov().diagonal()).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("expected_log_lik with a degenerate q is the plain log likelihood") {
  const Problem p = random_problem(3);
  SVGPState s = prior_state(point_features(p.X), p.kernel, GaussianNoise{p.noise});
  // Point features at every data input and S -> 0 make every marginal variance vanish.
  s.q_mean = p.Y * 0.5;
  s.q_chol = 1e-12 * Eigen::MatrixXd::Identity(s.num_inducing(), s.num_inducing());
  const PredictiveMarginals pm = predictive_marginals(s, p.X);
  double direct = 0.0;
  for (Index i = 0; i < p.Y.size(); ++i) {
    direct += -0.5 * std::log(2.0 * std::numbers::pi * p.noise) -
              0.5 * (p.Y[i] - pm.mean[i]) * (p.Y[i] - pm.mean[i]) / p.noise;
  }
  CHECK(expected_log_lik(s, p.X, p.Y, GaussianNoise{p.noise}) == doctest::Approx(direct).epsilon(1e-9));
  CHECK_THROWS_AS(expected_log_lik(s, p.X, p.Y, BernoulliProbit{}, 0), InvalidArgument);
  CHECK_THROWS_AS(expected_log_lik(s, p.X, p.Y.head(3), GaussianNoise{p.noise}), DimensionError);
}

TEST_CASE("ELBO never exceeds the exact log marginal likelihood") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const FiniteModel m = random_finite_model(seed, static_cast<InducingLayout>(seed % 3));
    const ApproxPosterior q = random_approximation(m, seed + 11);
    const SVGPState s{point_features(rows_of(m.X, m.Z)), q.q_u.mean(), q.q_u.chol(), m.kernel,
                      GaussianNoise{m.noise_var}};
    CHECK(elbo(s, rows_of(m.X, m.D), m.Y) <= log_marginal_likelihood(m) + 1e-9);
  }
}

TEST_CASE("ELBO with interdomain features never exceeds the exact log marginal likelihood") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Problem p = random_problem(seed, 8, 3);
    Rng rng(seed);
    std::vector<InducingFeature> fs;
    for (Index i = 0; i < 3; ++i) {
      fs.push_back(gaussian_window(p.Z.row(i).transpose(),
                                   sparsekl::testing::random_vector(rng, 1, 0.2, 1.5)));
    }
    const VariationalParams v = collapsed_optimal_q(fs, p.kernel, p.X, p.Y, p.noise);
    const SVGPState s{fs, v.q_mean, v.q_chol, p.kernel, GaussianNoise{p.noise}};
    const double e = elbo(s, p.X, p.Y);
    CHECK(e <= exact_lml(p) + 1e-9);
    CHECK(std::abs(e - collapsed_bound(fs, p.kernel, p.X, p.Y, p.noise)) <= 1e-8 * (1.0 + std::abs(e)));
  }
}

TEST_CASE("inducing at every input with the exact posterior is tight") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Problem p = random_problem(seed, 6, 6);
    p.Z = p.X;
    const VariationalParams v = collapsed_optimal_q(point_features(p.Z), p.kernel, p.X, p.Y, p.noise);
    const double lml = exact_lml(p);
    CHECK(std::abs(elbo(state_from(p, v), p.X, p.Y) - lml) <= 1e-8 * (1.0 + std::abs(lml)));
    CHECK(std::abs(collapsed_bound(point_features(p.Z), p.kernel, p.X, p.Y, p.noise) - lml) <=
          1e-8 * (1.0 + std::abs(lml)));
    // Exact posterior over Z through the finite model.
    const FiniteModel m = FiniteModel::from_kernel(p.kernel, p.X, {0, 1, 2, 3, 4, 5},
                                                   {0, 1, 2, 3, 4, 5}, p.Y, p.noise);
    const ApproxPosterior q = posterior_approximation(m);
    const SVGPState s{point_features(p.X), q.q_u.mean(), q.q_u.chol(), p.kernel, GaussianNoise{p.noise}};
    CHECK(std::abs(elbo(s, p.X, p.Y) - lml) <= 1e-8 * (1.0 + std::abs(lml)));
  }
}

TEST_CASE("collapsed bound equals the ELBO at the collapsed optimum") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Problem p = random_problem(seed);
    const VariationalParams v = collapsed_optimal_q(point_features(p.Z), p.kernel, p.X, p.Y, p.noise);
    const double e = elbo(state_from(p, v), p.X, p.Y);
    const double b = collapsed_bound(point_features(p.Z), p.kernel, p.X, p.Y, p.noise);
    CHECK(std::abs(e - b) <= 1e-8 * (1.0 + std::abs(b)));
    CHECK(b <= exact_lml(p) + 1e-9);
  }
}

TEST_CASE("collapsed optimum dominates random perturbations") {
  const Problem p = random_problem(7);
  const VariationalParams v = collapsed_optimal_q(point_features(p.Z), p.kernel, p.X, p.Y, p.noise);
  const SVGPState best = state_from(p, v);
  const double e0 = elbo(best, p.X, p.Y);
  Rng rng(8);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 200; ++trial) {
    const double scale = trial < 100 ? 1e-3 : 0.3;
    SVGPState s = best;
    for (Index i = 0; i < s.num_inducing(); ++i) {
      s.q_mean[i] += scale * z(rng);
      for (Index j = 0; j <= i; ++j) s.q_chol(i, j) += scale * z(rng);
      s.q_chol(i, i) = std::abs(s.q_chol(i, i)) + 1e-12;
    }
    CHECK(elbo(s, p.X, p.Y) <= e0 + 1e-12);
  }
}

TEST_CASE("ELBO gradient vanishes at the collapsed optimum") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Problem p = random_problem(seed);
    const SVGPState s0 =
        state_from(p, collapsed_optimal_q(point_features(p.Z), p.kernel, p.X, p.Y, p.noise));
    const Eigen::VectorXd x0 = flatten(s0);
    const double e0 = elbo(s0, p.X, p.Y);
    Eigen::VectorXd g(x0.size());
    for (Index i = 0; i < x0.size(); ++i) {
      const double h = 1e-5 * (1.0 + std::abs(x0[i]));
      Eigen::VectorXd xp = x0, xm = x0;
      xp[i] += h;
      xm[i] -= h;
      g[i] = (elbo(unflatten(s0, xp), p.X, p.Y) - elbo(unflatten(s0, xm), p.X, p.Y)) / (2.0 * h);
    }
    CHECK(g.norm() <= 1e-5 * (1.0 + std::abs(e0)));
  }
}

TEST_CASE("collapsed bound does not decrease when an inducing point is added at a data input") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Problem p = random_problem(seed, 12, 3);
    double prev = collapsed_bound(point_features(p.Z.topRows(1)), p.kernel, p.X, p.Y, p.noise);
    for (Index m = 2; m <= 3; ++m) {
      const double next = collapsed_bound(point_features(p.Z.topRows(m)), p.kernel, p.X, p.Y, p.noise);
      CHECK(next >= prev - 1e-9);
      prev = next;
    }
    Eigen::MatrixXd Z(4, 1);
    Z << p.Z, p.X(static_cast<Index>(seed % 12), 0);
    if ((p.Z.array() == Z(3, 0)).any()) continue;
    CHECK(collapsed_bound(point_features(Z), p.kernel, p.X, p.Y, p.noise) >= prev - 1e-9);
  }
}

TEST_CASE("ELBO is invariant under reordering the features") {
  Rng rng(12);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Problem p = random_problem(seed, 10, 4);
    SVGPState s = prior_state(point_features(p.Z), p.kernel, GaussianNoise{p.noise});
    s.q_mean = sparsekl::testing::random_vector(rng, 4);
    s.q_chol = cholesky_jittered(sparsekl::testing::random_spd(rng, 4, 0.05, 1.0)).lower;
    IndexList perm = {0, 1, 2, 3};
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(4, 4);
    for (Index i = 0; i < 4; ++i) P(i, perm[static_cast<std::size_t>(i)]) = 1.0;
    SVGPState t = s;
    for (Index i = 0; i < 4; ++i) t.features[static_cast<std::size_t>(i)] = s.features[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    t.q_mean = P * s.q_mean;
    const Eigen::MatrixXd S = s.q_chol * s.q_chol.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(P * S * P.transpose());
    t.q_chol = llt.matrixL();
    for (const Likelihood &lik : {Likelihood{GaussianNoise{p.noise}}, Likelihood{BernoulliProbit{}}}) {
      CHECK(std::abs(elbo(s, p.X, p.Y, lik) - elbo(t, p.X, p.Y, lik)) <= 1e-9);
    }
  }
}

TEST_CASE("predictive variances are nonnegative") {
  Rng rng(13);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Problem p = random_problem(seed);
    const VariationalParams v = collapsed_optimal_q(point_features(p.Z), p.kernel, p.X, p.Y, p.noise);
    const Eigen::MatrixXd Xs = sparsekl::testing::random_matrix(rng, 50, 1, -5.0, 12.0);
    const PredictiveMarginals pm = predictive_marginals(state_from(p, v), Xs);
    CHECK(pm.var.minCoeff() >= 0.0);
    const PredictiveMarginals at_z = predictive_marginals(state_from(p, v), p.Z);
    CHECK(at_z.var.minCoeff() >= 0.0);
  }
}

TEST_CASE("state validation") {
  const Problem p = random_problem(14);
  SVGPState s = prior_state(point_features(p.Z), p.kernel, GaussianNoise{p.noise});
  SVGPState bad = s;
  bad.q_chol(0, 1) = 0.1;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = s;
  bad.q_chol(2, 2) = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = s;
  bad.q_mean.resize(2);
  CHECK_THROWS_AS(bad.validate(), DimensionError);
  bad = s;
  bad.features.clear();
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = s;
  bad.likelihood = PoissonExp{0.0};
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  CHECK_THROWS_AS(collapsed_bound(point_features(p.Z), p.kernel, p.X, p.Y, 0.0), InvalidArgument);
}
