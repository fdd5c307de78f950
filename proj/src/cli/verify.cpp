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

#include "sparsekl/cli.hpp"
#include "sparsekl/finite_oracle.hpp"
#include "sparsekl/gaussian.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace sparsekl {

namespace {

constexpr double kMinMismatchedGap = 0.01;

std::uint64_t instance_seed(std::uint64_t seed, int i) {
  // splitmix64 step, so neighbouring suite seeds do not share instances.
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(i) + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Eigen::MatrixXd gaussian_matrix(std::mt19937_64 &rng, Index rows, Index cols) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd A(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) A(i, j) = z(rng);
  return A;
}

} // namespace

VerifyReport run_verification(std::uint64_t seed, int instances, double tolerance) {
  VerifyReport rep;
  rep.seed = seed;
  double min_gap = std::numeric_limits<double>::infinity();
  double worst[4] = {0.0, 0.0, 0.0, 0.0};
  const InducingLayout layouts[3] = {InducingLayout::Disjoint, InducingLayout::Subset, InducingLayout::Equal};
  for (int i = 0; i < instances; ++i) {
    VerifyInstance v;
    v.instance_seed = instance_seed(seed, i);
    std::mt19937_64 rng(v.instance_seed);

    const FiniteModel m = random_finite_model(v.instance_seed, layouts[i % 3]);
    const ApproxPosterior q = random_approximation(m, v.instance_seed + 1);
    const EquivalenceReport eq = check_finite_equivalence(m, q);
    v.full_kl = eq.full;
    v.titsias_kl = eq.titsias;
    v.elbo_gap = eq.elbo_gap;
    v.equivalence_diff = eq.max_abs_diff / (1.0 + std::abs(eq.full));

    IndexList all(static_cast<std::size_t>(m.size()));
    std::iota(all.begin(), all.end(), Index{0});
    const GaussianDist joint_q = extend_approximation(m, q, all);
    const GaussianDist joint_p = exact_posterior(m);
    IndexList perm = all;
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto cut = static_cast<std::ptrdiff_t>(std::max<Index>(1, m.size() / 2));
    const IndexList U(perm.begin(), perm.begin() + cut), V(perm.begin() + cut, perm.end());
    v.chain_joint = mvn_kl(joint_q, joint_p);
    if (V.empty()) {
      v.chain_conditional = 0.0;
      v.chain_marginal = v.chain_joint;
    } else {
      const ChainRuleTerms t = kl_chain_rule_decompose(joint_q, joint_p, U, V);
      v.chain_conditional = t.conditional_term;
      v.chain_marginal = t.marginal_term;
    }
    v.chain_diff = std::abs(v.chain_conditional + v.chain_marginal - v.chain_joint) / (1.0 + v.chain_joint);

    // Augmentation and push-forward need Z outside the data.
    const FiniteModel md = random_finite_model(v.instance_seed, InducingLayout::Disjoint);
    const ApproxPosterior qd = random_approximation(md, v.instance_seed + 2);
    const GaussianConditional prior_c = augmentation_prior_conditional(md);
    const AugmentationGap matched = augmentation_gap(md, qd, prior_c);
    const AugmentationGap mismatched = augmentation_gap(md, qd, scaled_conditional(prior_c, 2.0));
    v.aug_gap = matched.gap;
    v.aug_gap_mismatched = mismatched.gap;
    v.aug_closed_form = mismatched.expected_conditional_kl;
    v.aug_diff = std::max(std::abs(matched.gap),
                          std::abs(mismatched.gap - mismatched.expected_conditional_kl) / (1.0 + mismatched.gap));
    min_gap = std::min(min_gap, mismatched.gap);

    const Index n = md.size();
    const Index k = 1 + static_cast<Index>(i % 3) % n;
    const Eigen::MatrixXd A = gaussian_matrix(rng, k, n);
    const Eigen::MatrixXd B = gaussian_matrix(rng, n, n);
    const Eigen::MatrixXd S = B * B.transpose() / static_cast<double>(n) + 0.1 * Eigen::MatrixXd::Identity(n, n);
    const GaussianDist q_A(gaussian_matrix(rng, k, 1).col(0), A * S * A.transpose());
    const PushforwardReport pf = pushforward_check(md, q_A, A);
    v.push_diff = std::max(pf.max_diff / (1.0 + q_A.cov().cwiseAbs().maxCoeff()),
                           std::abs(pf.kl_union - pf.kl_X) / (1.0 + std::abs(pf.kl_X)));

    worst[0] = std::max(worst[0], v.equivalence_diff);
    worst[1] = std::max(worst[1], v.chain_diff);
    worst[2] = std::max(worst[2], v.aug_diff);
    worst[3] = std::max(worst[3], v.push_diff);
    rep.instances.push_back(v);
  }
  const char *names[4] = {"equivalence", "chain_rule", "augmentation_gap", "pushforward"};
  rep.passed = instances > 0;
  for (int f = 0; f < 4; ++f) {
    FamilySummary s{names[f], worst[f], tolerance, worst[f] <= tolerance};
    if (f == 2) s.passed = s.passed && min_gap > kMinMismatchedGap;
    rep.passed = rep.passed && s.passed;
    rep.families.push_back(s);
  }
  rep.min_mismatched_gap = instances > 0 ? min_gap : 0.0;
  return rep;
}

std::string verify_report_json(const VerifyReport &r) {
  using nlohmann::json;
  json doc;
  doc["seed"] = r.seed;
  doc["passed"] = r.passed;
  json fam = json::object();
  for (const auto &f : r.families) {
    fam[f.name] = {{"max_diff", f.max_diff}, {"tolerance", f.tolerance}, {"passed", f.passed}};
  }
  fam["augmentation_gap"]["min_mismatched_gap"] = r.min_mismatched_gap;
  fam["augmentation_gap"]["min_mismatched_gap_required"] = kMinMismatchedGap;
  doc["families"] = fam;
  json inst = json::array();
  for (const auto &v : r.instances) {
    inst.push_back({{"instance_seed", v.instance_seed},
                    {"full_kl", v.full_kl},
                    {"titsias_kl", v.titsias_kl},
                    {"elbo_gap", v.elbo_gap},
                    {"chain_conditional", v.chain_conditional},
                    {"chain_marginal", v.chain_marginal},
                    {"chain_joint", v.chain_joint},
                    {"aug_gap", v.aug_gap},
                    {"aug_gap_mismatched", v.aug_gap_mismatched},
                    {"aug_closed_form", v.aug_closed_form},
                    {"push_diff", v.push_diff}});
  }
  doc["instances"] = inst;
  return doc.dump(2) + "\n";
}

} // namespace sparsekl
