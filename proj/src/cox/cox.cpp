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

#include "sparsekl/cox.hpp"

#include "sparsekl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

namespace sparsekl {

namespace {

std::string format_point(const Eigen::VectorXd &x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

const QuadratureRule &square_link_rule() {
  static const QuadratureRule rule = gauss_hermite(kSquareLinkHermiteOrder);
  return rule;
}

} // namespace

std::string_view cox_link_name(CoxLink link) {
  return link == CoxLink::Exp ? "exp" : "square";
}

CoxLink parse_cox_link(std::string_view name) {
  if (name == "exp") return CoxLink::Exp;
  if (name == "square") return CoxLink::Square;
  throw InvalidArgument("unknown Cox link '" + std::string(name) + "' (expected exp or square)");
}

double Domain::volume() const { return (upper - lower).prod(); }

bool Domain::contains(const Eigen::Ref<const Eigen::VectorXd> &x) const {
  if (x.size() != dim()) return false;
  return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

void Domain::validate() const {
  if (lower.size() != upper.size()) {
    throw InvalidArgument("domain: lower and upper corners have different dimensions");
  }
  if (dim() < 1 || dim() > 2) {
    throw InvalidArgument("domain: dimension must be 1 or 2, got " + std::to_string(dim()));
  }
  for (Index i = 0; i < dim(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i])) {
      throw InvalidArgument("domain: need finite lower < upper in every dimension");
    }
  }
}

int default_cox_quadrature_order(Index dim) { return dim == 1 ? 50 : 20; }

void CoxModel::validate() const {
  domain.validate();
  if (quad_order < 2) {
    throw InvalidArgument("Cox quadrature order must be at least 2, got " +
                          std::to_string(quad_order));
  }
  if (events.rows() > 0 && events.cols() != domain.dim()) {
    throw DataError("events have " + std::to_string(events.cols()) +
                    " columns, domain dimension " + std::to_string(domain.dim()));
  }
  for (Index i = 0; i < events.rows(); ++i) {
    const Eigen::VectorXd e = events.row(i).transpose();
    if (!domain.contains(e)) {
      throw DataError("event " + std::to_string(i) + " at " + format_point(e) +
                      " lies outside the domain");
    }
  }
}

QuadratureGrid tensor_gauss_legendre(const Domain &domain, int order) {
  domain.validate();
  if (order < 1) throw InvalidArgument("quadrature order must be at least 1");
  const Index d = domain.dim();
  std::vector<QuadratureRule> rules;
  for (Index a = 0; a < d; ++a) rules.push_back(gauss_legendre(order, domain.lower[a], domain.upper[a]));
  Index total = 1;
  for (Index a = 0; a < d; ++a) total *= order;
  QuadratureGrid g{Eigen::MatrixXd(total, d), Eigen::VectorXd(total)};
  for (Index k = 0; k < total; ++k) {
    Index rem = k;
    double w = 1.0;
    // Last dimension varies fastest.
    for (Index a = d - 1; a >= 0; --a) {
      const auto i = static_cast<std::size_t>(rem % order);
      rem /= order;
      g.nodes(k, a) = rules[static_cast<std::size_t>(a)].nodes[i];
      w *= rules[static_cast<std::size_t>(a)].weights[i];
    }
    g.weights[k] = w;
  }
  return g;
}

double expected_log_intensity(CoxLink link, double mean, double var) {
  if (link == CoxLink::Exp) return mean;
  return gaussian_expectation(square_link_rule(), mean, var, [](double f) {
    return f == 0.0 ? kLogSquareClamp : std::max(std::log(f * f), kLogSquareClamp);
  });
}

double expected_intensity(CoxLink link, double mean, double var) {
  if (link == CoxLink::Exp) return std::exp(mean + 0.5 * var);
  return mean * mean + var;
}

CoxElboTerms cox_elbo_terms(const SVGPState &s, const CoxModel &m) {
  m.validate();
  return cox_elbo_terms(s, m, tensor_gauss_legendre(m.domain, m.quad_order));
}

CoxElboTerms cox_elbo_terms(const SVGPState &s, const CoxModel &m, const QuadratureGrid &grid) {
  m.validate();
  s.validate();
  if (s.kernel.input_dim() != m.domain.dim()) {
    throw DimensionError("cox_elbo: kernel dimension " + std::to_string(s.kernel.input_dim()) +
                         " vs domain dimension " + std::to_string(m.domain.dim()));
  }
  CoxElboTerms t;
  t.kl = inducing_kl(s);
  if (m.events.rows() > 0) {
    // Lexicographic order makes the event sum independent of how the events
    // were listed.
    std::vector<Index> order(static_cast<std::size_t>(m.events.rows()));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
      for (Index c = 0; c < m.events.cols(); ++c) {
        if (m.events(a, c) != m.events(b, c)) return m.events(a, c) < m.events(b, c);
      }
      return false;
    });
    Eigen::MatrixXd sorted(m.events.rows(), m.events.cols());
    for (std::size_t i = 0; i < order.size(); ++i) sorted.row(static_cast<Index>(i)) = m.events.row(order[i]);
    const PredictiveMarginals at_events = predictive_marginals(s, sorted);
    for (Index i = 0; i < m.events.rows(); ++i) {
      t.event_term += expected_log_intensity(m.link, at_events.mean[i], at_events.var[i]);
    }
  }
  if (grid.nodes.cols() != m.domain.dim() || grid.nodes.rows() != grid.weights.size()) {
    throw DimensionError("cox_elbo: quadrature grid does not match the domain");
  }
  const PredictiveMarginals at_grid = predictive_marginals(s, grid.nodes);
  for (Index g = 0; g < grid.weights.size(); ++g) {
    t.integral_term += grid.weights[g] * expected_intensity(m.link, at_grid.mean[g], at_grid.var[g]);
  }
  t.elbo = -t.kl + t.event_term - t.integral_term;
  if (!std::isfinite(t.elbo)) throw NonFiniteError("cox_elbo is not finite");
  return t;
}

double cox_elbo(const SVGPState &s, const CoxModel &m) { return cox_elbo_terms(s, m).elbo; }

Eigen::VectorXd fitted_intensity(const SVGPState &s, const CoxModel &m, const Eigen::MatrixXd &Xstar) {
  m.domain.validate();
  for (Index i = 0; i < Xstar.rows(); ++i) {
    const Eigen::VectorXd x = Xstar.row(i).transpose();
    if (!m.domain.contains(x)) {
      throw DataError("fitted_intensity: point " + format_point(x) + " lies outside the domain");
    }
  }
  const PredictiveMarginals pm = predictive_marginals(s, Xstar);
  Eigen::VectorXd out(Xstar.rows());
  for (Index i = 0; i < Xstar.rows(); ++i) out[i] = expected_intensity(m.link, pm.mean[i], pm.var[i]);
  return out;
}

Eigen::MatrixXd sample_inhomogeneous_pp(const std::function<double(const Eigen::VectorXd &)> &intensity,
                                        double upper_bound, const Domain &domain,
                                        std::uint64_t seed) {
  domain.validate();
  if (!(upper_bound >= 0.0) || !std::isfinite(upper_bound)) {
    throw InvalidArgument("thinning: upper bound must be finite and nonnegative");
  }
  const QuadratureGrid check = tensor_gauss_legendre(domain, default_cox_quadrature_order(domain.dim()));
  for (Index g = 0; g < check.nodes.rows(); ++g) {
    const Eigen::VectorXd x = check.nodes.row(g).transpose();
    const double v = intensity(x);
    if (!(v >= 0.0) || v > upper_bound) {
      std::ostringstream os;
      os.precision(17);
      os << "thinning: intensity " << v << " at grid point " << format_point(x)
         << " is outside [0, " << upper_bound << "]";
      throw InvalidArgument(os.str());
    }
  }
  const Index d = domain.dim();
  if (upper_bound == 0.0) return Eigen::MatrixXd(0, d);
  std::mt19937_64 rng(seed);
  std::poisson_distribution<long> count(upper_bound * domain.volume());
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const long n = count(rng);
  std::vector<Eigen::VectorXd> kept;
  for (long i = 0; i < n; ++i) {
    Eigen::VectorXd x(d);
    for (Index a = 0; a < d; ++a) x[a] = domain.lower[a] + (domain.upper[a] - domain.lower[a]) * u01(rng);
    const double accept = u01(rng);
    if (accept * upper_bound < intensity(x)) kept.push_back(std::move(x));
  }
  Eigen::MatrixXd out(static_cast<Index>(kept.size()), d);
  for (std::size_t i = 0; i < kept.size(); ++i) out.row(static_cast<Index>(i)) = kept[i].transpose();
  return out;
}

} // namespace sparsekl
