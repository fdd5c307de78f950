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

#include "sparsekl/optimize.hpp"

#include "sparsekl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace sparsekl {

namespace {

constexpr double kFloor = std::numeric_limits<double>::min();

bool is_diagonal_slot(Index k, Index m) {
  // Column j of a packed lower triangle starts at j*m - j*(j-1)/2.
  Index start = 0;
  for (Index j = 0; j < m; ++j) {
    if (k == start) return true;
    start += m - j;
  }
  return false;
}

} // namespace

std::string_view transform_name(Transform t) {
  switch (t) {
  case Transform::Identity: return "identity";
  case Transform::Log: return "log";
  case Transform::SoftplusDiagonal: return "softplus-diagonal";
  }
  return "unknown";
}

const ParamBlock &ParamLayout::add(std::string name, Index size, Transform transform) {
  if (has(name)) throw InvalidArgument("parameter block '" + name + "' already exists");
  if (size < 0) throw InvalidArgument("parameter block '" + name + "' has negative size");
  if (transform == Transform::SoftplusDiagonal) {
    throw InvalidArgument("use add_lower_triangular for softplus-diagonal blocks");
  }
  blocks_.push_back(ParamBlock{std::move(name), size_, size, transform, 0});
  size_ += size;
  return blocks_.back();
}

const ParamBlock &ParamLayout::add_lower_triangular(std::string name, Index m) {
  if (has(name)) throw InvalidArgument("parameter block '" + name + "' already exists");
  const Index size = m * (m + 1) / 2;
  blocks_.push_back(ParamBlock{std::move(name), size_, size, Transform::SoftplusDiagonal, m});
  size_ += size;
  return blocks_.back();
}

bool ParamLayout::has(std::string_view name) const {
  return std::any_of(blocks_.begin(), blocks_.end(), [&](const ParamBlock &b) { return b.name == name; });
}

const ParamBlock &ParamLayout::block(std::string_view name) const {
  for (const auto &b : blocks_) {
    if (b.name == name) return b;
  }
  throw InvalidArgument("no parameter block named '" + std::string(name) + "'");
}

std::string ParamLayout::coordinate_name(Index i) const {
  for (const auto &b : blocks_) {
    if (i >= b.offset && i < b.offset + b.size) {
      return b.name + "[" + std::to_string(i - b.offset) + "]";
    }
  }
  return "#" + std::to_string(i);
}

Eigen::VectorXd ParamVector::raw(std::string_view name) const {
  const ParamBlock &b = layout.block(name);
  return values.segment(b.offset, b.size);
}

void ParamVector::set_raw(std::string_view name, const Eigen::Ref<const Eigen::VectorXd> &v) {
  const ParamBlock &b = layout.block(name);
  if (v.size() != b.size) {
    throw DimensionError("block '" + b.name + "' has size " + std::to_string(b.size) + ", got " +
                         std::to_string(v.size()));
  }
  values.segment(b.offset, b.size) = v;
}

Eigen::VectorXd ParamVector::constrained(std::string_view name) const {
  const ParamBlock &b = layout.block(name);
  return to_constrained(b, values.segment(b.offset, b.size));
}

void ParamVector::set_constrained(std::string_view name, const Eigen::Ref<const Eigen::VectorXd> &v) {
  set_raw(name, to_unconstrained(layout.block(name), v));
}

std::vector<Eigen::VectorXd> ParamVector::unpack() const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(layout.blocks().size());
  for (const auto &b : layout.blocks()) out.emplace_back(values.segment(b.offset, b.size));
  return out;
}

ParamVector ParamVector::pack(const ParamLayout &layout, const std::vector<Eigen::VectorXd> &blocks) {
  if (blocks.size() != layout.blocks().size()) {
    throw DimensionError("pack: " + std::to_string(blocks.size()) + " blocks for a layout of " +
                         std::to_string(layout.blocks().size()));
  }
  ParamVector x{layout, Eigen::VectorXd(layout.size())};
  for (std::size_t i = 0; i < blocks.size(); ++i) x.set_raw(layout.blocks()[i].name, blocks[i]);
  return x;
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw InvalidArgument("softplus_inverse: argument must be positive");
  return y > 30.0 ? y + std::log(-std::expm1(-y)) : std::log(std::expm1(y));
}

Eigen::VectorXd to_constrained(const ParamBlock &block, const Eigen::Ref<const Eigen::VectorXd> &raw) {
  Eigen::VectorXd out = raw;
  switch (block.transform) {
  case Transform::Identity: break;
  case Transform::Log:
    for (Index i = 0; i < out.size(); ++i) out[i] = std::max(std::exp(raw[i]), kFloor);
    break;
  case Transform::SoftplusDiagonal:
    for (Index i = 0; i < out.size(); ++i) {
      if (is_diagonal_slot(i, block.matrix_dim)) out[i] = std::max(softplus(raw[i]), kFloor);
    }
    break;
  }
  return out;
}

Eigen::VectorXd to_unconstrained(const ParamBlock &block, const Eigen::Ref<const Eigen::VectorXd> &value) {
  Eigen::VectorXd out = value;
  switch (block.transform) {
  case Transform::Identity: break;
  case Transform::Log:
    for (Index i = 0; i < out.size(); ++i) {
      if (!(value[i] > 0.0)) {
        throw InvalidArgument("block '" + block.name + "' needs positive values");
      }
      out[i] = std::log(value[i]);
    }
    break;
  case Transform::SoftplusDiagonal:
    for (Index i = 0; i < out.size(); ++i) {
      if (is_diagonal_slot(i, block.matrix_dim)) out[i] = softplus_inverse(value[i]);
    }
    break;
  }
  return out;
}

Eigen::MatrixXd unpack_lower(const Eigen::Ref<const Eigen::VectorXd> &packed, Index m) {
  if (packed.size() != m * (m + 1) / 2) {
    throw DimensionError("unpack_lower: " + std::to_string(packed.size()) +
                         " values for a " + std::to_string(m) + "x" + std::to_string(m) + " triangle");
  }
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
  Index k = 0;
  for (Index j = 0; j < m; ++j)
    for (Index i = j; i < m; ++i) L(i, j) = packed[k++];
  return L;
}

Eigen::VectorXd pack_lower(const Eigen::MatrixXd &L) {
  const Index m = L.rows();
  Eigen::VectorXd out(m * (m + 1) / 2);
  Index k = 0;
  for (Index j = 0; j < m; ++j)
    for (Index i = j; i < m; ++i) out[k++] = L(i, j);
  return out;
}

Eigen::VectorXd numeric_grad(const Objective &objective, const ParamVector &x, double h) {
  if (!(h > 0.0)) throw InvalidArgument("numeric_grad: step must be positive");
  const Index n = x.values.size();
  Eigen::VectorXd g(n);
  ParamVector probe = x;
  for (Index i = 0; i < n; ++i) {
    const double xi = x.values[i];
    const double step = h * (1.0 + std::abs(xi));
    probe.values[i] = xi + step;
    const double up = objective(probe);
    probe.values[i] = xi - step;
    const double down = objective(probe);
    probe.values[i] = xi;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NonFiniteError("objective is not finite when probing coordinate " + std::to_string(i) +
                           " (" + x.layout.coordinate_name(i) + ")");
    }
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

MaximizeResult maximize(const Objective &objective, const ParamVector &x0, const MaximizeConfig &config) {
  if (config.max_iters < 0 || !(config.step > 0.0) || !(config.tol >= 0.0)) {
    throw InvalidArgument("maximize: need max_iters >= 0, step > 0 and tol >= 0");
  }
  MaximizeResult res{x0, objective(x0), {}, 0, false};
  if (!std::isfinite(res.objective)) throw NonFiniteError("objective is not finite at the starting point");
  const Index n = x0.values.size();
  Eigen::VectorXd steps = Eigen::VectorXd::Constant(n, config.step);
  Eigen::VectorXd prev_g = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = numeric_grad(objective, res.x, config.grad_step);
  res.trace.push_back(TraceRow{0, res.objective, 0.0, g.norm()});
  if (config.on_accept) config.on_accept(res.x, res.trace.back());
  const double max_step = 1e3 * config.step;
  const double min_step = 1e-12;

  for (int iter = 1; iter <= config.max_iters; ++iter) {
    Eigen::VectorXd dir(n);
    for (Index i = 0; i < n; ++i) {
      const double s = g[i] * prev_g[i];
      if (s > 0.0) steps[i] = std::min(steps[i] * 1.2, max_step);
      else if (s < 0.0) steps[i] = std::max(steps[i] * 0.5, min_step);
      dir[i] = g[i] > 0.0 ? steps[i] : (g[i] < 0.0 ? -steps[i] : 0.0);
    }
    if (dir.isZero(0.0)) {
      res.converged = true;
      break;
    }
    double scale = 1.0;
    bool accepted = false;
    ParamVector trial = res.x;
    double f_trial = 0.0;
    for (int k = 0; k <= config.max_halvings; ++k, scale *= 0.5) {
      trial.values = res.x.values + scale * dir;
      f_trial = objective(trial);
      if (std::isfinite(f_trial) && f_trial >= res.objective) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.converged = true;
      break;
    }
    const double delta = f_trial - res.objective;
    res.x = trial;
    res.objective = f_trial;
    res.iterations = iter;
    if (scale < 1.0) steps *= scale; // remember that the full step overshot
    prev_g = g;
    g = numeric_grad(objective, res.x, config.grad_step);
    res.trace.push_back(TraceRow{iter, res.objective, scale, g.norm()});
    if (config.on_accept) config.on_accept(res.x, res.trace.back());
    if (delta < config.tol * (1.0 + std::abs(res.objective))) {
      res.converged = true;
      break;
    }
  }
  return res;
}

ParamVector encode_state(const SVGPState &s, const FreeParameters &free) {
  s.validate();
  ParamLayout layout;
  const Index m = s.num_inducing();
  const Index d = s.kernel.input_dim();
  if (free.variational) {
    layout.add("q_mean", m, Transform::Identity);
    layout.add_lower_triangular("q_chol", m);
  }
  if (free.kernel) {
    layout.add("log_variance", 1, Transform::Log);
    layout.add("log_lengthscales", d, Transform::Log);
  }
  if (free.noise) {
    if (!std::holds_alternative<GaussianNoise>(s.likelihood)) {
      throw InvalidArgument("noise is only a free parameter under a Gaussian likelihood");
    }
    layout.add("log_noise", 1, Transform::Log);
  }
  Index windows = 0;
  for (const auto &f : s.features) windows += is_point(f) ? 0 : 1;
  if (free.features) {
    layout.add("feature_centers", m * d, Transform::Identity);
    if (windows > 0) layout.add("log_widths", windows * d, Transform::Log);
  }
  ParamVector x{layout, Eigen::VectorXd::Zero(layout.size())};
  if (free.variational) {
    x.set_raw("q_mean", s.q_mean);
    x.set_constrained("q_chol", pack_lower(s.q_chol));
  }
  if (free.kernel) {
    x.set_constrained("log_variance", Eigen::VectorXd::Constant(1, s.kernel.variance()));
    x.set_constrained("log_lengthscales", s.kernel.lengthscales());
  }
  if (free.noise) {
    x.set_constrained("log_noise", Eigen::VectorXd::Constant(1, std::get<GaussianNoise>(s.likelihood).noise_var));
  }
  if (free.features) {
    Eigen::VectorXd centers(m * d);
    Eigen::VectorXd widths(windows * d);
    Index w = 0;
    for (Index i = 0; i < m; ++i) {
      const auto &f = s.features[static_cast<std::size_t>(i)];
      centers.segment(i * d, d) = feature_location(f);
      if (const auto *g = std::get_if<GaussianWindowFeature>(&f)) widths.segment((w++) * d, d) = g->widths;
    }
    x.set_raw("feature_centers", centers);
    if (windows > 0) x.set_constrained("log_widths", widths);
  }
  return x;
}

SVGPState decode_state(const ParamVector &x, const SVGPState &base) {
  SVGPState s = base;
  const Index m = base.num_inducing();
  const Index d = base.kernel.input_dim();
  const ParamLayout &layout = x.layout;
  if (layout.has("q_mean")) s.q_mean = x.raw("q_mean");
  if (layout.has("q_chol")) s.q_chol = unpack_lower(x.constrained("q_chol"), m);
  if (layout.has("log_variance") || layout.has("log_lengthscales")) {
    const double variance = layout.has("log_variance") ? x.constrained("log_variance")[0] : base.kernel.variance();
    const Eigen::VectorXd ell =
        layout.has("log_lengthscales") ? x.constrained("log_lengthscales") : base.kernel.lengthscales();
    s.kernel = Kernel(variance, ell, base.kernel.mean_const());
  }
  if (layout.has("log_noise")) s.likelihood = GaussianNoise{x.constrained("log_noise")[0]};
  if (layout.has("feature_centers")) {
    const Eigen::VectorXd centers = x.raw("feature_centers");
    const Eigen::VectorXd widths = layout.has("log_widths") ? x.constrained("log_widths") : Eigen::VectorXd();
    Index w = 0;
    for (Index i = 0; i < m; ++i) {
      auto &f = s.features[static_cast<std::size_t>(i)];
      if (is_point(f)) {
        f = PointFeature{centers.segment(i * d, d)};
      } else {
        f = GaussianWindowFeature{centers.segment(i * d, d), widths.segment((w++) * d, d)};
      }
    }
  }
  return s;
}

} // namespace sparsekl
