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

#include <stdexcept>
#include <string>

namespace sparsekl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shapes or lengths that do not agree.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Index lists that are out of range, duplicated or otherwise malformed.
class IndexError : public Error {
public:
  using Error::Error;
};

/// Invalid argument values (non-positive variances, bad orders, ...).
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Cholesky failed even at the jitter cap.
class NotPositiveDefinite : public Error {
public:
  NotPositiveDefinite(const std::string &what, double attempted_jitter)
      : Error(what), jitter_(attempted_jitter) {}
  double attempted_jitter() const noexcept { return jitter_; }

private:
  double jitter_;
};

/// Objective or probe produced NaN/Inf.
class NonFiniteError : public Error {
public:
  using Error::Error;
};

/// Malformed or inconsistent input data (CSV rows, NaNs, events outside the domain).
class DataError : public Error {
public:
  using Error::Error;
};

/// Malformed run configuration (unknown keys, missing fields, unresolvable paths).
class ConfigError : public Error {
public:
  using Error::Error;
};

} // namespace sparsekl
