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
#include "sparsekl/simd.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace sparsekl::simd {

namespace {

Isa initial_isa() {
  if (const char *env = std::getenv("SPARSEKL_FORCE_SCALAR");
      env != nullptr && std::string(env) == "1") {
    return Isa::Scalar;
  }
  return detect_isa();
}

std::atomic<Isa> &current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

} // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
  case Isa::Scalar:
    return "scalar";
  case Isa::Avx2:
    return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
  case Isa::Scalar:
    return true;
  case Isa::Avx2:
#if defined(SPARSEKL_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
  }
  return false;
}

Isa detect_isa() { return isa_supported(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar; }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw InvalidArgument("instruction set '" + std::string(isa_name(isa)) +
                          "' is not supported on this CPU/build");
  }
  current().store(isa, std::memory_order_relaxed);
}

void sqdist_row(std::span<const double> point, std::span<const double> columns,
                std::size_t n, std::span<double> out) {
  const std::size_t d = point.size();
  if (columns.size() != d * n || out.size() != n) {
    throw DimensionError("sqdist_row: expected columns of size " +
                         std::to_string(d * n) + " and output of size " +
                         std::to_string(n));
  }
#if defined(SPARSEKL_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) {
    detail::sqdist_row_avx2(point.data(), d, columns.data(), n, out.data());
    return;
  }
#endif
  detail::sqdist_row_scalar(point.data(), d, columns.data(), n, out.data());
}

} // namespace sparsekl::simd
