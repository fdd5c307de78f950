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

#include <cstddef>
#include <span>
#include <string_view>

namespace sparsekl::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

/// Best instruction set supported by the running CPU (and compiled in).
Isa detect_isa();

/// Instruction set currently used by the dispatched kernels.
Isa active_isa();

/// Overrides dispatch. Throws InvalidArgument if the CPU lacks the ISA.
void set_active_isa(Isa isa);

bool isa_supported(Isa isa);

// Squared-distance row kernel.
//
// `point` is one scaled input (length d). `columns` holds n scaled inputs in
// dimension-major order: columns[a * n + j] is coordinate a of point j.
// out[j] = sum_a (point[a] - columns[a * n + j])^2, accumulated over a in
// increasing order for every j. Scalar and vector variants are bit-identical.
void sqdist_row(std::span<const double> point, std::span<const double> columns,
                std::size_t n, std::span<double> out);

namespace detail {
void sqdist_row_scalar(const double *point, std::size_t d,
                       const double *columns, std::size_t n, double *out);
#if defined(SPARSEKL_HAVE_AVX2)
void sqdist_row_avx2(const double *point, std::size_t d, const double *columns,
                     std::size_t n, double *out);
#endif
} // namespace detail

} // namespace sparsekl::simd
