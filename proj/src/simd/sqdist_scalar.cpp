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

#include "sparsekl/simd.hpp"

namespace sparsekl::simd::detail {

void sqdist_row_scalar(const double *point, std::size_t d,
                       const double *columns, std::size_t n, double *out) {
  for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    const double p = point[a];
    const double *col = columns + a * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double diff = p - col[j];
      out[j] = out[j] + diff * diff;
    }
  }
}

} // namespace sparsekl::simd::detail
