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

// Compiled with -mavx2 only (no -mfma) so every lane rounds exactly like the
// scalar loop.

#include "sparsekl/simd.hpp"

#include <immintrin.h>

namespace sparsekl::simd::detail {

void sqdist_row_avx2(const double *point, std::size_t d, const double *columns,
                     std::size_t n, double *out) {
  const std::size_t n4 = n - n % 4;
  for (std::size_t j = 0; j < n4; j += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t a = 0; a < d; ++a) {
      const __m256d p = _mm256_set1_pd(point[a]);
      const __m256d c = _mm256_loadu_pd(columns + a * n + j);
      const __m256d diff = _mm256_sub_pd(p, c);
      acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
    }
    _mm256_storeu_pd(out + j, acc);
  }
  for (std::size_t j = n4; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      const double diff = point[a] - columns[a * n + j];
      acc = acc + diff * diff;
    }
    out[j] = acc;
  }
}

} // namespace sparsekl::simd::detail
