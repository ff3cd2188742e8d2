// Copyright (c) 2026 mammodet authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mammodet/kernels.hpp"

#include <immintrin.h>

namespace mammodet {
namespace kernels {

namespace {

void gemm_avx2(int M, int N, int K, const double* A, int lda, const double* B,
               int ldb, double* C, int ldc, bool accumulate) {
  parallel_for(0, M, 8, [&](int m0, int m1) {
    int m = m0;
    // two output rows at a time so each B row is loaded once per pair
    for (; m + 1 < m1; m += 2) {
      double* c0 = C + static_cast<std::size_t>(m) * ldc;
      double* c1 = c0 + ldc;
      if (!accumulate) {
        for (int n = 0; n < N; ++n) c0[n] = 0.0;
        for (int n = 0; n < N; ++n) c1[n] = 0.0;
      }
      const double* a0 = A + static_cast<std::size_t>(m) * lda;
      const double* a1 = a0 + lda;
      for (int k = 0; k < K; ++k) {
        const __m256d va0 = _mm256_set1_pd(a0[k]);
        const __m256d va1 = _mm256_set1_pd(a1[k]);
        const double* b = B + static_cast<std::size_t>(k) * ldb;
        int n = 0;
        for (; n + 7 < N; n += 8) {
          __m256d vb0 = _mm256_loadu_pd(b + n);
          __m256d vb1 = _mm256_loadu_pd(b + n + 4);
          _mm256_storeu_pd(c0 + n, _mm256_fmadd_pd(va0, vb0, _mm256_loadu_pd(c0 + n)));
          _mm256_storeu_pd(c0 + n + 4, _mm256_fmadd_pd(va0, vb1, _mm256_loadu_pd(c0 + n + 4)));
          _mm256_storeu_pd(c1 + n, _mm256_fmadd_pd(va1, vb0, _mm256_loadu_pd(c1 + n)));
          _mm256_storeu_pd(c1 + n + 4, _mm256_fmadd_pd(va1, vb1, _mm256_loadu_pd(c1 + n + 4)));
        }
        for (; n + 3 < N; n += 4) {
          __m256d vb = _mm256_loadu_pd(b + n);
          _mm256_storeu_pd(c0 + n, _mm256_fmadd_pd(va0, vb, _mm256_loadu_pd(c0 + n)));
          _mm256_storeu_pd(c1 + n, _mm256_fmadd_pd(va1, vb, _mm256_loadu_pd(c1 + n)));
        }
        for (; n < N; ++n) {
          c0[n] += a0[k] * b[n];
          c1[n] += a1[k] * b[n];
        }
      }
    }
    for (; m < m1; ++m) {
      double* c = C + static_cast<std::size_t>(m) * ldc;
      if (!accumulate) {
        for (int n = 0; n < N; ++n) c[n] = 0.0;
      }
      const double* a = A + static_cast<std::size_t>(m) * lda;
      for (int k = 0; k < K; ++k) {
        const __m256d va = _mm256_set1_pd(a[k]);
        const double* b = B + static_cast<std::size_t>(k) * ldb;
        int n = 0;
        for (; n + 3 < N; n += 4) {
          _mm256_storeu_pd(c + n, _mm256_fmadd_pd(va, _mm256_loadu_pd(b + n),
                                                  _mm256_loadu_pd(c + n)));
        }
        for (; n < N; ++n) c[n] += a[k] * b[n];
      }
    }
  });
}

void axpy_avx2(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 3 < n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(std::size_t n, double a, double* x) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 3 < n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= a;
}

void relu_avx2(std::size_t n, const double* x, double* y) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 3 < n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_avx2(std::size_t n, const double* y_fwd, const double* gy,
                        double* gx) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 3 < n; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(y_fwd + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(gx + i, _mm256_and_pd(mask, _mm256_loadu_pd(gy + i)));
  }
  for (; i < n; ++i) gx[i] = y_fwd[i] > 0.0 ? gy[i] : 0.0;
}

double reduce_sum_avx2(std::size_t n, const double* x) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 3 < n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) s += x[i];
  return s;
}

void sgd_update_avx2(std::size_t n, double* w, const double* g, double* v,
                     double lr, double momentum, double weight_decay) {
  const __m256d vmom = _mm256_set1_pd(momentum);
  const __m256d vwd = _mm256_set1_pd(weight_decay);
  const __m256d vlr = _mm256_set1_pd(lr);
  std::size_t i = 0;
  for (; i + 3 < n; i += 4) {
    __m256d ww = _mm256_loadu_pd(w + i);
    __m256d gg = _mm256_fmadd_pd(vwd, ww, _mm256_loadu_pd(g + i));
    __m256d vv = _mm256_fmadd_pd(vmom, _mm256_loadu_pd(v + i), gg);
    _mm256_storeu_pd(v + i, vv);
    _mm256_storeu_pd(w + i, _mm256_fnmadd_pd(vlr, vv, ww));
  }
  for (; i < n; ++i) {
    v[i] = momentum * v[i] + (g[i] + weight_decay * w[i]);
    w[i] -= lr * v[i];
  }
}

}  // namespace

const KernelTable* avx2_table_impl() {
  static const KernelTable table = {
      "avx2",      gemm_avx2,          axpy_avx2,       scale_avx2,
      relu_avx2,   relu_backward_avx2, reduce_sum_avx2, sgd_update_avx2,
  };
  return &table;
}

}  // namespace kernels
}  // namespace mammodet
