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

namespace mammodet {
namespace kernels {

namespace {

void gemm_scalar(int M, int N, int K, const double* A, int lda, const double* B,
                 int ldb, double* C, int ldc, bool accumulate) {
  parallel_for(0, M, 8, [&](int m0, int m1) {
    for (int m = m0; m < m1; ++m) {
      double* c = C + static_cast<std::size_t>(m) * ldc;
      if (!accumulate) {
        for (int n = 0; n < N; ++n) c[n] = 0.0;
      }
      const double* a = A + static_cast<std::size_t>(m) * lda;
      for (int k = 0; k < K; ++k) {
        const double av = a[k];
        if (av == 0.0) continue;
        const double* b = B + static_cast<std::size_t>(k) * ldb;
        for (int n = 0; n < N; ++n) c[n] += av * b[n];
      }
    }
  });
}

void axpy_scalar(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(std::size_t n, double a, double* x) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void relu_scalar(std::size_t n, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_scalar(std::size_t n, const double* y_fwd, const double* gy,
                          double* gx) {
  for (std::size_t i = 0; i < n; ++i) gx[i] = y_fwd[i] > 0.0 ? gy[i] : 0.0;
}

double reduce_sum_scalar(std::size_t n, const double* x) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

void sgd_update_scalar(std::size_t n, double* w, const double* g, double* v,
                       double lr, double momentum, double weight_decay) {
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = momentum * v[i] + (g[i] + weight_decay * w[i]);
    w[i] -= lr * v[i];
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table = {
      "scalar",        gemm_scalar,       axpy_scalar,       scale_scalar,
      relu_scalar,     relu_backward_scalar, reduce_sum_scalar, sgd_update_scalar,
  };
  return table;
}

}  // namespace kernels
}  // namespace mammodet
