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

#ifndef MAMMODET_KERNELS_HPP
#define MAMMODET_KERNELS_HPP

#include <cstddef>
#include <functional>
#include <string>

namespace mammodet {
namespace kernels {

// Data-parallel inner loops used by the tensor/conv/optimizer layers.
// Every entry has a scalar reference implementation and, on x86 with AVX2,
// a vectorized variant. The two are equivalence-tested against each other;
// selection happens once per process so a run sticks to a single backend.
struct KernelTable {
  const char* name;

  // C[M x N] = (accumulate ? C : 0) + A[M x K] * B[K x N], row-major with
  // leading dimensions lda/ldb/ldc. Accumulation order over k is fixed
  // (outermost k loop) for every backend and thread count.
  void (*gemm)(int M, int N, int K, const double* A, int lda, const double* B,
               int ldb, double* C, int ldc, bool accumulate);

  // y[i] += a * x[i]
  void (*axpy)(std::size_t n, double a, const double* x, double* y);

  // x[i] *= a
  void (*scale)(std::size_t n, double a, double* x);

  // y[i] = max(0, x[i])
  void (*relu)(std::size_t n, const double* x, double* y);

  // gx[i] = y_fwd[i] > 0 ? gy[i] : 0   (kink convention: zero at 0)
  void (*relu_backward)(std::size_t n, const double* y_fwd, const double* gy,
                        double* gx);

  double (*reduce_sum)(std::size_t n, const double* x);

  // momentum SGD with decoupled-from-nothing classic L2 term:
  //   v = momentum * v + (g + weight_decay * w);  w -= lr * v
  void (*sgd_update)(std::size_t n, double* w, const double* g, double* v,
                     double lr, double momentum, double weight_decay);
};

enum class Backend { kAuto, kScalar, kAvx2 };

const KernelTable& scalar_table();
// nullptr when the binary was built without AVX2 or the CPU lacks it.
const KernelTable* avx2_table();

// Active table. First call resolves kAuto (or the MAMMODET_KERNELS
// environment variable: "scalar" | "avx2" | "auto").
const KernelTable& active();
void set_backend(Backend b);  // throws std::runtime_error if unavailable
Backend parse_backend(const std::string& name);

// Static range partition over a small worker group. Deterministic: chunk
// boundaries depend only on (begin, end, thread count), never on timing.
// Runs inline when the range is below min_chunk or only one thread is set.
void parallel_for(int begin, int end, int min_chunk,
                  const std::function<void(int, int)>& fn);
int thread_count();
void set_thread_count(int n);

}  // namespace kernels
}  // namespace mammodet

#endif  // MAMMODET_KERNELS_HPP
