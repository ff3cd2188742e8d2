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

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <thread>
#include <vector>

namespace mammodet {
namespace kernels {

#if defined(MAMMODET_BUILD_AVX2)
const KernelTable* avx2_table_impl();
#endif

const KernelTable* avx2_table() {
#if defined(MAMMODET_BUILD_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

std::atomic<const KernelTable*> g_active{nullptr};

const KernelTable* resolve_auto() {
  if (const char* env = std::getenv("MAMMODET_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return &scalar_table();
    if (v == "avx2") {
      if (const KernelTable* t = avx2_table()) return t;
      throw std::runtime_error("kernels: MAMMODET_KERNELS=avx2 but AVX2 is unavailable");
    }
  }
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

}  // namespace

const KernelTable& active() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    t = resolve_auto();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

void set_backend(Backend b) {
  switch (b) {
    case Backend::kAuto:
      g_active.store(resolve_auto(), std::memory_order_release);
      break;
    case Backend::kScalar:
      g_active.store(&scalar_table(), std::memory_order_release);
      break;
    case Backend::kAvx2: {
      const KernelTable* t = avx2_table();
      if (t == nullptr) throw std::runtime_error("kernels: AVX2 backend unavailable on this CPU/build");
      g_active.store(t, std::memory_order_release);
      break;
    }
  }
}

Backend parse_backend(const std::string& name) {
  if (name == "auto") return Backend::kAuto;
  if (name == "scalar") return Backend::kScalar;
  if (name == "avx2") return Backend::kAvx2;
  throw std::invalid_argument("kernels: unknown backend '" + name + "'");
}

namespace {

int default_threads() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  return static_cast<int>(hw < 4 ? hw : 4);
}

std::atomic<int> g_threads{0};

}  // namespace

int thread_count() {
  int n = g_threads.load(std::memory_order_relaxed);
  if (n == 0) {
    n = default_threads();
    g_threads.store(n, std::memory_order_relaxed);
  }
  return n;
}

void set_thread_count(int n) {
  g_threads.store(n < 1 ? 1 : n, std::memory_order_relaxed);
}

void parallel_for(int begin, int end, int min_chunk,
                  const std::function<void(int, int)>& fn) {
  const int total = end - begin;
  if (total <= 0) return;
  const int workers = thread_count();
  if (workers <= 1 || total <= min_chunk) {
    fn(begin, end);
    return;
  }
  int parts = workers;
  if (min_chunk > 0 && total / parts < 1) parts = total;
  const int base = total / parts;
  const int rem = total % parts;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(parts - 1));
  int cursor = begin;
  for (int p = 0; p < parts; ++p) {
    const int len = base + (p < rem ? 1 : 0);
    const int lo = cursor;
    const int hi = cursor + len;
    cursor = hi;
    if (len == 0) continue;
    if (p + 1 == parts) {
      fn(lo, hi);
    } else {
      pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
  }
  for (auto& t : pool) t.join();
}

}  // namespace kernels
}  // namespace mammodet
