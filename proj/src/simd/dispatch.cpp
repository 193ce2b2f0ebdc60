/*
 * Copyright 2026 The dpda Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "dpda/simd.hpp"

namespace dpda::simd {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa detect_default() {
  if (const char* env = std::getenv("DPDA_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return Isa::kScalar;
    if (want == "avx2" && isa_supported(Isa::kAvx2)) return Isa::kAvx2;
  }
  return isa_supported(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<const KernelTable*>& active_table() {
  static std::atomic<const KernelTable*> table{&kernels_for(detect_default())};
  return table;
}

}  // namespace

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
      return detail::avx2_compiled() && cpu_has_avx2();
  }
  return false;
}

const KernelTable& kernels_for(Isa isa) {
  return isa == Isa::kAvx2 ? detail::kAvx2Table : detail::kScalarTable;
}

const KernelTable& kernels() {
  return *active_table().load(std::memory_order_relaxed);
}

Isa active_isa() { return kernels().isa; }

void set_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::invalid_argument("SIMD variant not supported on this CPU: " +
                                std::string(isa_name(isa)));
  }
  active_table().store(&kernels_for(isa), std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

}  // namespace dpda::simd
