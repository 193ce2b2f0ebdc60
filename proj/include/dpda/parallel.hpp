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

#pragma once

#include <cstddef>
#include <functional>

namespace dpda {

// Process-wide worker count used by per-example and evaluation fan-out.
// Callers only ever write disjoint output slots; reductions happen
// afterwards in index order, so results do not depend on this value.
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Calls fn(begin, end) on contiguous shards of [0, n).
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace dpda
