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

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace dpda {

using Rng = std::mt19937_64;

// Derives an independent generator for (root seed, stream name, index).
// All randomness in a run is drawn from named substreams so that one stage
// can be replayed without replaying the others.
Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

// Mixes a name into a seed; used to hand child seeds to sub-components.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name,
                          std::uint64_t index = 0);

// k distinct indices from [0, n), uniformly, via partial Fisher-Yates.
std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                    std::size_t k, Rng& rng);

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace dpda
