/*
 * SPDX-License-Identifier: Apache-2.0
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
 *
 * This file is part of qsca, a side-channel laboratory for quantized networks.
 */

#pragma once

#include <cstdint>
#include <random>

namespace qsca {

using Rng = std::mt19937_64;

/// Tags separating the independent random streams of one experiment.
enum class StreamPurpose : uint32_t {
    coefficients = 1,
    secret = 2,
    operands = 3,
    noise = 4,
    known_weights = 5,
    model = 6,
    inputs = 7,
    evaluation = 8,
};

/// Derives an independent generator from (master seed, index, purpose,
/// sub-index). The same tuple always yields the same stream, whatever the
/// order in which streams are requested.
Rng derive_stream(uint64_t master_seed, uint64_t index, StreamPurpose purpose,
                  uint64_t sub_index = 0);

} // namespace qsca
