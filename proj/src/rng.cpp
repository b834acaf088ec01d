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

#include "qsca/rng.hpp"

namespace qsca {

Rng derive_stream(uint64_t master_seed, uint64_t index, StreamPurpose purpose,
                  uint64_t sub_index) {
    auto lo = [](uint64_t v) { return uint32_t(v & 0xFFFFFFFFu); };
    auto hi = [](uint64_t v) { return uint32_t(v >> 32); };
    std::seed_seq seq{lo(master_seed), hi(master_seed), lo(index),
                      hi(index),       uint32_t(purpose), lo(sub_index),
                      hi(sub_index)};
    return Rng(seq);
}

} // namespace qsca
