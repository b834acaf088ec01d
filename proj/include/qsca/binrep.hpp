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
#include <string>
#include <string_view>

namespace qsca {

/// Fixed-width binary string of at most 64 bits. Bit 0 is the least
/// significant bit; `to_string` prints the most significant bit first.
class BitVector {
  public:
    static constexpr unsigned MAX_WIDTH = 64;

    /// Keeps the low `width` bits of `pattern`. Throws ArgumentError when
    /// width is 0 or larger than 64.
    BitVector(uint64_t pattern, unsigned width);

    /// Parses a string of '0'/'1' characters, most significant bit first.
    static BitVector from_string(std::string_view msb_first);

    unsigned width() const { return width_; }
    uint64_t pattern() const { return bits_; }
    bool bit(unsigned index) const;
    std::string to_string() const;

    BitVector operator~() const;
    BitVector operator^(const BitVector &other) const;
    bool operator==(const BitVector &other) const = default;

  private:
    uint64_t bits_;
    unsigned width_;
};

/// Mask with the low `width` bits set.
constexpr uint64_t low_mask(unsigned width) {
    return width >= 64 ? ~uint64_t(0) : (uint64_t(1) << width) - 1;
}

/// True when `value` is representable in `width`-bit two's complement.
bool fits_twos_complement(int64_t value, unsigned width);

/// Two's complement encoding. Throws RangeError when value is outside
/// [-2^(width-1), 2^(width-1) - 1].
BitVector encode_twos_complement(int64_t value, unsigned width);
int64_t decode_twos_complement(const BitVector &bv);

/// Decodes an IEEE-754 single precision pattern. Only normal numbers and
/// the all-zero pattern are accepted; everything else (including -0.0)
/// throws UnsupportedEncoding.
double decode_ieee754_single(const BitVector &bv);

unsigned hamming_weight(const BitVector &bv);
unsigned hamming_distance(const BitVector &a, const BitVector &b);

} // namespace qsca
