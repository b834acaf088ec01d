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

#include "qsca/binrep.hpp"
#include "qsca/errors.hpp"

#include <bit>
#include <cmath>

namespace qsca {

BitVector::BitVector(uint64_t pattern, unsigned width)
    : bits_(pattern & low_mask(width)), width_(width) {
    if (width == 0 || width > MAX_WIDTH)
        throw ArgumentError("BitVector width must be in [1, 64], got " +
                            std::to_string(width));
}

BitVector BitVector::from_string(std::string_view msb_first) {
    if (msb_first.empty() || msb_first.size() > MAX_WIDTH)
        throw ArgumentError("bit string length must be in [1, 64]");
    uint64_t pattern = 0;
    for (char c : msb_first) {
        if (c != '0' && c != '1')
            throw ArgumentError("bit string may only contain '0' and '1'");
        pattern = (pattern << 1) | uint64_t(c == '1');
    }
    return BitVector(pattern, unsigned(msb_first.size()));
}

bool BitVector::bit(unsigned index) const {
    if (index >= width_)
        throw RangeError("bit index " + std::to_string(index) +
                         " outside width " + std::to_string(width_));
    return (bits_ >> index) & 1;
}

std::string BitVector::to_string() const {
    std::string s(width_, '0');
    for (unsigned i = 0; i < width_; i++)
        if ((bits_ >> i) & 1)
            s[width_ - 1 - i] = '1';
    return s;
}

BitVector BitVector::operator~() const { return BitVector(~bits_, width_); }

BitVector BitVector::operator^(const BitVector &other) const {
    if (other.width_ != width_)
        throw DimensionError("bitwise xor of widths " + std::to_string(width_) +
                             " and " + std::to_string(other.width_));
    return BitVector(bits_ ^ other.bits_, width_);
}

bool fits_twos_complement(int64_t value, unsigned width) {
    if (width == 0)
        return false;
    if (width >= 64)
        return true;
    const int64_t lo = -(int64_t(1) << (width - 1));
    const int64_t hi = (int64_t(1) << (width - 1)) - 1;
    return value >= lo && value <= hi;
}

BitVector encode_twos_complement(int64_t value, unsigned width) {
    if (width == 0 || width > BitVector::MAX_WIDTH)
        throw ArgumentError("encoding width must be in [1, 64], got " +
                            std::to_string(width));
    if (!fits_twos_complement(value, width))
        throw RangeError("value " + std::to_string(value) +
                         " is not representable in " + std::to_string(width) +
                         "-bit two's complement");
    return BitVector(static_cast<uint64_t>(value), width);
}

int64_t decode_twos_complement(const BitVector &bv) {
    const unsigned w = bv.width();
    if (w == 64)
        return static_cast<int64_t>(bv.pattern());
    const uint64_t sign = uint64_t(1) << (w - 1);
    const uint64_t p = bv.pattern();
    // Sign-extend through the xor/subtract identity.
    return static_cast<int64_t>(p ^ sign) - static_cast<int64_t>(sign);
}

double decode_ieee754_single(const BitVector &bv) {
    if (bv.width() != 32)
        throw DimensionError("IEEE-754 single precision needs 32 bits, got " +
                             std::to_string(bv.width()));
    const uint64_t p = bv.pattern();
    if (p == 0)
        return 0.0;
    const bool negative = (p >> 31) & 1;
    const unsigned exponent = unsigned((p >> 23) & 0xFF);
    const uint64_t fraction = p & 0x7FFFFF;
    if (exponent == 0)
        throw UnsupportedEncoding("denormal or negative-zero pattern " +
                                  bv.to_string());
    if (exponent == 0xFF)
        throw UnsupportedEncoding("infinity or NaN pattern " + bv.to_string());
    // 1.fraction scaled by 2^(exponent - 127); exact in double precision.
    const double significand =
        1.0 + std::ldexp(static_cast<double>(fraction), -23);
    const double magnitude = std::ldexp(significand, int(exponent) - 127);
    return negative ? -magnitude : magnitude;
}

unsigned hamming_weight(const BitVector &bv) {
    return unsigned(std::popcount(bv.pattern()));
}

unsigned hamming_distance(const BitVector &a, const BitVector &b) {
    return hamming_weight(a ^ b);
}

} // namespace qsca
