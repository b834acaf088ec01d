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

#include <stdexcept>
#include <string>

namespace qsca {

// A value does not fit the requested encoding width.
class RangeError : public std::out_of_range {
  public:
    using std::out_of_range::out_of_range;
};

// Mismatched lengths or tensor shapes.
class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Invalid argument outside of shapes and ranges (bad config, bad layer...).
class ArgumentError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Integer arithmetic left its 32-bit domain.
class OverflowError : public std::overflow_error {
  public:
    using std::overflow_error::overflow_error;
};

// Bit pattern that the float decoder refuses (denormal, inf, NaN).
class UnsupportedEncoding : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

// Missing, truncated or malformed trace archive / model / report files.
class ArchiveError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace qsca
