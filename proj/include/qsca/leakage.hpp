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

#include "qsca/rng.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qsca {

/// Leakage width of int8 x int8 products.
inline constexpr unsigned PRODUCT_WIDTH = 16;
/// Leakage width of int32 accumulator + bias sums.
inline constexpr unsigned SUM_WIDTH = 32;

enum class LeakageKind { hamming_weight, stochastic };

std::string_view to_string(LeakageKind kind);
LeakageKind leakage_kind_from_string(std::string_view name);

/// L(v) = HW(v) + e, or L(v) = sum_s alpha_s * v_s + e with e ~ N(0, sigma^2)
/// where v is the `width`-bit two's complement pattern of the value and
/// coefficient s weighs bit s (bit 0 = LSB).
struct LeakageModelSpec {
    LeakageKind kind = LeakageKind::hamming_weight;
    std::vector<double> coefficients;
    double noise_variance = 0.0;
    unsigned width = PRODUCT_WIDTH;

    /// Throws ArgumentError on a broken invariant.
    void validate() const;

    static LeakageModelSpec hamming_weight(unsigned width,
                                           double noise_variance = 0.0);
    static LeakageModelSpec stochastic(std::vector<double> coefficients,
                                       double noise_variance = 0.0);
    /// Same model without noise, as used for hypothetical leakage.
    LeakageModelSpec noiseless() const;
};

/// Noiseless model value of a bit pattern. Stochastic models use per-byte
/// lookup tables, so evaluation costs width/8 additions.
class LeakageEvaluator {
  public:
    explicit LeakageEvaluator(const LeakageModelSpec &spec);

    unsigned width() const { return width_; }

    /// Throws RangeError when `value` does not fit the model width.
    double operator()(int64_t value) const;

    /// Uses the low `width` bits of `pattern`; no range check.
    double of_pattern(uint64_t pattern) const {
        pattern &= mask_;
        if (hamming_)
            return double(__builtin_popcountll(pattern));
        double sum = 0.0;
        for (std::size_t k = 0; k < tables_.size(); k++)
            sum += tables_[k][(pattern >> (8 * k)) & 0xFF];
        return sum;
    }

  private:
    bool hamming_;
    unsigned width_;
    uint64_t mask_;
    std::vector<std::array<double, 256>> tables_;
};

/// n draws from N(mean, variance). Throws ArgumentError for a negative
/// variance or n == 0.
std::vector<double> sample_coefficients(unsigned n, double mean,
                                        double variance, Rng &rng);

/// One noisy leakage sample of `value`.
double leak(int64_t value, const LeakageModelSpec &spec, Rng &rng);

enum class OperationKind : uint8_t { multiplication = 0, addition = 1 };

std::string_view to_string(OperationKind op);
OperationKind operation_kind_from_string(std::string_view name);

/// One attacked parameter: a weight (multiplication) or a bias (addition)
/// of a layer; `coordinate` is the flat row-major index.
struct TargetId {
    OperationKind operation = OperationKind::multiplication;
    uint32_t layer = 0;
    uint64_t coordinate = 0;

    auto operator<=>(const TargetId &) const = default;
    std::string to_string() const;
};

/// Known operands x_1..x_M and the matching leakage samples l_1..l_M of one
/// target. For multiplications the operand is the neuron input; for
/// additions it is the pre-bias accumulator.
struct TraceSet {
    TargetId target;
    unsigned width = PRODUCT_WIDTH;
    std::vector<int32_t> operands;
    std::vector<double> samples;

    std::size_t size() const { return samples.size(); }
    /// Throws DimensionError/ArgumentError on a broken invariant.
    void validate() const;
    bool operator==(const TraceSet &) const = default;
};

/// samples[j] = leak(inputs[j] * w). Requires a model width >= 16.
TraceSet simulate_weight_traces(int w, std::span<const int32_t> inputs,
                                const LeakageModelSpec &spec, Rng &rng);

/// samples[j] = leak(accumulators[j] + b). Requires a 32-bit model; throws
/// OverflowError when an accumulator or a sum leaves the int32 range.
TraceSet simulate_bias_traces(int64_t b, std::span<const int64_t> accumulators,
                              const LeakageModelSpec &spec, Rng &rng);

} // namespace qsca
