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

#include "qsca/leakage.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace qsca {

/// |r| values this close to the maximum count as tied.
inline constexpr double TIE_TOLERANCE = 1e-12;

/// Ordered, duplicate-free list of candidate secret values.
class HypothesisSpace {
  public:
    explicit HypothesisSpace(std::vector<int64_t> candidates);

    /// -127..127, or -128..127 with `include_minus_128`.
    static HypothesisSpace weights(bool include_minus_128 = false);
    /// Every integer in [lo, hi].
    static HypothesisSpace range(int64_t lo, int64_t hi);

    const std::vector<int64_t> &candidates() const { return candidates_; }
    std::size_t size() const { return candidates_.size(); }
    int64_t operator[](std::size_t i) const { return candidates_[i]; }
    std::optional<std::size_t> index_of(int64_t value) const;
    int64_t min() const { return min_; }
    int64_t max() const { return max_; }

  private:
    std::vector<int64_t> candidates_;
    int64_t min_, max_;
    bool contiguous_;
};

struct CpaResult {
    /// r_i for every candidate, aligned with the hypothesis space.
    std::vector<double> correlations;
    std::size_t guessed_index = 0;
    int64_t guessed_value = 0;
    /// More than one candidate reached the maximal |r|.
    bool tie_break_used = false;
    /// 1-based rank of the true value by |r|, filled by annotate_truth.
    std::optional<std::size_t> rank_of_true;

    double guessed_abs_correlation() const;
};

/// Pearson correlation of two equal-length vectors (two-pass). Returns 0
/// when either vector is constant.
double pearson(std::span<const double> hypothetical,
               std::span<const double> observed);

/// Noiseless attacker-model leakage of candidate * x (multiplication) or
/// candidate + x (addition) for every operand.
std::vector<double> hypothetical_leakage(int64_t candidate,
                                         std::span<const int32_t> operands,
                                         OperationKind operation,
                                         const LeakageModelSpec &attack_model);

/// Correlates every candidate of `space` against the observed samples and
/// picks argmax |r_i|; ties (within TIE_TOLERANCE) go to the smallest
/// |sum_j (H_ij - l_j)|, then to the earliest candidate.
///
/// Correlations come from sufficient statistics over the distinct operand
/// values, so the cost is O(M log M + N * distinct operands). Results are
/// bit-identical for any `threads`.
CpaResult correlate(const TraceSet &traces, const HypothesisSpace &space,
                    const LeakageModelSpec &attack_model, unsigned threads = 1);

/// Multiplication target; throws ArgumentError for addition traces.
CpaResult recover_weight(const TraceSet &traces, const HypothesisSpace &space,
                         const LeakageModelSpec &attack_model,
                         unsigned threads = 1);

/// Addition target; throws ArgumentError for multiplication traces.
CpaResult recover_bias(const TraceSet &traces, const HypothesisSpace &space,
                       const LeakageModelSpec &attack_model,
                       unsigned threads = 1);

/// Sets rank_of_true: 1 + number of candidates whose |r| exceeds the true
/// candidate's by more than TIE_TOLERANCE. Leaves it empty when the true
/// value is outside the space.
void annotate_truth(CpaResult &result, const HypothesisSpace &space,
                    int64_t true_value);

} // namespace qsca
