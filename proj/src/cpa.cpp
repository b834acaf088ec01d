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

#include "qsca/cpa.hpp"
#include "qsca/binrep.hpp"
#include "qsca/errors.hpp"
#include "qsca/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qsca {

HypothesisSpace::HypothesisSpace(std::vector<int64_t> candidates)
    : candidates_(std::move(candidates)) {
    if (candidates_.empty())
        throw ArgumentError("hypothesis space must not be empty");
    std::vector<int64_t> sorted = candidates_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ArgumentError("hypothesis space contains duplicates");
    min_ = sorted.front();
    max_ = sorted.back();
    contiguous_ = sorted == candidates_ &&
                  uint64_t(max_ - min_) + 1 == candidates_.size();
}

HypothesisSpace HypothesisSpace::weights(bool include_minus_128) {
    return range(include_minus_128 ? -128 : -127, 127);
}

HypothesisSpace HypothesisSpace::range(int64_t lo, int64_t hi) {
    if (lo > hi)
        throw ArgumentError("empty hypothesis range [" + std::to_string(lo) +
                            ", " + std::to_string(hi) + "]");
    std::vector<int64_t> c(std::size_t(hi - lo + 1));
    std::iota(c.begin(), c.end(), lo);
    return HypothesisSpace(std::move(c));
}

std::optional<std::size_t> HypothesisSpace::index_of(int64_t value) const {
    if (contiguous_) {
        if (value < min_ || value > max_)
            return std::nullopt;
        return std::size_t(value - min_);
    }
    auto it = std::find(candidates_.begin(), candidates_.end(), value);
    if (it == candidates_.end())
        return std::nullopt;
    return std::size_t(it - candidates_.begin());
}

double CpaResult::guessed_abs_correlation() const {
    return correlations.empty() ? 0.0 : std::abs(correlations[guessed_index]);
}

double pearson(std::span<const double> h, std::span<const double> l) {
    if (h.size() != l.size())
        throw DimensionError("pearson: lengths " + std::to_string(h.size()) +
                             " and " + std::to_string(l.size()) + " differ");
    const std::size_t m = h.size();
    if (m < 2)
        throw ArgumentError("pearson needs at least two samples");
    double h_mean = 0.0, l_mean = 0.0;
    for (std::size_t j = 0; j < m; j++) {
        h_mean += h[j];
        l_mean += l[j];
    }
    h_mean /= double(m);
    l_mean /= double(m);
    double num = 0.0, hh = 0.0, ll = 0.0;
    for (std::size_t j = 0; j < m; j++) {
        const double dh = h[j] - h_mean, dl = l[j] - l_mean;
        num += dh * dl;
        hh += dh * dh;
        ll += dl * dl;
    }
    const bool h_const = std::all_of(h.begin(), h.end(),
                                     [&](double v) { return v == h[0]; });
    const bool l_const = std::all_of(l.begin(), l.end(),
                                     [&](double v) { return v == l[0]; });
    if (h_const || l_const || hh <= 0.0 || ll <= 0.0)
        return 0.0;
    return std::clamp(num / (std::sqrt(hh) * std::sqrt(ll)), -1.0, 1.0);
}

namespace {

inline int64_t combine(OperationKind op, int64_t candidate, int64_t operand) {
    return op == OperationKind::multiplication ? candidate * operand
                                               : candidate + operand;
}

void check_candidate_range(OperationKind op, int64_t candidate, int64_t lo,
                           int64_t hi, unsigned width) {
    const int64_t a = combine(op, candidate, lo);
    const int64_t b = combine(op, candidate, hi);
    if (!fits_twos_complement(a, width) || !fits_twos_complement(b, width))
        throw RangeError("hypothetical value for candidate " +
                         std::to_string(candidate) + " does not fit " +
                         std::to_string(width) + " bits");
}

// Observed leakage reduced to per-operand-value statistics.
struct OperandHistogram {
    std::vector<int64_t> values;   // distinct operands, ascending
    std::vector<double> counts;    // occurrences of each value
    std::vector<double> centered;  // sum of (l_j - mean(l)) per value
    double m = 0.0;
    double sum_l = 0.0;
    double sum_centered_sq = 0.0;
    bool observed_constant = false;
};

OperandHistogram build_histogram(const TraceSet &traces) {
    const std::size_t m = traces.samples.size();
    OperandHistogram hist;
    hist.m = double(m);
    for (double l : traces.samples)
        hist.sum_l += l;
    const double mean = hist.sum_l / double(m);
    hist.observed_constant =
        std::all_of(traces.samples.begin(), traces.samples.end(),
                    [&](double v) { return v == traces.samples[0]; });
    for (double l : traces.samples)
        hist.sum_centered_sq += (l - mean) * (l - mean);

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return traces.operands[a] < traces.operands[b];
    });
    for (std::size_t idx : order) {
        const int64_t x = traces.operands[idx];
        if (hist.values.empty() || hist.values.back() != x) {
            hist.values.push_back(x);
            hist.counts.push_back(0.0);
            hist.centered.push_back(0.0);
        }
        hist.counts.back() += 1.0;
        hist.centered.back() += traces.samples[idx] - mean;
    }
    return hist;
}

struct CandidateScore {
    double r = 0.0;
    double tie_metric = 0.0; // |sum_j (H_j - l_j)|
};

CandidateScore score_candidate(const OperandHistogram &hist,
                               const LeakageEvaluator &eval, OperationKind op,
                               int64_t candidate) {
    double sum_h = 0.0, sum_hh = 0.0, sum_hl = 0.0;
    bool constant = true;
    double first = 0.0;
    for (std::size_t k = 0; k < hist.values.size(); k++) {
        const double h = eval.of_pattern(
            static_cast<uint64_t>(combine(op, candidate, hist.values[k])));
        if (k == 0)
            first = h;
        else if (h != first)
            constant = false;
        const double n = hist.counts[k];
        sum_h += n * h;
        sum_hh += n * h * h;
        sum_hl += h * hist.centered[k];
    }
    CandidateScore s;
    s.tie_metric = std::abs(sum_h - hist.sum_l);
    const double var_h = sum_hh - sum_h * sum_h / hist.m;
    if (constant || hist.observed_constant || var_h <= 0.0 ||
        hist.sum_centered_sq <= 0.0)
        return s;
    s.r = std::clamp(sum_hl / std::sqrt(var_h * hist.sum_centered_sq), -1.0,
                     1.0);
    return s;
}

} // namespace

std::vector<double> hypothetical_leakage(int64_t candidate,
                                         std::span<const int32_t> operands,
                                         OperationKind operation,
                                         const LeakageModelSpec &attack_model) {
    const LeakageEvaluator eval(attack_model.noiseless());
    std::vector<double> out(operands.size());
    for (std::size_t j = 0; j < operands.size(); j++)
        out[j] = eval(combine(operation, candidate, operands[j]));
    return out;
}

CpaResult correlate(const TraceSet &traces, const HypothesisSpace &space,
                    const LeakageModelSpec &attack_model, unsigned threads) {
    traces.validate();
    if (traces.size() < 2)
        throw ArgumentError("CPA needs at least two traces");
    if (attack_model.width != traces.width)
        throw ArgumentError("attack model width " +
                            std::to_string(attack_model.width) +
                            " does not match trace width " +
                            std::to_string(traces.width));
    const LeakageEvaluator eval(attack_model.noiseless());
    const OperationKind op = traces.target.operation;
    const OperandHistogram hist = build_histogram(traces);
    const int64_t lo = hist.values.front(), hi = hist.values.back();
    for (int64_t c : {space.min(), space.max()})
        check_candidate_range(op, c, lo, hi, eval.width());

    const std::size_t n = space.size();
    std::vector<CandidateScore> scores(n);
    constexpr std::size_t CHUNK = 64;
    parallel_for((n + CHUNK - 1) / CHUNK, threads, [&](std::size_t chunk) {
        const std::size_t end = std::min(n, (chunk + 1) * CHUNK);
        for (std::size_t i = chunk * CHUNK; i < end; i++)
            scores[i] = score_candidate(hist, eval, op, space[i]);
    });

    CpaResult result;
    result.correlations.resize(n);
    double best = 0.0;
    for (std::size_t i = 0; i < n; i++) {
        result.correlations[i] = scores[i].r;
        best = std::max(best, std::abs(scores[i].r));
    }
    std::size_t tied = 0;
    bool have = false;
    for (std::size_t i = 0; i < n; i++) {
        if (std::abs(scores[i].r) < best - TIE_TOLERANCE)
            continue;
        tied++;
        if (!have || scores[i].tie_metric < scores[result.guessed_index].tie_metric) {
            result.guessed_index = i;
            have = true;
        }
    }
    result.tie_break_used = tied > 1;
    result.guessed_value = space[result.guessed_index];
    return result;
}

CpaResult recover_weight(const TraceSet &traces, const HypothesisSpace &space,
                         const LeakageModelSpec &attack_model, unsigned threads) {
    if (traces.target.operation != OperationKind::multiplication)
        throw ArgumentError("recover_weight needs multiplication traces");
    return correlate(traces, space, attack_model, threads);
}

CpaResult recover_bias(const TraceSet &traces, const HypothesisSpace &space,
                       const LeakageModelSpec &attack_model, unsigned threads) {
    if (traces.target.operation != OperationKind::addition)
        throw ArgumentError("recover_bias needs addition traces");
    return correlate(traces, space, attack_model, threads);
}

void annotate_truth(CpaResult &result, const HypothesisSpace &space,
                    int64_t true_value) {
    const auto idx = space.index_of(true_value);
    if (!idx) {
        result.rank_of_true.reset();
        return;
    }
    const double truth = std::abs(result.correlations[*idx]);
    std::size_t rank = 1;
    for (double r : result.correlations)
        if (std::abs(r) > truth + TIE_TOLERANCE)
            rank++;
    result.rank_of_true = rank;
}

} // namespace qsca
