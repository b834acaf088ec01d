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

#include "qsca/leakage.hpp"
#include "qsca/binrep.hpp"
#include "qsca/errors.hpp"

#include <cmath>
#include <limits>

namespace qsca {

std::string_view to_string(LeakageKind kind) {
    return kind == LeakageKind::hamming_weight ? "hamming_weight" : "stochastic";
}

LeakageKind leakage_kind_from_string(std::string_view name) {
    if (name == "hamming_weight")
        return LeakageKind::hamming_weight;
    if (name == "stochastic")
        return LeakageKind::stochastic;
    throw ArgumentError("unknown leakage model kind '" + std::string(name) + "'");
}

void LeakageModelSpec::validate() const {
    if (width == 0 || width > 64)
        throw ArgumentError("leakage width must be in [1, 64], got " +
                            std::to_string(width));
    if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance))
        throw ArgumentError("noise variance must be finite and >= 0");
    if (kind == LeakageKind::stochastic) {
        if (coefficients.size() != width)
            throw ArgumentError("stochastic model needs " +
                                std::to_string(width) + " coefficients, got " +
                                std::to_string(coefficients.size()));
        for (double a : coefficients)
            if (!std::isfinite(a))
                throw ArgumentError("stochastic coefficients must be finite");
    } else if (!coefficients.empty()) {
        throw ArgumentError("Hamming-weight model takes no coefficients");
    }
}

LeakageModelSpec LeakageModelSpec::hamming_weight(unsigned width,
                                                  double noise_variance) {
    LeakageModelSpec s{LeakageKind::hamming_weight, {}, noise_variance, width};
    s.validate();
    return s;
}

LeakageModelSpec LeakageModelSpec::stochastic(std::vector<double> coefficients,
                                              double noise_variance) {
    const unsigned w = unsigned(coefficients.size());
    LeakageModelSpec s{LeakageKind::stochastic, std::move(coefficients),
                       noise_variance, w};
    s.validate();
    return s;
}

LeakageModelSpec LeakageModelSpec::noiseless() const {
    LeakageModelSpec s = *this;
    s.noise_variance = 0.0;
    return s;
}

LeakageEvaluator::LeakageEvaluator(const LeakageModelSpec &spec)
    : hamming_(spec.kind == LeakageKind::hamming_weight), width_(spec.width),
      mask_(low_mask(spec.width)) {
    spec.validate();
    if (hamming_)
        return;
    tables_.resize((width_ + 7) / 8);
    for (std::size_t k = 0; k < tables_.size(); k++) {
        for (unsigned byte = 0; byte < 256; byte++) {
            double sum = 0.0;
            for (unsigned s = 0; s < 8; s++) {
                const unsigned bit = unsigned(8 * k) + s;
                if (bit < width_ && ((byte >> s) & 1))
                    sum += spec.coefficients[bit];
            }
            tables_[k][byte] = sum;
        }
    }
}

double LeakageEvaluator::operator()(int64_t value) const {
    if (!fits_twos_complement(value, width_))
        throw RangeError("value " + std::to_string(value) +
                         " is not representable in " + std::to_string(width_) +
                         "-bit two's complement");
    return of_pattern(static_cast<uint64_t>(value));
}

std::vector<double> sample_coefficients(unsigned n, double mean,
                                        double variance, Rng &rng) {
    if (n == 0)
        throw ArgumentError("need at least one coefficient");
    if (!(variance >= 0.0))
        throw ArgumentError("coefficient variance must be >= 0, got " +
                            std::to_string(variance));
    std::vector<double> out(n, mean);
    if (variance == 0.0)
        return out;
    std::normal_distribution<double> dist(mean, std::sqrt(variance));
    for (auto &a : out)
        a = dist(rng);
    return out;
}

double leak(int64_t value, const LeakageModelSpec &spec, Rng &rng) {
    const LeakageEvaluator eval(spec);
    const double clean = eval(value);
    if (spec.noise_variance == 0.0)
        return clean;
    std::normal_distribution<double> noise(0.0, std::sqrt(spec.noise_variance));
    return clean + noise(rng);
}

std::string_view to_string(OperationKind op) {
    return op == OperationKind::multiplication ? "multiplication" : "addition";
}

OperationKind operation_kind_from_string(std::string_view name) {
    if (name == "multiplication")
        return OperationKind::multiplication;
    if (name == "addition")
        return OperationKind::addition;
    throw ArgumentError("unknown operation kind '" + std::string(name) + "'");
}

std::string TargetId::to_string() const {
    return std::string(operation == OperationKind::multiplication ? "weight"
                                                                  : "bias") +
           "[layer " + std::to_string(layer) + ", " +
           std::to_string(coordinate) + "]";
}

void TraceSet::validate() const {
    if (samples.empty())
        throw ArgumentError("trace set " + target.to_string() + " is empty");
    if (operands.size() != samples.size())
        throw DimensionError("trace set " + target.to_string() + " has " +
                             std::to_string(operands.size()) + " operands but " +
                             std::to_string(samples.size()) + " samples");
    const unsigned expected = target.operation == OperationKind::multiplication
                                  ? PRODUCT_WIDTH
                                  : SUM_WIDTH;
    if (width != expected)
        throw ArgumentError("trace set " + target.to_string() + " has width " +
                            std::to_string(width) + ", expected " +
                            std::to_string(expected));
}

namespace {

template <typename Value>
std::vector<double> noisy_samples(std::span<const Value> values,
                                  const LeakageModelSpec &spec, Rng &rng) {
    const LeakageEvaluator eval(spec);
    std::vector<double> out(values.size());
    for (std::size_t j = 0; j < values.size(); j++)
        out[j] = eval(values[j]);
    if (spec.noise_variance > 0.0) {
        std::normal_distribution<double> noise(0.0,
                                               std::sqrt(spec.noise_variance));
        for (auto &s : out)
            s += noise(rng);
    }
    return out;
}

} // namespace

TraceSet simulate_weight_traces(int w, std::span<const int32_t> inputs,
                                const LeakageModelSpec &spec, Rng &rng) {
    spec.validate();
    if (spec.width < PRODUCT_WIDTH)
        throw ArgumentError("product leakage needs a width of at least 16");
    if (inputs.empty())
        throw ArgumentError("weight traces need at least one input");
    std::vector<int64_t> products(inputs.size());
    for (std::size_t j = 0; j < inputs.size(); j++)
        products[j] = int64_t(inputs[j]) * w;
    TraceSet ts;
    ts.target.operation = OperationKind::multiplication;
    ts.width = spec.width;
    ts.operands.assign(inputs.begin(), inputs.end());
    ts.samples = noisy_samples<int64_t>(products, spec, rng);
    return ts;
}

TraceSet simulate_bias_traces(int64_t b, std::span<const int64_t> accumulators,
                              const LeakageModelSpec &spec, Rng &rng) {
    spec.validate();
    if (spec.width != SUM_WIDTH)
        throw ArgumentError("bias leakage needs a 32-bit model");
    if (accumulators.empty())
        throw ArgumentError("bias traces need at least one accumulator");
    constexpr int64_t lo = std::numeric_limits<int32_t>::min();
    constexpr int64_t hi = std::numeric_limits<int32_t>::max();
    TraceSet ts;
    ts.target.operation = OperationKind::addition;
    ts.width = spec.width;
    ts.operands.reserve(accumulators.size());
    std::vector<int64_t> sums(accumulators.size());
    for (std::size_t j = 0; j < accumulators.size(); j++) {
        const int64_t acc = accumulators[j];
        const int64_t sum = acc + b;
        if (acc < lo || acc > hi || sum < lo || sum > hi)
            throw OverflowError("accumulator " + std::to_string(acc) +
                                " plus bias " + std::to_string(b) +
                                " leaves the int32 range");
        ts.operands.push_back(int32_t(acc));
        sums[j] = sum;
    }
    ts.samples = noisy_samples<int64_t>(sums, spec, rng);
    return ts;
}

} // namespace qsca
