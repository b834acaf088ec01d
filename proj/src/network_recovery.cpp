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

#include "qsca/network_recovery.hpp"
#include "qsca/errors.hpp"
#include "qsca/parallel.hpp"

namespace qsca {

namespace {

void require_targets(const TraceProvider &archive, const Layer &layer,
                     std::size_t layer_index) {
    std::vector<std::string> missing;
    auto check = [&](OperationKind op, std::size_t count) {
        for (std::size_t c = 0; c < count; c++) {
            const TargetId t{op, uint32_t(layer_index), c};
            if (!archive.contains(t))
                missing.push_back(t.to_string());
        }
    };
    check(OperationKind::multiplication, layer.weight_count());
    check(OperationKind::addition, layer.output_units());
    if (missing.empty())
        return;
    std::string msg = "archive is missing " + std::to_string(missing.size()) +
                      " trace set(s):";
    for (const auto &m : missing)
        msg += " " + m;
    throw ArchiveError(msg);
}

TraceSet paired(TraceSet observed, std::vector<int32_t> operands) {
    if (operands.size() != observed.samples.size())
        throw ArchiveError("trace set " + observed.target.to_string() + " has " +
                           std::to_string(observed.samples.size()) +
                           " samples but the attacker computed " +
                           std::to_string(operands.size()) + " operands");
    observed.operands = std::move(operands);
    return observed;
}

std::vector<int32_t> narrow(const std::vector<int64_t> &values) {
    std::vector<int32_t> out(values.size());
    for (std::size_t i = 0; i < values.size(); i++) {
        if (values[i] < INT32_MIN || values[i] > INT32_MAX)
            throw OverflowError("accumulator leaves the int32 range");
        out[i] = int32_t(values[i]);
    }
    return out;
}

} // namespace

LayerRecovery recover_layer(const QuantizedModel &known, std::size_t layer_index,
                            const TraceProvider &archive,
                            const AttackConfig &config) {
    if (layer_index >= known.layers().size() ||
        !known.layer(layer_index).parameterized())
        throw ArgumentError("layer " + std::to_string(layer_index) +
                            " is not a dense or conv2d layer");
    if (config.weight_space.min() < WEIGHT_MIN ||
        config.weight_space.max() > WEIGHT_MAX)
        throw ArgumentError("network recovery needs weight candidates in "
                            "[-127, 127]");
    if (config.bias_space.min() < INT32_MIN || config.bias_space.max() > INT32_MAX)
        throw ArgumentError("bias candidates must fit int32");
    const Layer &layer = known.layer(layer_index);
    require_targets(archive, layer, layer_index);

    const LayerOperands ops = neuron_inputs(known, layer_index,
                                            archive.network_inputs(),
                                            config.threads);
    LayerRecovery out;
    out.layer_index = layer_index;
    out.weights.resize(layer.weight_count());
    out.biases.resize(layer.output_units());
    out.weight_results.resize(layer.weight_count());
    out.bias_results.resize(layer.output_units());

    parallel_for(layer.weight_count(), config.threads, [&](std::size_t w) {
        const TargetId t{OperationKind::multiplication, uint32_t(layer_index), w};
        const TraceSet ts = paired(archive.load(t), ops.operands(w));
        out.weight_results[w] =
            recover_weight(ts, config.weight_space, config.product_model);
        out.weights[w] = int8_t(out.weight_results[w].guessed_value);
    });
    parallel_for(layer.output_units(), config.threads, [&](std::size_t o) {
        const TargetId t{OperationKind::addition, uint32_t(layer_index), o};
        const TraceSet ts =
            paired(archive.load(t), narrow(ops.accumulators(o, out.weights)));
        out.bias_results[o] =
            recover_bias(ts, config.bias_space, config.sum_model);
        out.biases[o] = int32_t(out.bias_results[o].guessed_value);
    });
    return out;
}

NetworkRecovery recover_network(const TraceProvider &archive,
                                const AttackConfig &config) {
    NetworkRecovery result{archive.architecture(), {}};
    for (std::size_t k : result.model.parameterized_layers()) {
        LayerRecovery layer = recover_layer(result.model, k, archive, config);
        result.model =
            result.model.with_parameters(k, layer.weights, layer.biases);
        result.layers.push_back(std::move(layer));
    }
    return result;
}

} // namespace qsca
