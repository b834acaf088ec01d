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

#include "qsca/cpa.hpp"
#include "qsca/qnn.hpp"
#include "qsca/trace_archive.hpp"

namespace qsca {

/// How the attacker models leakage and which values it enumerates.
struct AttackConfig {
    LeakageModelSpec product_model = LeakageModelSpec::hamming_weight(PRODUCT_WIDTH);
    LeakageModelSpec sum_model = LeakageModelSpec::hamming_weight(SUM_WIDTH);
    HypothesisSpace weight_space = HypothesisSpace::weights();
    HypothesisSpace bias_space = HypothesisSpace::range(-2048, 2047);
    unsigned threads = 1;
};

struct LayerRecovery {
    std::size_t layer_index = 0;
    std::vector<int8_t> weights;
    std::vector<int32_t> biases;
    std::vector<CpaResult> weight_results;
    std::vector<CpaResult> bias_results;
};

struct NetworkRecovery {
    QuantizedModel model;
    std::vector<LayerRecovery> layers;
};

/// Recovers one parameterized layer. `known` must hold correct (or
/// previously recovered) parameters for every earlier layer; its own values
/// for `layer_index` are ignored. Weights are attacked with operands that
/// `neuron_inputs` computes from `known`; biases with accumulators computed
/// from the freshly recovered weights. Throws ArchiveError listing every
/// missing trace set of the layer.
LayerRecovery recover_layer(const QuantizedModel &known, std::size_t layer_index,
                            const TraceProvider &archive,
                            const AttackConfig &config);

/// Recovers all parameterized layers front to back, starting from the
/// archive's architecture.
NetworkRecovery recover_network(const TraceProvider &archive,
                                const AttackConfig &config);

} // namespace qsca
