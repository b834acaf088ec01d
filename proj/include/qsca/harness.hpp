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
#include "qsca/network_recovery.hpp"
#include "qsca/qnn.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qsca {

enum class AttackModelKind { hamming_weight, profiled_stochastic };
enum class ExperimentTarget { weight, bias, network };

std::string_view to_string(AttackModelKind kind);
AttackModelKind attack_model_from_string(std::string_view name);
std::string_view to_string(ExperimentTarget target);
ExperimentTarget experiment_target_from_string(std::string_view name);

/// Definition of one statistical experiment. Built-in ids "1", "2" and "3"
/// pin the coefficient distribution and the attacker model:
///   1: coefficients ~ N(1, 0.09), Hamming-weight attacker
///   2: coefficients ~ N(1, 1),    Hamming-weight attacker
///   3: coefficients ~ N(1, 1),    attacker knows the exact coefficients
struct ScenarioConfig {
    std::string id = "custom";
    double coeff_mean = 1.0;
    double coeff_variance = 0.09;
    double noise_variance = 0.5;
    AttackModelKind attack_model = AttackModelKind::hamming_weight;
    /// Traces per attack (weight/bias) or network inputs (network).
    std::size_t traces_per_attack = 100000;
    std::size_t attack_count = 250;
    bool include_minus_128 = false;
    int64_t bias_min = -32768;
    int64_t bias_max = 32767;
    /// Products summed into each accumulator of a standalone bias attack.
    /// A single product would leave low accumulator bits fixed whenever the
    /// known weight is even, which makes those bias bits unobservable.
    unsigned bias_fan_in = 16;
    std::size_t repeats = 5;
    std::size_t eval_count = 2000;
    uint64_t master_seed = 1;
    bool record_duration = false;
    /// Worker threads (0 = all cores). Never changes any result.
    unsigned threads = 1;

    /// Defaults for a built-in scenario id and experiment kind.
    static ScenarioConfig builtin(int id, ExperimentTarget target);

    HypothesisSpace weight_space() const;
    HypothesisSpace bias_space() const;
    /// Throws ArgumentError on inconsistent values, including edits to the
    /// pinned fields of a built-in id.
    void validate() const;
};

struct AttackRecord {
    std::size_t index = 0;
    int64_t true_value = 0;
    int64_t guessed_value = 0;
    double abs_correlation = 0.0;
    std::size_t rank_of_true = 0;
    bool tie_break_used = false;
};

struct RecoveryReport {
    std::string target; // "weight" or "bias"
    ScenarioConfig config;
    std::vector<AttackRecord> per_attack;
    double accuracy = 0.0;
    double average_error = 0.0;
    std::optional<double> duration_seconds;
};

struct ParameterRecord {
    TargetId target;
    int64_t true_value = 0;
    int64_t guessed_value = 0;
    double abs_correlation = 0.0;
    std::size_t rank_of_true = 0;
    bool tie_break_used = false;
};

struct LayerMatch {
    std::size_t layer = 0;
    double weight_match = 0.0; // fraction of exactly recovered weights
    double bias_match = 0.0;
    double weight_average_error = 0.0;
    double bias_average_error = 0.0;
};

struct AgreementReport {
    ScenarioConfig config;
    std::size_t repeat = 0;
    /// With labels: accuracies of both models. Without: top-k agreement of
    /// the recovered model with the victim's top-1 class.
    bool labeled = false;
    std::optional<double> victim_top1;
    std::optional<double> victim_top5;
    double top1 = 0.0;
    double top5 = 0.0;
    std::vector<LayerMatch> per_layer_match;
    std::vector<ParameterRecord> per_attack;
    double accuracy = 0.0;      // exact parameter matches over all layers
    double average_error = 0.0; // mean |true - guessed| over all parameters
    std::optional<double> duration_seconds;
    std::optional<QuantizedModel> recovered;
};

/// Accuracy/error aggregation shared by all reports; records are reduced in
/// index order.
void summarize(RecoveryReport &report);

RecoveryReport run_weight_recovery_experiment(const ScenarioConfig &cfg);
RecoveryReport run_bias_recovery_experiment(const ScenarioConfig &cfg);

/// Device-side setup of one network repeat: the random network inputs and
/// the secret leakage coefficients, all derived from the master seed.
struct NetworkSimulation {
    std::vector<Tensor> inputs;
    NetworkLeakage leakage;
};

NetworkSimulation network_simulation(const ScenarioConfig &cfg,
                                     const Shape &input_shape,
                                     std::size_t repeat = 0);

/// Attacker settings implied by the scenario. The profiled model takes its
/// coefficients from `leakage`.
AttackConfig attack_config(const ScenarioConfig &cfg,
                           const NetworkLeakage &leakage);

/// Compares a recovered network against the victim: exact parameter
/// matches, then top-1/top-5 on `eval_inputs`.
AgreementReport evaluate_recovery(
    const ScenarioConfig &cfg, const QuantizedModel &victim,
    const NetworkRecovery &recovery, const AttackConfig &attack,
    const std::vector<Tensor> &eval_inputs,
    const std::optional<std::vector<std::size_t>> &eval_labels,
    std::size_t repeat);

/// One repeat of full-network extraction: simulate the victim's traces for
/// `cfg.traces_per_attack` random inputs, recover layer by layer, then
/// compare the recovered model with the victim on `eval_inputs`.
AgreementReport run_network_recovery(
    const ScenarioConfig &cfg, const QuantizedModel &victim,
    const std::vector<Tensor> &eval_inputs,
    const std::optional<std::vector<std::size_t>> &eval_labels = std::nullopt,
    std::size_t repeat = 0);

/// Percentage of rows whose reference class is among the k highest
/// scores; equal scores rank the lower class index first.
double top_k_metric(const std::vector<std::vector<double>> &scores,
                    const std::vector<std::size_t> &references, std::size_t k);

/// Index of the highest score, lowest index on ties.
std::size_t top_class(const std::vector<double> &scores);

std::vector<std::vector<double>> score_rows(const QuantizedModel &model,
                                            const std::vector<Tensor> &inputs,
                                            unsigned threads = 1);

inline constexpr uint64_t DESK_CNN_SEED = 20240601;
inline constexpr std::string_view DESK_CNN_SPEC =
    "input:1x8x8,conv2d:1x8x3,relu,avgpool2d:2,flatten,dense:72x64,dense:64x10";

/// The bundled desk-scale victim: conv2d -> relu -> avgpool -> dense -> dense
/// with 5,402 parameters and requantization shifts calibrated on 256
/// random inputs.
QuantizedModel desk_cnn(uint64_t seed = DESK_CNN_SEED);

/// Evaluation inputs for network experiments, shared by every repeat.
std::vector<Tensor> evaluation_inputs(const ScenarioConfig &cfg,
                                      const Shape &input_shape);

/// Full-scale reference accuracies (%) of the quantized GoogleNet v1 victim
/// on ImageNet. Documentation only; nothing here reproduces them.
struct ReferenceAccuracy {
    std::string_view model;
    double top1;
    double top5;
};
inline constexpr std::array<ReferenceAccuracy, 4> FULL_SCALE_REFERENCE{{
    {"original", 62.36, 84.91},
    {"scenario 1", 61.36, 84.27},
    {"scenario 2", 0.10, 0.50},
    {"scenario 3", 59.29, 84.74},
}};

} // namespace qsca
