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

#include "qsca/errors.hpp"
#include "qsca/harness.hpp"
#include "qsca/report_io.hpp"

#include <gtest/gtest.h>

using namespace qsca;

namespace {

ScenarioConfig small(ScenarioConfig cfg, std::size_t traces, std::size_t attacks) {
    cfg.traces_per_attack = traces;
    cfg.attack_count = attacks;
    return cfg;
}

ScenarioConfig noiseless_hw() {
    ScenarioConfig cfg;
    cfg.coeff_variance = 0.0;
    cfg.noise_variance = 0.0;
    cfg.attack_model = AttackModelKind::hamming_weight;
    return cfg;
}

} // namespace

TEST(TopK, Examples) {
    const std::vector<std::vector<double>> s{{1, 3, 2}, {2, 1, 3}};
    EXPECT_DOUBLE_EQ(top_k_metric(s, {0, 2}, 1), 50.0);
    // Row 0 ranks its label last, so only k = 3 covers both rows.
    EXPECT_DOUBLE_EQ(top_k_metric(s, {0, 2}, 2), 50.0);
    EXPECT_DOUBLE_EQ(top_k_metric(s, {0, 2}, 3), 100.0);
    EXPECT_DOUBLE_EQ(top_k_metric({{3, 1, 2}}, {0}, 1), 100.0);
}

TEST(TopK, TiesRankLowerClassFirst) {
    EXPECT_DOUBLE_EQ(top_k_metric({{5, 5, 5}}, {0}, 1), 100.0);
    EXPECT_DOUBLE_EQ(top_k_metric({{5, 5, 5}}, {1}, 1), 0.0);
    EXPECT_DOUBLE_EQ(top_k_metric({{5, 5, 5}}, {1}, 2), 100.0);
    EXPECT_EQ(top_class({1, 7, 7}), 1u);
}

TEST(TopK, Errors) {
    EXPECT_THROW(top_k_metric({{1, 2}}, {0, 1}, 1), DimensionError);
    EXPECT_THROW(top_k_metric({{1, 2}}, {0}, 0), ArgumentError);
    EXPECT_THROW(top_k_metric({{1, 2}}, {0}, 3), ArgumentError);
    EXPECT_THROW(top_k_metric({{1, 2}}, {2}, 1), DimensionError);
}

TEST(ScenarioConfig, BuiltinsPinModelPairs) {
    const auto s1 = ScenarioConfig::builtin(1, ExperimentTarget::weight);
    EXPECT_EQ(s1.coeff_variance, 0.09);
    EXPECT_EQ(s1.attack_model, AttackModelKind::hamming_weight);
    EXPECT_EQ(s1.traces_per_attack, 100000u);
    EXPECT_EQ(s1.attack_count, 250u);
    const auto s2 = ScenarioConfig::builtin(2, ExperimentTarget::weight);
    EXPECT_EQ(s2.coeff_variance, 1.0);
    EXPECT_EQ(s2.attack_model, AttackModelKind::hamming_weight);
    const auto s3 = ScenarioConfig::builtin(3, ExperimentTarget::bias);
    EXPECT_EQ(s3.coeff_variance, 1.0);
    EXPECT_EQ(s3.attack_model, AttackModelKind::profiled_stochastic);
    EXPECT_EQ(s3.bias_min, -32768);
    EXPECT_EQ(s3.bias_max, 32767);
    EXPECT_EQ(s3.traces_per_attack, 10000u);
    EXPECT_THROW(ScenarioConfig::builtin(4, ExperimentTarget::weight), ArgumentError);

    auto edited = s1;
    edited.coeff_variance = 1.0;
    EXPECT_THROW(edited.validate(), ArgumentError);
    edited = s2;
    edited.attack_model = AttackModelKind::profiled_stochastic;
    EXPECT_THROW(edited.validate(), ArgumentError);
    edited.id = "custom";
    EXPECT_NO_THROW(edited.validate());
}

TEST(WeightExperiment, NoiselessMatchedIsPerfect) {
    const auto r = run_weight_recovery_experiment(small(noiseless_hw(), 2000, 60));
    EXPECT_EQ(r.per_attack.size(), 60u);
    EXPECT_EQ(r.accuracy, 1.0);
    EXPECT_EQ(r.average_error, 0.0);
    for (const auto &a : r.per_attack)
        EXPECT_EQ(a.rank_of_true, 1u);
}

TEST(BiasExperiment, NoiselessMatchedIsPerfect) {
    auto cfg = small(noiseless_hw(), 2000, 30);
    cfg.bias_min = -4096;
    cfg.bias_max = 4095;
    const auto r = run_bias_recovery_experiment(cfg);
    EXPECT_EQ(r.accuracy, 1.0);
    EXPECT_EQ(r.average_error, 0.0);
}

TEST(Reports, AccuracyAndErrorAreConsistent) {
    for (int id : {1, 2}) {
        const auto r = run_weight_recovery_experiment(
            small(ScenarioConfig::builtin(id, ExperimentTarget::weight), 3000, 40));
        EXPECT_GE(r.accuracy, 0.0);
        EXPECT_LE(r.accuracy, 1.0);
        EXPECT_GE(r.average_error, 0.0);
        EXPECT_EQ(r.average_error == 0.0, r.accuracy == 1.0);
        EXPECT_EQ(r.per_attack.size(), 40u);
        double err = 0;
        for (const auto &a : r.per_attack)
            err += double(std::llabs(a.true_value - a.guessed_value));
        EXPECT_DOUBLE_EQ(r.average_error, err / 40.0);
    }
    RecoveryReport manual;
    manual.per_attack = {{0, 3, 3}, {1, 5, 2}};
    summarize(manual);
    EXPECT_EQ(manual.accuracy, 0.5);
    EXPECT_EQ(manual.average_error, 1.5);
}

TEST(Reports, ByteIdenticalAcrossThreadCounts) {
    auto cfg = small(ScenarioConfig::builtin(1, ExperimentTarget::weight), 5000, 24);
    const std::string one = report_to_json(run_weight_recovery_experiment(cfg)).dump();
    cfg.threads = 4;
    EXPECT_EQ(report_to_json(run_weight_recovery_experiment(cfg)).dump(), one);

    auto bias = small(ScenarioConfig::builtin(2, ExperimentTarget::bias), 2000, 12);
    bias.bias_min = -4096;
    bias.bias_max = 4095;
    const std::string b1 = report_to_json(run_bias_recovery_experiment(bias)).dump();
    bias.threads = 3;
    EXPECT_EQ(report_to_json(run_bias_recovery_experiment(bias)).dump(), b1);
}

TEST(Reports, SeedChangesOutcome) {
    auto cfg = small(ScenarioConfig::builtin(2, ExperimentTarget::weight), 2000, 20);
    const auto a = run_weight_recovery_experiment(cfg);
    cfg.master_seed = 2;
    const auto b = run_weight_recovery_experiment(cfg);
    bool differ = false;
    for (std::size_t i = 0; i < a.per_attack.size(); i++)
        differ |= a.per_attack[i].true_value != b.per_attack[i].true_value;
    EXPECT_TRUE(differ);
}

TEST(WeightExperiment, MoreTracesDoNotHurt) {
    auto cfg = ScenarioConfig::builtin(1, ExperimentTarget::weight);
    cfg.traces_per_attack = 1000;
    const auto small_m = run_weight_recovery_experiment(cfg);
    cfg.traces_per_attack = 100000;
    const auto large_m = run_weight_recovery_experiment(cfg);
    EXPECT_GE(large_m.accuracy, small_m.accuracy);
}

TEST(BiasExperiment, ProfiledBeatsHammingWeightAtVarianceOne) {
    auto hw = small(ScenarioConfig::builtin(2, ExperimentTarget::bias), 10000, 60);
    auto prof = small(ScenarioConfig::builtin(3, ExperimentTarget::bias), 10000, 60);
    for (auto *c : {&hw, &prof}) {
        c->bias_min = -4096;
        c->bias_max = 4095;
    }
    EXPECT_EQ(hw.master_seed, prof.master_seed);
    const auto a = run_bias_recovery_experiment(hw);
    const auto b = run_bias_recovery_experiment(prof);
    for (std::size_t i = 0; i < a.per_attack.size(); i++)
        ASSERT_EQ(a.per_attack[i].true_value, b.per_attack[i].true_value);
    EXPECT_GE(b.accuracy, a.accuracy);
}

TEST(NetworkRecovery, NoiselessMatchedAgreesFully) {
    Rng rng(1);
    const QuantizedModel victim = random_model(
        parse_model_spec("input:1x6x6,conv2d:1x2x3,relu,avgpool2d:2,flatten,"
                         "dense:8x6,dense:6x4"),
        rng);
    // Distinct bit coefficients keep ReLU-fed layers identifiable; plain
    // Hamming weight cannot separate w from 2w on non-negative operands.
    ScenarioConfig cfg;
    cfg.coeff_variance = 0.25;
    cfg.noise_variance = 0.0;
    cfg.attack_model = AttackModelKind::profiled_stochastic;
    cfg.traces_per_attack = 400;
    cfg.eval_count = 200;
    const auto eval = evaluation_inputs(cfg, victim.input_shape());
    const AgreementReport r = run_network_recovery(cfg, victim, eval);
    EXPECT_EQ(r.top1, 100.0);
    EXPECT_EQ(r.top5, 100.0);
    EXPECT_EQ(r.accuracy, 1.0);
    for (const auto &m : r.per_layer_match) {
        EXPECT_EQ(m.weight_match, 1.0);
        EXPECT_EQ(m.bias_match, 1.0);
    }
    ASSERT_TRUE(r.recovered);
    EXPECT_EQ(*r.recovered, victim);
}

TEST(NetworkRecovery, LabeledModeAndDeterminism) {
    Rng rng(2);
    const QuantizedModel victim =
        random_model(parse_model_spec("dense:6x5,relu,dense:5x7"), rng);
    auto cfg = ScenarioConfig::builtin(1, ExperimentTarget::network);
    cfg.traces_per_attack = 1500;
    cfg.eval_count = 300;
    const auto eval = evaluation_inputs(cfg, victim.input_shape());
    std::vector<std::size_t> labels(eval.size());
    for (std::size_t i = 0; i < labels.size(); i++)
        labels[i] = i % 7;
    const auto a = run_network_recovery(cfg, victim, eval, labels, 1);
    EXPECT_TRUE(a.labeled);
    ASSERT_TRUE(a.victim_top1);
    EXPECT_GE(a.top5, a.top1);
    EXPECT_GE(*a.victim_top5, *a.victim_top1);
    EXPECT_LE(a.top5, 100.0);
    cfg.threads = 3;
    const auto b = run_network_recovery(cfg, victim, eval, labels, 1);
    EXPECT_EQ(report_to_json(a).dump(), report_to_json(b).dump());
    EXPECT_THROW(run_network_recovery(cfg, victim, {}), ArgumentError);
}

TEST(ReportJson, Schema) {
    const auto r = run_weight_recovery_experiment(small(noiseless_hw(), 500, 3));
    const auto j = report_to_json(r);
    for (const char *key : {"format_version", "config", "per_attack", "accuracy",
                            "average_error", "duration_seconds"})
        EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_TRUE(j["duration_seconds"].is_null());
    EXPECT_EQ(j["per_attack"].size(), 3u);
    EXPECT_FALSE(j["config"].contains("threads"));
    EXPECT_EQ(config_from_json(j["config"]).master_seed, r.config.master_seed);

    auto timed = small(noiseless_hw(), 500, 2);
    timed.record_duration = true;
    EXPECT_TRUE(report_to_json(run_weight_recovery_experiment(timed))["duration_seconds"]
                    .is_number());
}

TEST(ReportJson, ConfigRoundTripAndUnknownKeys) {
    auto cfg = ScenarioConfig::builtin(3, ExperimentTarget::bias);
    cfg.master_seed = 987654321987654321ull;
    const auto back = config_from_json(config_to_json(cfg));
    EXPECT_EQ(config_to_json(back), config_to_json(cfg));
    EXPECT_THROW(config_from_json({{"seeed", 1}}), ArgumentError);
    EXPECT_THROW(config_from_json({{"attack_count", -1}}), ArgumentError);
    EXPECT_THROW(config_from_json({{"attack_model", "magic"}}), ArgumentError);
    EXPECT_EQ(config_from_json({{"id", 2}}).id, "2");
}

TEST(ReportJson, MergeFlattens) {
    const nlohmann::json a = {{"format_version", 1}, {"kind", "recovery"}, {"x", 1}};
    const nlohmann::json b = {{"format_version", 1}, {"kind", "recovery"}, {"x", 2}};
    const auto ab = merge_reports({a, b});
    EXPECT_EQ(ab["count"], 2);
    const auto abc = merge_reports({ab, a});
    EXPECT_EQ(abc["count"], 3);
    EXPECT_EQ(abc["reports"][1]["x"], 2);
    EXPECT_THROW(merge_reports({nlohmann::json::object()}), ArchiveError);
}

TEST(ReferenceConstants, FullScaleProtocols) {
    EXPECT_EQ(FULL_SCALE_REFERENCE[0].top1, 62.36);
    EXPECT_EQ(FULL_SCALE_REFERENCE[2].top5, 0.50);
    for (const auto &r : FULL_SCALE_REFERENCE)
        EXPECT_GE(r.top5, r.top1);
}
