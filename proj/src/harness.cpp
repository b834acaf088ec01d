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

#include "qsca/harness.hpp"
#include "qsca/errors.hpp"
#include "qsca/leakage.hpp"
#include "qsca/parallel.hpp"
#include "qsca/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace qsca {

std::string_view to_string(AttackModelKind kind) {
    return kind == AttackModelKind::hamming_weight ? "hamming_weight"
                                                   : "profiled_stochastic";
}

AttackModelKind attack_model_from_string(std::string_view name) {
    if (name == "hamming_weight" || name == "hw")
        return AttackModelKind::hamming_weight;
    if (name == "profiled_stochastic" || name == "profiled")
        return AttackModelKind::profiled_stochastic;
    throw ArgumentError("unknown attack model '" + std::string(name) + "'");
}

std::string_view to_string(ExperimentTarget target) {
    switch (target) {
    case ExperimentTarget::weight:
        return "weight";
    case ExperimentTarget::bias:
        return "bias";
    case ExperimentTarget::network:
        return "network";
    }
    return "?";
}

ExperimentTarget experiment_target_from_string(std::string_view name) {
    for (auto t : {ExperimentTarget::weight, ExperimentTarget::bias,
                   ExperimentTarget::network})
        if (to_string(t) == name)
            return t;
    throw ArgumentError("unknown experiment target '" + std::string(name) +
                        "' (expected weight, bias or network)");
}

namespace {

struct PinnedScenario {
    double coeff_variance;
    AttackModelKind attack_model;
};

constexpr PinnedScenario PINNED[3] = {
    {0.09, AttackModelKind::hamming_weight},
    {1.0, AttackModelKind::hamming_weight},
    {1.0, AttackModelKind::profiled_stochastic},
};

LeakageModelSpec attacker_model(const ScenarioConfig &cfg,
                                const std::vector<double> &coefficients,
                                unsigned width) {
    if (cfg.attack_model == AttackModelKind::hamming_weight)
        return LeakageModelSpec::hamming_weight(width);
    return LeakageModelSpec::stochastic(coefficients);
}

using Clock = std::chrono::steady_clock;

std::optional<double> elapsed(const ScenarioConfig &cfg, Clock::time_point t0) {
    if (!cfg.record_duration)
        return std::nullopt;
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename Dist> auto draw(Dist dist, Rng &rng) { return dist(rng); }

} // namespace

ScenarioConfig ScenarioConfig::builtin(int id, ExperimentTarget target) {
    if (id < 1 || id > 3)
        throw ArgumentError("built-in scenarios are 1, 2 and 3, got " +
                            std::to_string(id));
    ScenarioConfig cfg;
    cfg.id = std::to_string(id);
    cfg.coeff_mean = 1.0;
    cfg.coeff_variance = PINNED[id - 1].coeff_variance;
    cfg.attack_model = PINNED[id - 1].attack_model;
    cfg.noise_variance = 0.5;
    switch (target) {
    case ExperimentTarget::weight:
        cfg.traces_per_attack = 100000;
        cfg.attack_count = 250;
        break;
    case ExperimentTarget::bias:
        cfg.traces_per_attack = 10000;
        cfg.attack_count = 100;
        cfg.bias_min = -32768;
        cfg.bias_max = 32767;
        break;
    case ExperimentTarget::network:
        cfg.traces_per_attack = 20000;
        cfg.repeats = 5;
        cfg.eval_count = 2000;
        cfg.bias_min = -2048;
        cfg.bias_max = 2047;
        break;
    }
    return cfg;
}

HypothesisSpace ScenarioConfig::weight_space() const {
    return HypothesisSpace::weights(include_minus_128);
}

HypothesisSpace ScenarioConfig::bias_space() const {
    return HypothesisSpace::range(bias_min, bias_max);
}

void ScenarioConfig::validate() const {
    if (id == "1" || id == "2" || id == "3") {
        const PinnedScenario &p = PINNED[id[0] - '1'];
        if (coeff_mean != 1.0 || coeff_variance != p.coeff_variance ||
            attack_model != p.attack_model)
            throw ArgumentError(
                "scenario " + id +
                " pins coeff_mean = 1, coeff_variance = " +
                (p.coeff_variance == 1.0 ? std::string("1") : std::string("0.09")) +
                " and attack_model = " + std::string(to_string(p.attack_model)) +
                "; use id \"custom\" to change them");
    }
    if (!(coeff_variance >= 0.0) || !std::isfinite(coeff_mean))
        throw ArgumentError("coefficient distribution needs a finite mean and "
                            "a variance >= 0");
    if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance))
        throw ArgumentError("noise variance must be finite and >= 0");
    if (traces_per_attack < 2)
        throw ArgumentError("traces_per_attack must be at least 2");
    if (attack_count == 0)
        throw ArgumentError("attack_count must be positive");
    if (repeats == 0)
        throw ArgumentError("repeats must be positive");
    if (eval_count == 0)
        throw ArgumentError("eval_count must be positive");
    if (bias_min > bias_max)
        throw ArgumentError("bias range is empty");
    if (bias_min < INT32_MIN / 2 || bias_max > INT32_MAX / 2)
        throw ArgumentError("bias range must stay within +-2^30");
    if (bias_fan_in == 0 || bias_fan_in > 4096)
        throw ArgumentError("bias_fan_in must be in [1, 4096]");
}

void summarize(RecoveryReport &report) {
    std::size_t hits = 0;
    double err = 0.0;
    for (const auto &r : report.per_attack) {
        hits += r.guessed_value == r.true_value;
        err += double(std::llabs(r.guessed_value - r.true_value));
    }
    const double n = double(report.per_attack.size());
    report.accuracy = n > 0 ? double(hits) / n : 0.0;
    report.average_error = n > 0 ? err / n : 0.0;
}

RecoveryReport run_weight_recovery_experiment(const ScenarioConfig &cfg) {
    cfg.validate();
    const auto t0 = Clock::now();
    const HypothesisSpace space = cfg.weight_space();
    RecoveryReport report;
    report.target = "weight";
    report.config = cfg;
    report.per_attack.resize(cfg.attack_count);
    parallel_for(cfg.attack_count, cfg.threads, [&](std::size_t a) {
        Rng coeff_rng = derive_stream(cfg.master_seed, a, StreamPurpose::coefficients);
        Rng secret_rng = derive_stream(cfg.master_seed, a, StreamPurpose::secret);
        Rng operand_rng = derive_stream(cfg.master_seed, a, StreamPurpose::operands);
        Rng noise_rng = derive_stream(cfg.master_seed, a, StreamPurpose::noise);

        const auto alpha = sample_coefficients(PRODUCT_WIDTH, cfg.coeff_mean,
                                               cfg.coeff_variance, coeff_rng);
        const int64_t w = space[draw(
            std::uniform_int_distribution<std::size_t>(0, space.size() - 1),
            secret_rng)];
        std::uniform_int_distribution<int> x_dist(ACTIVATION_MIN, ACTIVATION_MAX);
        std::vector<int32_t> xs(cfg.traces_per_attack);
        for (auto &x : xs)
            x = x_dist(operand_rng);

        const auto leakage = LeakageModelSpec::stochastic(alpha, cfg.noise_variance);
        const TraceSet ts = simulate_weight_traces(int(w), xs, leakage, noise_rng);
        CpaResult res = recover_weight(ts, space,
                                       attacker_model(cfg, alpha, PRODUCT_WIDTH));
        annotate_truth(res, space, w);
        report.per_attack[a] = {a,
                                w,
                                res.guessed_value,
                                res.guessed_abs_correlation(),
                                res.rank_of_true.value_or(0),
                                res.tie_break_used};
    });
    summarize(report);
    report.duration_seconds = elapsed(cfg, t0);
    return report;
}

RecoveryReport run_bias_recovery_experiment(const ScenarioConfig &cfg) {
    cfg.validate();
    const auto t0 = Clock::now();
    const HypothesisSpace space = cfg.bias_space();
    RecoveryReport report;
    report.target = "bias";
    report.config = cfg;
    report.per_attack.resize(cfg.attack_count);
    parallel_for(cfg.attack_count, cfg.threads, [&](std::size_t a) {
        Rng coeff_rng = derive_stream(cfg.master_seed, a, StreamPurpose::coefficients);
        Rng secret_rng = derive_stream(cfg.master_seed, a, StreamPurpose::secret);
        Rng weight_rng = derive_stream(cfg.master_seed, a, StreamPurpose::known_weights);
        Rng operand_rng = derive_stream(cfg.master_seed, a, StreamPurpose::operands);
        Rng noise_rng = derive_stream(cfg.master_seed, a, StreamPurpose::noise);

        const auto alpha = sample_coefficients(SUM_WIDTH, cfg.coeff_mean,
                                               cfg.coeff_variance, coeff_rng);
        const int64_t b = space[draw(
            std::uniform_int_distribution<std::size_t>(0, space.size() - 1),
            secret_rng)];
        // Known, already recovered weights: nonzero so the accumulators vary.
        std::uniform_int_distribution<int> w_dist(WEIGHT_MIN, WEIGHT_MAX - 1);
        std::vector<int64_t> weights(cfg.bias_fan_in);
        for (auto &w : weights) {
            const int v = w_dist(weight_rng);
            w = v >= 0 ? v + 1 : v;
        }
        std::uniform_int_distribution<int> x_dist(ACTIVATION_MIN, ACTIVATION_MAX);
        std::vector<int64_t> accs(cfg.traces_per_attack);
        for (auto &acc : accs) {
            acc = 0;
            for (int64_t w : weights)
                acc += w * x_dist(operand_rng);
        }

        const auto leakage = LeakageModelSpec::stochastic(alpha, cfg.noise_variance);
        const TraceSet ts = simulate_bias_traces(b, accs, leakage, noise_rng);
        CpaResult res =
            recover_bias(ts, space, attacker_model(cfg, alpha, SUM_WIDTH));
        annotate_truth(res, space, b);
        report.per_attack[a] = {a,
                                b,
                                res.guessed_value,
                                res.guessed_abs_correlation(),
                                res.rank_of_true.value_or(0),
                                res.tie_break_used};
    });
    summarize(report);
    report.duration_seconds = elapsed(cfg, t0);
    return report;
}

std::size_t top_class(const std::vector<double> &scores) {
    if (scores.empty())
        throw DimensionError("empty score vector");
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.size(); c++)
        if (scores[c] > scores[best])
            best = c;
    return best;
}

double top_k_metric(const std::vector<std::vector<double>> &scores,
                    const std::vector<std::size_t> &references, std::size_t k) {
    if (scores.size() != references.size())
        throw DimensionError("top-k: " + std::to_string(scores.size()) +
                             " score rows but " +
                             std::to_string(references.size()) + " references");
    if (scores.empty())
        throw DimensionError("top-k needs at least one row");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < scores.size(); i++) {
        const auto &row = scores[i];
        if (k == 0 || k > row.size())
            throw ArgumentError("k must be in [1, " + std::to_string(row.size()) +
                                "], got " + std::to_string(k));
        const std::size_t ref = references[i];
        if (ref >= row.size())
            throw DimensionError("reference class " + std::to_string(ref) +
                                 " outside " + std::to_string(row.size()) +
                                 " classes");
        std::size_t ahead = 0;
        for (std::size_t c = 0; c < row.size(); c++)
            if (row[c] > row[ref] || (row[c] == row[ref] && c < ref))
                ahead++;
        hits += ahead < k;
    }
    return 100.0 * double(hits) / double(scores.size());
}

std::vector<std::vector<double>> score_rows(const QuantizedModel &model,
                                            const std::vector<Tensor> &inputs,
                                            unsigned threads) {
    std::vector<std::vector<double>> rows(inputs.size());
    parallel_for(inputs.size(), threads, [&](std::size_t i) {
        const Tensor out = infer(model, inputs[i]);
        rows[i].assign(out.data.begin(), out.data.end());
    });
    return rows;
}

QuantizedModel desk_cnn(uint64_t seed) {
    Rng model_rng = derive_stream(seed, 0, StreamPurpose::model);
    const QuantizedModel raw =
        random_model(parse_model_spec(DESK_CNN_SPEC), model_rng);
    Rng input_rng = derive_stream(seed, 0, StreamPurpose::inputs);
    const auto calib = random_inputs(raw.input_shape(), 256, input_rng);
    const QuantizedModel calibrated = calibrate_requant_shifts(raw, calib);
    std::vector<Layer> layers = calibrated.layers();
    return QuantizedModel(calibrated.input_shape(), std::move(layers),
                          {{"name", "desk_cnn"},
                           {"seed", std::to_string(seed)},
                           {"spec", std::string(DESK_CNN_SPEC)}});
}

std::vector<Tensor> evaluation_inputs(const ScenarioConfig &cfg,
                                      const Shape &input_shape) {
    Rng rng = derive_stream(cfg.master_seed, 0, StreamPurpose::evaluation);
    return random_inputs(input_shape, cfg.eval_count, rng);
}

NetworkSimulation network_simulation(const ScenarioConfig &cfg,
                                     const Shape &input_shape,
                                     std::size_t repeat) {
    Rng input_rng = derive_stream(cfg.master_seed, repeat, StreamPurpose::inputs);
    Rng product_rng =
        derive_stream(cfg.master_seed, repeat, StreamPurpose::coefficients, 0);
    Rng sum_rng =
        derive_stream(cfg.master_seed, repeat, StreamPurpose::coefficients, 1);
    Rng seed_rng = derive_stream(cfg.master_seed, repeat, StreamPurpose::noise);

    auto inputs = random_inputs(input_shape, cfg.traces_per_attack, input_rng);
    const auto alpha_product = sample_coefficients(
        PRODUCT_WIDTH, cfg.coeff_mean, cfg.coeff_variance, product_rng);
    const auto alpha_sum = sample_coefficients(SUM_WIDTH, cfg.coeff_mean,
                                               cfg.coeff_variance, sum_rng);
    return {std::move(inputs),
            {LeakageModelSpec::stochastic(alpha_product, cfg.noise_variance),
             LeakageModelSpec::stochastic(alpha_sum, cfg.noise_variance),
             seed_rng()}};
}

AttackConfig attack_config(const ScenarioConfig &cfg,
                           const NetworkLeakage &leakage) {
    return {attacker_model(cfg, leakage.product.coefficients, PRODUCT_WIDTH),
            attacker_model(cfg, leakage.sum.coefficients, SUM_WIDTH),
            cfg.weight_space(), cfg.bias_space(), cfg.threads};
}

AgreementReport evaluate_recovery(
    const ScenarioConfig &cfg, const QuantizedModel &victim,
    const NetworkRecovery &recovery, const AttackConfig &attack,
    const std::vector<Tensor> &eval_inputs,
    const std::optional<std::vector<std::size_t>> &eval_labels,
    std::size_t repeat) {
    if (eval_inputs.empty())
        throw ArgumentError("network recovery needs evaluation inputs");
    if (eval_labels && eval_labels->size() != eval_inputs.size())
        throw DimensionError("one label per evaluation input is required");
    if (!(architecture_of(victim) == architecture_of(recovery.model)))
        throw DimensionError("recovered model does not match the victim's "
                             "architecture");

    AgreementReport report;
    report.config = cfg;
    report.repeat = repeat;
    std::size_t hits = 0, total = 0;
    double err_sum = 0.0;
    for (const LayerRecovery &lr : recovery.layers) {
        const Layer &truth = victim.layer(lr.layer_index);
        std::size_t layer_hits = 0;
        double layer_err = 0.0;
        auto record = [&](OperationKind op, std::size_t coord, int64_t t,
                          CpaResult res, const HypothesisSpace &space) {
            annotate_truth(res, space, t);
            report.per_attack.push_back(
                {{op, uint32_t(lr.layer_index), coord},
                 t,
                 res.guessed_value,
                 res.guessed_abs_correlation(),
                 res.rank_of_true.value_or(0),
                 res.tie_break_used});
            const double e = double(std::llabs(res.guessed_value - t));
            layer_hits += e == 0.0;
            layer_err += e;
        };
        LayerMatch m;
        m.layer = lr.layer_index;
        for (std::size_t w = 0; w < lr.weights.size(); w++)
            record(OperationKind::multiplication, w, truth.weights[w],
                   lr.weight_results[w], attack.weight_space);
        m.weight_match = double(layer_hits) / double(lr.weights.size());
        m.weight_average_error = layer_err / double(lr.weights.size());
        hits += layer_hits;
        err_sum += layer_err;
        layer_hits = 0;
        layer_err = 0.0;
        for (std::size_t b = 0; b < lr.biases.size(); b++)
            record(OperationKind::addition, b, truth.biases[b],
                   lr.bias_results[b], attack.bias_space);
        m.bias_match = double(layer_hits) / double(lr.biases.size());
        m.bias_average_error = layer_err / double(lr.biases.size());
        hits += layer_hits;
        err_sum += layer_err;
        total += lr.weights.size() + lr.biases.size();
        report.per_layer_match.push_back(m);
    }
    report.accuracy = total ? double(hits) / double(total) : 0.0;
    report.average_error = total ? err_sum / double(total) : 0.0;

    const auto victim_rows = score_rows(victim, eval_inputs, cfg.threads);
    const auto recovered_rows =
        score_rows(recovery.model, eval_inputs, cfg.threads);
    const std::size_t k5 = std::min<std::size_t>(5, victim_rows.front().size());
    if (eval_labels) {
        report.labeled = true;
        report.victim_top1 = top_k_metric(victim_rows, *eval_labels, 1);
        report.victim_top5 = top_k_metric(victim_rows, *eval_labels, k5);
        report.top1 = top_k_metric(recovered_rows, *eval_labels, 1);
        report.top5 = top_k_metric(recovered_rows, *eval_labels, k5);
    } else {
        std::vector<std::size_t> refs(victim_rows.size());
        for (std::size_t i = 0; i < refs.size(); i++)
            refs[i] = top_class(victim_rows[i]);
        report.top1 = top_k_metric(recovered_rows, refs, 1);
        report.top5 = top_k_metric(recovered_rows, refs, k5);
    }
    report.recovered = recovery.model;
    return report;
}

AgreementReport run_network_recovery(
    const ScenarioConfig &cfg, const QuantizedModel &victim,
    const std::vector<Tensor> &eval_inputs,
    const std::optional<std::vector<std::size_t>> &eval_labels,
    std::size_t repeat) {
    cfg.validate();
    if (eval_inputs.empty())
        throw ArgumentError("network recovery needs evaluation inputs");
    const auto t0 = Clock::now();
    NetworkSimulation sim = network_simulation(cfg, victim.input_shape(), repeat);
    const AttackConfig attack = attack_config(cfg, sim.leakage);
    const SimulatedArchive archive(victim, std::move(sim.inputs), sim.leakage);
    const NetworkRecovery rec = recover_network(archive, attack);
    AgreementReport report = evaluate_recovery(cfg, victim, rec, attack,
                                               eval_inputs, eval_labels, repeat);
    report.duration_seconds = elapsed(cfg, t0);
    return report;
}

} // namespace qsca
