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
#include "qsca/errors.hpp"
#include "qsca/network_recovery.hpp"
#include "qsca/trace_archive.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace qsca;

namespace {

// Textbook two-pass Pearson, written independently of the library.
double reference_pearson(const std::vector<double> &x, const std::vector<double> &y) {
    const double n = double(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); i++) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); i++) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

std::vector<int32_t> random_operands(std::size_t n, Rng &rng, int lo = -128,
                                     int hi = 127) {
    std::uniform_int_distribution<int> d(lo, hi);
    std::vector<int32_t> xs(n);
    for (auto &x : xs)
        x = d(rng);
    return xs;
}

} // namespace

TEST(Pearson, Examples) {
    const std::vector<double> h{1, 2, 3, 4}, l{1, 2, 2, 5};
    // numpy.corrcoef: 6 / sqrt(45).
    EXPECT_NEAR(pearson(h, l), 0.894427190999916, 1e-12);
    EXPECT_NEAR(pearson(h, h), 1.0, 1e-12);
    const std::vector<double> anti{9, 8, 7, 6};
    EXPECT_NEAR(pearson(h, anti), -1.0, 1e-12);
}

TEST(Pearson, GuardsAndErrors) {
    const std::vector<double> c{3, 3, 3}, v{1, 2, 3};
    EXPECT_EQ(pearson(c, v), 0.0);
    EXPECT_EQ(pearson(v, c), 0.0);
    EXPECT_THROW(pearson(std::vector<double>{1, 2}, v), DimensionError);
    EXPECT_THROW(pearson(std::vector<double>{1}, std::vector<double>{1}),
                 ArgumentError);
}

TEST(Pearson, AffineInvariance) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0, 1);
    for (int t = 0; t < 200; t++) {
        std::vector<double> h(50), l(50), hs(50), hn(50);
        for (int i = 0; i < 50; i++) {
            h[i] = n(rng);
            l[i] = h[i] + n(rng);
        }
        const double a = std::exp(n(rng)), b = 10 * n(rng);
        for (int i = 0; i < 50; i++) {
            hs[i] = a * h[i] + b;
            hn[i] = -a * h[i] + b;
        }
        const double r = pearson(h, l);
        EXPECT_NEAR(pearson(hs, l), r, 1e-10);
        EXPECT_NEAR(pearson(hn, l), -r, 1e-10);
        EXPECT_NEAR(pearson(h, hs), 1.0, 1e-12);
        EXPECT_NEAR(r, reference_pearson(h, l), 1e-10);
    }
}

TEST(HypothesisSpace, Construction) {
    EXPECT_EQ(HypothesisSpace::weights().size(), 255u);
    EXPECT_EQ(HypothesisSpace::weights(true).size(), 256u);
    EXPECT_EQ(HypothesisSpace::weights().min(), -127);
    EXPECT_EQ(HypothesisSpace::range(-2, 2).candidates(),
              (std::vector<int64_t>{-2, -1, 0, 1, 2}));
    EXPECT_EQ(HypothesisSpace::range(-2, 2).index_of(1), 3u);
    EXPECT_FALSE(HypothesisSpace::range(-2, 2).index_of(3));
    EXPECT_THROW(HypothesisSpace({}), ArgumentError);
    EXPECT_THROW(HypothesisSpace({1, 2, 1}), ArgumentError);
}

TEST(HypotheticalLeakage, Examples) {
    const auto hw = LeakageModelSpec::hamming_weight(16);
    EXPECT_EQ(hypothetical_leakage(3, std::vector<int32_t>{1, 2},
                                   OperationKind::multiplication, hw),
              (std::vector<double>{2, 2}));
    EXPECT_EQ(hypothetical_leakage(0, std::vector<int32_t>{5, -7, 100},
                                   OperationKind::multiplication, hw),
              (std::vector<double>{0, 0, 0}));
    EXPECT_EQ(hypothetical_leakage(-1, std::vector<int32_t>{0},
                                   OperationKind::addition,
                                   LeakageModelSpec::hamming_weight(32)),
              std::vector<double>{32});
    EXPECT_THROW(hypothetical_leakage(1 << 20, std::vector<int32_t>{1},
                                      OperationKind::multiplication, hw),
                 RangeError);
}

TEST(HypotheticalLeakage, ProfiledModelMatchesNoiselessSimulation) {
    Rng rng(3);
    const auto alpha = sample_coefficients(16, 1.0, 1.0, rng);
    const auto spec = LeakageModelSpec::stochastic(alpha);
    const auto xs = random_operands(300, rng);
    const auto ts = simulate_weight_traces(-77, xs, spec, rng);
    EXPECT_EQ(hypothetical_leakage(-77, xs, OperationKind::multiplication, spec),
              ts.samples);
}

TEST(RecoverWeight, NoiselessFive) {
    // Signed operands: with x >= 0 only, HW(w x) == HW(2w x) and the
    // doubled candidates would tie.
    Rng rng(4);
    std::vector<int32_t> xs;
    for (int32_t x : random_operands(400, rng))
        if (x != 0 && xs.size() < 100)
            xs.push_back(x);
    const auto hw = LeakageModelSpec::hamming_weight(16);
    const auto ts = simulate_weight_traces(5, xs, hw, rng);
    const auto r = recover_weight(ts, HypothesisSpace::weights(), hw);
    EXPECT_EQ(r.guessed_value, 5);
    // Exhaustive: no other candidate reaches |r| = 1.
    const auto space = HypothesisSpace::weights();
    for (std::size_t i = 0; i < space.size(); i++)
        if (space[i] != 5)
            EXPECT_LT(std::abs(r.correlations[i]), 1.0 - 1e-9) << space[i];
}

TEST(RecoverWeight, NoiselessZeroUsesTieBreak) {
    Rng rng(5);
    const auto xs = random_operands(100, rng, 1, 127);
    const auto hw = LeakageModelSpec::hamming_weight(16);
    const auto ts = simulate_weight_traces(0, xs, hw, rng);
    const auto r = recover_weight(ts, HypothesisSpace::weights(), hw);
    for (double c : r.correlations)
        EXPECT_EQ(c, 0.0);
    EXPECT_EQ(r.guessed_value, 0);
    EXPECT_TRUE(r.tie_break_used);
}

TEST(RecoverWeight, NoiselessEveryCandidate) {
    for (bool profiled : {false, true}) {
        Rng rng(6);
        const auto model = profiled
                               ? LeakageModelSpec::stochastic(
                                     sample_coefficients(16, 1.0, 1.0, rng))
                               : LeakageModelSpec::hamming_weight(16);
        const auto space = HypothesisSpace::weights();
        for (int set = 0; set < 20; set++) {
            const auto xs = random_operands(100, rng);
            for (int64_t w : space.candidates()) {
                const auto ts = simulate_weight_traces(int(w), xs, model, rng);
                ASSERT_EQ(recover_weight(ts, space, model).guessed_value, w)
                    << "profiled=" << profiled << " set " << set;
            }
        }
    }
}

TEST(RecoverWeight, KindChecks) {
    TraceSet ts;
    ts.target.operation = OperationKind::addition;
    ts.width = 32;
    ts.operands = {1, 2};
    ts.samples = {1, 2};
    EXPECT_THROW(recover_weight(ts, HypothesisSpace::weights(),
                                LeakageModelSpec::hamming_weight(32)),
                 ArgumentError);
    ts.target.operation = OperationKind::multiplication;
    ts.width = 16;
    EXPECT_THROW(recover_bias(ts, HypothesisSpace::range(0, 3),
                              LeakageModelSpec::hamming_weight(16)),
                 ArgumentError);
    EXPECT_THROW(recover_weight(ts, HypothesisSpace::weights(),
                                LeakageModelSpec::hamming_weight(32)),
                 ArgumentError);
}

TEST(RecoverBias, NoiselessAnyBias) {
    Rng rng(7);
    std::uniform_int_distribution<int64_t> acc_d(-20000, 20000);
    const auto hw = LeakageModelSpec::hamming_weight(32);
    const auto space = HypothesisSpace::range(-300, 300);
    std::vector<int64_t> accs(100);
    for (auto &a : accs)
        a = acc_d(rng);
    for (int64_t b = -300; b <= 300; b += 7) {
        const auto ts = simulate_bias_traces(b, accs, hw, rng);
        EXPECT_EQ(recover_bias(ts, space, hw).guessed_value, b);
    }
}

TEST(Correlate, MatchesBatchComputation) {
    Rng rng(8);
    const auto alpha = sample_coefficients(16, 1.0, 0.09, rng);
    const auto leak_model = LeakageModelSpec::stochastic(alpha, 0.5);
    const auto xs = random_operands(3000, rng);
    const auto ts = simulate_weight_traces(-45, xs, leak_model, rng);
    for (const auto &attack :
         {LeakageModelSpec::hamming_weight(16), LeakageModelSpec::stochastic(alpha)}) {
        const auto space = HypothesisSpace::weights(true);
        const auto r = correlate(ts, space, attack);
        for (std::size_t i = 0; i < space.size(); i++) {
            const auto h = hypothetical_leakage(space[i], xs,
                                                OperationKind::multiplication, attack);
            ASSERT_NEAR(r.correlations[i], pearson(h, ts.samples), 1e-10) << space[i];
        }
    }
}

TEST(Correlate, ThreadCountDoesNotChangeResults) {
    Rng rng(9);
    const auto xs = random_operands(5000, rng);
    const auto ts = simulate_weight_traces(
        33, xs, LeakageModelSpec::hamming_weight(16, 0.5), rng);
    const auto a = correlate(ts, HypothesisSpace::weights(),
                             LeakageModelSpec::hamming_weight(16), 1);
    for (unsigned t : {2u, 3u, 8u}) {
        const auto b = correlate(ts, HypothesisSpace::weights(),
                                 LeakageModelSpec::hamming_weight(16), t);
        EXPECT_EQ(a.correlations, b.correlations);
        EXPECT_EQ(a.guessed_value, b.guessed_value);
    }
}

TEST(Correlate, GuessInvariantUnderPositiveRescaling) {
    Rng rng(10);
    const auto xs = random_operands(2000, rng);
    auto ts = simulate_weight_traces(
        -19, xs, LeakageModelSpec::stochastic(sample_coefficients(16, 1, 1, rng), 0.5),
        rng);
    const auto hw = LeakageModelSpec::hamming_weight(16);
    const auto before = correlate(ts, HypothesisSpace::weights(), hw);
    for (auto &s : ts.samples)
        s = 3.5 * s - 12.0;
    const auto after = correlate(ts, HypothesisSpace::weights(), hw);
    EXPECT_EQ(before.guessed_value, after.guessed_value);
    for (std::size_t i = 0; i < before.correlations.size(); i++)
        EXPECT_NEAR(before.correlations[i], after.correlations[i], 1e-10);
}

TEST(Correlate, ResultInvariants) {
    Rng rng(11);
    const auto xs = random_operands(500, rng);
    const auto ts = simulate_weight_traces(
        70, xs, LeakageModelSpec::hamming_weight(16, 1.0), rng);
    auto r = correlate(ts, HypothesisSpace::weights(), LeakageModelSpec::hamming_weight(16));
    for (double c : r.correlations) {
        EXPECT_LE(c, 1.0);
        EXPECT_GE(c, -1.0);
    }
    EXPECT_TRUE(HypothesisSpace::weights().index_of(r.guessed_value));
    annotate_truth(r, HypothesisSpace::weights(), 70);
    ASSERT_TRUE(r.rank_of_true);
    EXPECT_GE(*r.rank_of_true, 1u);
    annotate_truth(r, HypothesisSpace::weights(), 500);
    EXPECT_FALSE(r.rank_of_true);
}

TEST(Correlate, MeanRankImprovesWithMoreTraces) {
    // Scenario-1 leakage, HW attacker.
    double rank_small = 0, rank_large = 0;
    const auto space = HypothesisSpace::weights();
    for (uint64_t a = 0; a < 100; a++) {
        Rng rng = derive_stream(5, a, StreamPurpose::coefficients);
        const auto spec =
            LeakageModelSpec::stochastic(sample_coefficients(16, 1.0, 0.09, rng), 0.5);
        const int64_t w = space[std::uniform_int_distribution<std::size_t>(0, 254)(rng)];
        // Matched traces: the small set is a prefix of the large one.
        const auto xs = random_operands(10000, rng);
        const TraceSet full = simulate_weight_traces(int(w), xs, spec, rng);
        for (std::size_t m : {1000u, 10000u}) {
            TraceSet ts = full;
            ts.operands.resize(m);
            ts.samples.resize(m);
            auto r = recover_weight(ts, space, LeakageModelSpec::hamming_weight(16));
            annotate_truth(r, space, w);
            (m == 1000 ? rank_small : rank_large) += double(*r.rank_of_true);
        }
    }
    // Ranks are near 1 by M = 1000; beyond that the HW attacker converges
    // to whatever the mismatched coefficients favour, so this may not hold.
    EXPECT_LE(rank_large, rank_small);
}

namespace {

QuantizedModel two_layer_toy(uint64_t seed) {
    Rng rng(seed);
    return random_model(parse_model_spec("dense:8x6,dense:6x4"), rng);
}

std::vector<Tensor> toy_inputs(const QuantizedModel &m, std::size_t n, uint64_t seed) {
    Rng rng(seed);
    return random_inputs(m.input_shape(), n, rng);
}

} // namespace

TEST(RecoverLayer, NoiselessLayerZeroIsExact) {
    const QuantizedModel m = two_layer_toy(1);
    const NetworkLeakage clean{LeakageModelSpec::hamming_weight(16),
                               LeakageModelSpec::hamming_weight(32), 0};
    const SimulatedArchive archive(m, toy_inputs(m, 200, 2), clean);
    const LayerRecovery rec = recover_layer(archive.architecture(), 0, archive, {});
    EXPECT_EQ(rec.weights, m.layer(0).weights);
    EXPECT_EQ(rec.biases, m.layer(0).biases);
}

TEST(RecoverLayer, ExactPrefixGivesSingleWeightStatistics) {
    const QuantizedModel m = two_layer_toy(3);
    const auto inputs = toy_inputs(m, 2000, 4);
    Rng crng(5);
    const auto alpha = sample_coefficients(16, 1.0, 0.09, crng);
    const NetworkLeakage leakage{LeakageModelSpec::stochastic(alpha, 0.5),
                                 LeakageModelSpec::hamming_weight(32, 0.5), 6};
    const SimulatedArchive archive(m, inputs, leakage);
    AttackConfig cfg;
    const LayerRecovery rec = recover_layer(m, 1, archive, cfg);
    const LayerOperands truth = neuron_inputs(m, 1, inputs);
    for (std::size_t w = 0; w < truth.weight_count(); w++) {
        const TraceSet ts = archive.load({OperationKind::multiplication, 1, w});
        ASSERT_EQ(ts.operands, truth.operands(w));
        const CpaResult single = recover_weight(ts, cfg.weight_space, cfg.product_model);
        EXPECT_EQ(rec.weight_results[w].correlations, single.correlations);
        EXPECT_EQ(rec.weights[w], single.guessed_value);
    }
}

TEST(RecoverLayer, CorruptPrefixDegradesNextLayer) {
    const QuantizedModel m = two_layer_toy(7);
    const NetworkLeakage clean{LeakageModelSpec::hamming_weight(16),
                               LeakageModelSpec::hamming_weight(32), 0};
    std::size_t exact_hits = 0, corrupt_hits = 0;
    for (uint64_t rep = 0; rep < 50; rep++) {
        const SimulatedArchive archive(m, toy_inputs(m, 300, 100 + rep), clean);
        auto w0 = m.layer(0).weights;
        w0[rep % w0.size()] = int8_t(w0[rep % w0.size()] > 0 ? -100 : 100);
        const QuantizedModel corrupt =
            m.with_parameters(0, std::move(w0), m.layer(0).biases);
        const auto good = recover_layer(m, 1, archive, {});
        const auto bad = recover_layer(corrupt, 1, archive, {});
        for (std::size_t w = 0; w < good.weights.size(); w++) {
            exact_hits += good.weights[w] == m.layer(1).weights[w];
            corrupt_hits += bad.weights[w] == m.layer(1).weights[w];
        }
    }
    EXPECT_LT(corrupt_hits, exact_hits);
}

TEST(RecoverNetwork, NoiselessMatchedStochasticIsParameterExact) {
    Rng rng(12);
    const QuantizedModel m = random_model(
        parse_model_spec("input:1x6x6,conv2d:1x2x3/pad=1,relu,avgpool2d:2,"
                         "flatten,dense:18x6,dense:6x3"),
        rng);
    const NetworkLeakage clean{
        LeakageModelSpec::stochastic(sample_coefficients(16, 1.0, 1.0, rng)),
        LeakageModelSpec::stochastic(sample_coefficients(32, 1.0, 1.0, rng)), 0};
    const SimulatedArchive archive(m, toy_inputs(m, 500, 13), clean);
    AttackConfig cfg;
    cfg.product_model = clean.product;
    cfg.sum_model = clean.sum;
    const NetworkRecovery rec = recover_network(archive, cfg);
    EXPECT_EQ(rec.model, m);
}

TEST(RecoverNetwork, NoiselessHammingWeightIsExactOnSignedOperands) {
    // Without a ReLU every layer sees signed operands.
    const QuantizedModel m = two_layer_toy(14);
    const NetworkLeakage clean{LeakageModelSpec::hamming_weight(16),
                               LeakageModelSpec::hamming_weight(32), 0};
    const SimulatedArchive archive(m, toy_inputs(m, 500, 15), clean);
    EXPECT_EQ(recover_network(archive, {}).model, m);
}

TEST(RecoverNetwork, HammingWeightCannotSeparateDoublesOnNonNegativeOperands) {
    // HW(w * x) == HW(2w * x) whenever w * x >= 0 fits the width, so the
    // Hamming-weight attacker ties a positive weight with its doubles.
    Rng rng(16);
    const auto xs = random_operands(500, rng, 0, 127);
    const auto hw = LeakageModelSpec::hamming_weight(16);
    const auto ts = simulate_weight_traces(40, xs, hw, rng);
    const auto space = HypothesisSpace::weights();
    const auto r = recover_weight(ts, space, hw);
    EXPECT_TRUE(r.tie_break_used);
    for (int64_t w : {5, 10, 20, 40, 80})
        EXPECT_NEAR(r.correlations[*space.index_of(w)], 1.0, 1e-12);
    EXPECT_EQ(r.guessed_value, 5);
}
