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

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qsca {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape &shape);
std::string shape_to_string(const Shape &shape);

enum class LayerKind { dense, conv2d, relu, avgpool2d, flatten };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

inline constexpr int WEIGHT_MIN = -127;
inline constexpr int WEIGHT_MAX = 127;
inline constexpr int ACTIVATION_MIN = -128;
inline constexpr int ACTIVATION_MAX = 127;

/// One layer of a quantized network.
///
/// `shape` holds the parameter geometry: {out, in} for dense,
/// {out_channels, in_channels, kernel_h, kernel_w} for conv2d, {k} for
/// avgpool2d (a k x k window with stride k) and nothing for relu/flatten.
/// Weights are stored row-major over `shape`; biases hold one entry per
/// output neuron or channel.
struct Layer {
    LayerKind kind = LayerKind::relu;
    Shape shape;
    unsigned stride = 1;
    unsigned padding = 0;
    unsigned requant_shift = 0;
    std::vector<int8_t> weights;
    std::vector<int32_t> biases;

    bool parameterized() const {
        return kind == LayerKind::dense || kind == LayerKind::conv2d;
    }
    /// Neurons (dense) or channels (conv2d); 0 for parameterless layers.
    std::size_t output_units() const;
    /// Multiplications feeding one output value.
    std::size_t fan_in() const;
    std::size_t weight_count() const;

    bool operator==(const Layer &) const = default;
};

/// Integer tensor. Values between layers stay in the int8 domain; the
/// score layer produces full int32 values.
struct Tensor {
    Shape shape;
    std::vector<int32_t> data;

    bool operator==(const Tensor &) const = default;
};

/// Layered int8 network with int32 biases, immutable after construction.
class QuantizedModel {
  public:
    /// Validates every layer invariant and shape transition; throws
    /// DimensionError / ArgumentError / RangeError on violations.
    QuantizedModel(Shape input_shape, std::vector<Layer> layers,
                   std::map<std::string, std::string> metadata = {});

    const Shape &input_shape() const { return input_shape_; }
    const std::vector<Layer> &layers() const { return layers_; }
    const Layer &layer(std::size_t index) const { return layers_.at(index); }
    const std::map<std::string, std::string> &metadata() const {
        return metadata_;
    }
    const Shape &layer_input_shape(std::size_t index) const {
        return shapes_.at(index);
    }
    const Shape &layer_output_shape(std::size_t index) const {
        return shapes_.at(index + 1);
    }
    const Shape &output_shape() const { return shapes_.back(); }

    std::vector<std::size_t> parameterized_layers() const;
    /// Index of the last parameterized layer; it emits unshifted scores.
    std::size_t score_layer() const { return score_layer_; }
    std::size_t parameter_count() const;

    /// Copy with the weights and biases of one parameterized layer replaced.
    QuantizedModel with_parameters(std::size_t layer_index,
                                   std::vector<int8_t> weights,
                                   std::vector<int32_t> biases) const;
    /// Copy with the given requantization shift on one layer.
    QuantizedModel with_requant_shift(std::size_t layer_index,
                                      unsigned shift) const;

    bool operator==(const QuantizedModel &other) const {
        return input_shape_ == other.input_shape_ && layers_ == other.layers_;
    }

  private:
    Shape input_shape_;
    std::vector<Layer> layers_;
    std::map<std::string, std::string> metadata_;
    std::vector<Shape> shapes_;
    std::size_t score_layer_ = 0;
};

struct ProductRecord {
    uint32_t layer;
    uint64_t weight_index;
    uint64_t position;
    int32_t x;
    int32_t weight;
    int32_t product;
};

struct AdditionRecord {
    uint32_t layer;
    uint64_t bias_index;
    uint64_t position;
    int32_t accumulator;
    int32_t bias;
};

/// Operands of every multiplication and bias addition of one inference.
/// Products of one output appear before its addition; outputs are visited
/// in row-major order (channel, then spatial position).
struct OperandLog {
    std::vector<ProductRecord> products;
    std::vector<AdditionRecord> additions;
};

struct ForwardResult {
    Tensor output;
    OperandLog log;
};

/// Runs one inference and records all operands.
ForwardResult forward(const QuantizedModel &model, const Tensor &input);
/// Runs one inference without logging.
Tensor infer(const QuantizedModel &model, const Tensor &input);
/// Runs layers [0, layer_count) and returns the activation entering layer
/// `layer_count`.
Tensor run_prefix(const QuantizedModel &model, std::size_t layer_count,
                  const Tensor &input);

/// The x operands seen by one parameterized layer over a batch of network
/// inputs, i.e. what an attacker can compute once every earlier layer is
/// known. Operands are returned in the order `forward` logs them.
class LayerOperands {
  public:
    LayerOperands(Layer geometry, Shape input_shape,
                  std::vector<int8_t> activations, std::size_t inferences);

    std::size_t inference_count() const { return inferences_; }
    /// Spatial applications of each weight per inference (1 for dense).
    std::size_t reuse_count() const { return positions_; }
    std::size_t weight_count() const { return geometry_.weight_count(); }
    std::size_t output_units() const { return geometry_.output_units(); }

    int32_t operand(std::size_t weight_index, std::size_t inference,
                    std::size_t position) const;
    /// All operands of a weight: inference-major, position-minor.
    std::vector<int32_t> operands(std::size_t weight_index) const;
    /// Pre-bias accumulators of one output unit, computed with `weights`
    /// (the full weight tensor of this layer). Same ordering as operands.
    std::vector<int64_t> accumulators(std::size_t output_index,
                                      std::span<const int8_t> weights) const;

  private:
    Layer geometry_;
    Shape input_shape_;
    std::vector<int8_t> activations_;
    std::size_t inferences_;
    std::size_t input_size_;
    std::size_t positions_;
    std::size_t out_h_ = 1, out_w_ = 1;
};

/// Throws ArgumentError if `layer_index` is not a parameterized layer.
LayerOperands neuron_inputs(const QuantizedModel &model,
                            std::size_t layer_index,
                            std::span<const Tensor> network_inputs,
                            unsigned threads = 1);

/// Layer shape request for the model generator.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    Shape shape; // same convention as Layer::shape
    unsigned stride = 1;
    unsigned padding = 0;
    std::optional<unsigned> requant_shift;
};

struct ModelSpec {
    Shape input_shape; // inferred from the first dense layer when empty
    std::vector<LayerSpec> layers;
    int32_t bias_min = -2048;
    int32_t bias_max = 2047;
};

/// Parses "input:1x8x8,conv2d:1x8x3,relu,avgpool2d:2,flatten,dense:72x64".
/// dense:INxOUT; conv2d:INxOUTxK or INxOUTxKHxKW; options are appended with
/// '/', e.g. conv2d:1x8x3/stride=1/pad=1/shift=9.
ModelSpec parse_model_spec(std::string_view text);

/// Weights uniform over [-127, 127], biases uniform over the spec range.
/// Unset requantization shifts default to 7 + ceil(log2(fan_in) / 2).
QuantizedModel random_model(const ModelSpec &spec, Rng &rng);

/// Chooses each non-score layer's shift so the RMS of its requantized
/// output lands near `target_rms`, calibrating layers front to back.
QuantizedModel calibrate_requant_shifts(const QuantizedModel &model,
                                        std::span<const Tensor> inputs,
                                        double target_rms = 32.0);

/// Uniform int8 network inputs of the model's input shape.
std::vector<Tensor> random_inputs(const Shape &shape, std::size_t count,
                                  Rng &rng);

} // namespace qsca
