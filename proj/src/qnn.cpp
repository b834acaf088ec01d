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

#include "qsca/qnn.hpp"
#include "qsca/errors.hpp"
#include "qsca/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

namespace qsca {

namespace {

constexpr int64_t I32_MIN = std::numeric_limits<int32_t>::min();
constexpr int64_t I32_MAX = std::numeric_limits<int32_t>::max();

int64_t checked_add(int64_t acc, int64_t term, const char *what) {
    const int64_t sum = acc + term;
    if (sum < I32_MIN || sum > I32_MAX)
        throw OverflowError(std::string(what) + " left the int32 range (" +
                            std::to_string(sum) + ")");
    return sum;
}

int32_t requantize(int64_t value, unsigned shift) {
    // Arithmetic shift; C++20 guarantees it for negative operands.
    const int64_t shifted = value >> shift;
    return int32_t(std::clamp<int64_t>(shifted, ACTIVATION_MIN, ACTIVATION_MAX));
}

int64_t floor_div(int64_t a, int64_t b) {
    const int64_t q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

struct ConvGeometry {
    std::size_t oc, ic, kh, kw, in_h, in_w, out_h, out_w, stride, pad;
};

ConvGeometry conv_geometry(const Layer &layer, const Shape &in) {
    ConvGeometry g{};
    g.oc = layer.shape[0];
    g.ic = layer.shape[1];
    g.kh = layer.shape[2];
    g.kw = layer.shape[3];
    g.in_h = in[1];
    g.in_w = in[2];
    g.stride = layer.stride;
    g.pad = layer.padding;
    g.out_h = (g.in_h + 2 * g.pad - g.kh) / g.stride + 1;
    g.out_w = (g.in_w + 2 * g.pad - g.kw) / g.stride + 1;
    return g;
}

// Value of the (possibly padded) input map at channel c, row y, column x,
// where y and x are already offset by the padding.
inline int32_t padded_at(std::span<const int32_t> in, const ConvGeometry &g,
                         std::size_t c, std::size_t y, std::size_t x) {
    if (y < g.pad || x < g.pad)
        return 0;
    const std::size_t iy = y - g.pad, ix = x - g.pad;
    if (iy >= g.in_h || ix >= g.in_w)
        return 0;
    return in[(c * g.in_h + iy) * g.in_w + ix];
}

Shape output_shape_of(const Layer &layer, const Shape &in) {
    switch (layer.kind) {
    case LayerKind::dense:
        if (in.size() != 1 || in[0] != layer.shape[1])
            throw DimensionError("dense layer expects input [" +
                                 std::to_string(layer.shape[1]) + "], got " +
                                 shape_to_string(in));
        return {layer.shape[0]};
    case LayerKind::conv2d: {
        if (in.size() != 3 || in[0] != layer.shape[1])
            throw DimensionError("conv2d layer expects input [" +
                                 std::to_string(layer.shape[1]) +
                                 ", H, W], got " + shape_to_string(in));
        if (in[1] + 2 * layer.padding < layer.shape[2] ||
            in[2] + 2 * layer.padding < layer.shape[3])
            throw DimensionError("conv2d kernel larger than padded input " +
                                 shape_to_string(in));
        const ConvGeometry g = conv_geometry(layer, in);
        return {g.oc, g.out_h, g.out_w};
    }
    case LayerKind::relu:
        return in;
    case LayerKind::avgpool2d: {
        if (in.size() != 3)
            throw DimensionError("avgpool2d expects a [C, H, W] input, got " +
                                 shape_to_string(in));
        const std::size_t k = layer.shape[0];
        if (in[1] < k || in[2] < k)
            throw DimensionError("avgpool2d window larger than input " +
                                 shape_to_string(in));
        return {in[0], in[1] / k, in[2] / k};
    }
    case LayerKind::flatten:
        return {element_count(in)};
    }
    throw ArgumentError("unknown layer kind");
}

void validate_layer(const Layer &layer, std::size_t index) {
    const std::string where = "layer " + std::to_string(index) + " (" +
                              std::string(to_string(layer.kind)) + "): ";
    switch (layer.kind) {
    case LayerKind::dense:
        if (layer.shape.size() != 2)
            throw DimensionError(where + "shape must be [out, in]");
        break;
    case LayerKind::conv2d:
        if (layer.shape.size() != 4)
            throw DimensionError(where +
                                 "shape must be [out_ch, in_ch, kh, kw]");
        if (layer.stride == 0)
            throw ArgumentError(where + "stride must be positive");
        break;
    case LayerKind::avgpool2d:
        if (layer.shape.size() != 1 || layer.shape[0] == 0)
            throw DimensionError(where + "shape must be [k] with k > 0");
        break;
    case LayerKind::relu:
    case LayerKind::flatten:
        if (!layer.shape.empty() || !layer.weights.empty() ||
            !layer.biases.empty())
            throw ArgumentError(where + "takes no parameters");
        return;
    }
    if (!layer.parameterized()) {
        if (!layer.weights.empty() || !layer.biases.empty())
            throw ArgumentError(where + "takes no parameters");
        return;
    }
    if (element_count(layer.shape) == 0)
        throw DimensionError(where + "empty parameter shape");
    if (layer.weights.size() != element_count(layer.shape))
        throw DimensionError(where + "expected " +
                             std::to_string(element_count(layer.shape)) +
                             " weights, got " +
                             std::to_string(layer.weights.size()));
    if (layer.biases.size() != layer.shape[0])
        throw DimensionError(where + "expected " +
                             std::to_string(layer.shape[0]) +
                             " biases, got " +
                             std::to_string(layer.biases.size()));
    for (int8_t w : layer.weights)
        if (w < WEIGHT_MIN)
            throw RangeError(where + "weight -128 outside [-127, 127]");
    if (layer.requant_shift > 31)
        throw ArgumentError(where + "requant_shift must be at most 31");
}

// Executes one layer. `log` may be null. `final_scores` disables
// requantization for the score layer.
Tensor run_layer(const Layer &layer, std::size_t index, const Tensor &in,
                 const Shape &out_shape, bool final_scores, OperandLog *log) {
    Tensor out{out_shape, std::vector<int32_t>(element_count(out_shape))};
    switch (layer.kind) {
    case LayerKind::dense: {
        const std::size_t n_out = layer.shape[0], n_in = layer.shape[1];
        for (std::size_t o = 0; o < n_out; o++) {
            int64_t acc = 0;
            for (std::size_t i = 0; i < n_in; i++) {
                const std::size_t wi = o * n_in + i;
                const int32_t x = in.data[i];
                const int32_t w = layer.weights[wi];
                const int32_t v = x * w;
                if (log)
                    log->products.push_back({uint32_t(index), wi, 0, x, w, v});
                acc = checked_add(acc, v, "dense accumulator");
            }
            if (log)
                log->additions.push_back(
                    {uint32_t(index), o, 0, int32_t(acc), layer.biases[o]});
            const int64_t sum =
                checked_add(acc, layer.biases[o], "dense bias addition");
            out.data[o] = final_scores ? int32_t(sum)
                                       : requantize(sum, layer.requant_shift);
        }
        break;
    }
    case LayerKind::conv2d: {
        const ConvGeometry g = conv_geometry(layer, in.shape);
        const std::size_t k_size = g.ic * g.kh * g.kw;
        for (std::size_t oc = 0; oc < g.oc; oc++) {
            for (std::size_t oy = 0; oy < g.out_h; oy++) {
                for (std::size_t ox = 0; ox < g.out_w; ox++) {
                    const std::size_t pos = oy * g.out_w + ox;
                    int64_t acc = 0;
                    for (std::size_t c = 0; c < g.ic; c++)
                        for (std::size_t ky = 0; ky < g.kh; ky++)
                            for (std::size_t kx = 0; kx < g.kw; kx++) {
                                const std::size_t wi =
                                    oc * k_size + (c * g.kh + ky) * g.kw + kx;
                                const int32_t x =
                                    padded_at(in.data, g, c, oy * g.stride + ky,
                                              ox * g.stride + kx);
                                const int32_t w = layer.weights[wi];
                                const int32_t v = x * w;
                                if (log)
                                    log->products.push_back(
                                        {uint32_t(index), wi, pos, x, w, v});
                                acc = checked_add(acc, v, "conv2d accumulator");
                            }
                    if (log)
                        log->additions.push_back({uint32_t(index), oc, pos,
                                                  int32_t(acc),
                                                  layer.biases[oc]});
                    const int64_t sum = checked_add(acc, layer.biases[oc],
                                                    "conv2d bias addition");
                    out.data[oc * g.out_h * g.out_w + pos] =
                        final_scores ? int32_t(sum)
                                     : requantize(sum, layer.requant_shift);
                }
            }
        }
        break;
    }
    case LayerKind::relu:
        for (std::size_t i = 0; i < in.data.size(); i++)
            out.data[i] = std::max(in.data[i], 0);
        break;
    case LayerKind::avgpool2d: {
        const std::size_t k = layer.shape[0];
        const std::size_t ch = in.shape[0], ih = in.shape[1], iw = in.shape[2];
        const std::size_t oh = out_shape[1], ow = out_shape[2];
        for (std::size_t c = 0; c < ch; c++)
            for (std::size_t y = 0; y < oh; y++)
                for (std::size_t x = 0; x < ow; x++) {
                    int64_t sum = 0;
                    for (std::size_t dy = 0; dy < k; dy++)
                        for (std::size_t dx = 0; dx < k; dx++)
                            sum += in.data[(c * ih + y * k + dy) * iw + x * k +
                                           dx];
                    out.data[(c * oh + y) * ow + x] =
                        int32_t(floor_div(sum, int64_t(k * k)));
                }
        break;
    }
    case LayerKind::flatten:
        out.data = in.data;
        break;
    }
    return out;
}

void check_input(const QuantizedModel &model, const Tensor &input) {
    if (input.shape != model.input_shape())
        throw DimensionError("input shape " + shape_to_string(input.shape) +
                             " does not match model input " +
                             shape_to_string(model.input_shape()));
    if (input.data.size() != element_count(input.shape))
        throw DimensionError("input tensor holds " +
                             std::to_string(input.data.size()) +
                             " values for shape " +
                             shape_to_string(input.shape));
    for (int32_t v : input.data)
        if (v < ACTIVATION_MIN || v > ACTIVATION_MAX)
            throw RangeError("input value " + std::to_string(v) +
                             " outside [-128, 127]");
}

Tensor execute(const QuantizedModel &model, std::size_t layer_count,
               const Tensor &input, OperandLog *log) {
    check_input(model, input);
    Tensor cur = input;
    for (std::size_t k = 0; k < layer_count; k++)
        cur = run_layer(model.layer(k), k, cur, model.layer_output_shape(k),
                        k == model.score_layer(), log);
    return cur;
}

std::size_t parse_size(std::string_view text, std::string_view context) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size())
        throw ArgumentError("bad number '" + std::string(text) + "' in '" +
                            std::string(context) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
        const std::size_t p = s.find(sep, start);
        parts.push_back(s.substr(start, p - start));
        if (p == std::string_view::npos)
            break;
        start = p + 1;
    }
    return parts;
}

Shape parse_dims(std::string_view text, std::string_view context) {
    Shape dims;
    for (auto d : split(text, 'x'))
        dims.push_back(parse_size(d, context));
    return dims;
}

} // namespace

std::size_t element_count(const Shape &shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t(1),
                           std::multiplies<>());
}

std::string shape_to_string(const Shape &shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); i++) {
        if (i)
            s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

std::string_view to_string(LayerKind kind) {
    switch (kind) {
    case LayerKind::dense:
        return "dense";
    case LayerKind::conv2d:
        return "conv2d";
    case LayerKind::relu:
        return "relu";
    case LayerKind::avgpool2d:
        return "avgpool2d";
    case LayerKind::flatten:
        return "flatten";
    }
    return "?";
}

LayerKind layer_kind_from_string(std::string_view name) {
    for (LayerKind k : {LayerKind::dense, LayerKind::conv2d, LayerKind::relu,
                        LayerKind::avgpool2d, LayerKind::flatten})
        if (to_string(k) == name)
            return k;
    throw ArgumentError("unknown layer kind '" + std::string(name) + "'");
}

std::size_t Layer::output_units() const {
    return parameterized() ? shape[0] : 0;
}

std::size_t Layer::fan_in() const {
    if (!parameterized())
        return 0;
    return element_count(shape) / shape[0];
}

std::size_t Layer::weight_count() const {
    return parameterized() ? element_count(shape) : 0;
}

QuantizedModel::QuantizedModel(Shape input_shape, std::vector<Layer> layers,
                               std::map<std::string, std::string> metadata)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)),
      metadata_(std::move(metadata)) {
    if (input_shape_.empty() || element_count(input_shape_) == 0)
        throw DimensionError("model input shape must be non-empty");
    if (layers_.empty())
        throw ArgumentError("model needs at least one layer");
    shapes_.push_back(input_shape_);
    bool any_params = false;
    for (std::size_t k = 0; k < layers_.size(); k++) {
        validate_layer(layers_[k], k);
        shapes_.push_back(output_shape_of(layers_[k], shapes_.back()));
        if (layers_[k].parameterized()) {
            any_params = true;
            score_layer_ = k;
        }
    }
    if (!any_params)
        throw ArgumentError("model needs at least one dense or conv2d layer");
}

std::vector<std::size_t> QuantizedModel::parameterized_layers() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < layers_.size(); k++)
        if (layers_[k].parameterized())
            out.push_back(k);
    return out;
}

std::size_t QuantizedModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto &l : layers_)
        n += l.weights.size() + l.biases.size();
    return n;
}

QuantizedModel QuantizedModel::with_parameters(std::size_t layer_index,
                                               std::vector<int8_t> weights,
                                               std::vector<int32_t> biases) const {
    auto layers = layers_;
    if (layer_index >= layers.size() || !layers[layer_index].parameterized())
        throw ArgumentError("layer " + std::to_string(layer_index) +
                            " has no parameters");
    layers[layer_index].weights = std::move(weights);
    layers[layer_index].biases = std::move(biases);
    return QuantizedModel(input_shape_, std::move(layers), metadata_);
}

QuantizedModel QuantizedModel::with_requant_shift(std::size_t layer_index,
                                                  unsigned shift) const {
    auto layers = layers_;
    layers.at(layer_index).requant_shift = shift;
    return QuantizedModel(input_shape_, std::move(layers), metadata_);
}

ForwardResult forward(const QuantizedModel &model, const Tensor &input) {
    ForwardResult r;
    r.output = execute(model, model.layers().size(), input, &r.log);
    return r;
}

Tensor infer(const QuantizedModel &model, const Tensor &input) {
    return execute(model, model.layers().size(), input, nullptr);
}

Tensor run_prefix(const QuantizedModel &model, std::size_t layer_count,
                  const Tensor &input) {
    if (layer_count > model.layers().size())
        throw ArgumentError("prefix longer than the model");
    return execute(model, layer_count, input, nullptr);
}

LayerOperands::LayerOperands(Layer geometry, Shape input_shape,
                             std::vector<int8_t> activations,
                             std::size_t inferences)
    : geometry_(std::move(geometry)), input_shape_(std::move(input_shape)),
      activations_(std::move(activations)), inferences_(inferences),
      input_size_(element_count(input_shape_)), positions_(1) {
    if (!geometry_.parameterized())
        throw ArgumentError("operands exist only for dense/conv2d layers");
    if (activations_.size() != inferences_ * input_size_)
        throw DimensionError("activation buffer does not match inference count");
    if (geometry_.kind == LayerKind::conv2d) {
        const ConvGeometry g = conv_geometry(geometry_, input_shape_);
        out_h_ = g.out_h;
        out_w_ = g.out_w;
        positions_ = out_h_ * out_w_;
    }
}

int32_t LayerOperands::operand(std::size_t weight_index, std::size_t inference,
                               std::size_t position) const {
    const int8_t *act = activations_.data() + inference * input_size_;
    if (geometry_.kind == LayerKind::dense)
        return act[weight_index % geometry_.shape[1]];
    const std::size_t kh = geometry_.shape[2], kw = geometry_.shape[3];
    const std::size_t per_out = geometry_.shape[1] * kh * kw;
    const std::size_t r = weight_index % per_out;
    const std::size_t c = r / (kh * kw), ky = (r / kw) % kh, kx = r % kw;
    const std::size_t oy = position / out_w_, ox = position % out_w_;
    const std::size_t y = oy * geometry_.stride + ky;
    const std::size_t x = ox * geometry_.stride + kx;
    const std::size_t pad = geometry_.padding;
    if (y < pad || x < pad)
        return 0;
    const std::size_t iy = y - pad, ix = x - pad;
    if (iy >= input_shape_[1] || ix >= input_shape_[2])
        return 0;
    return act[(c * input_shape_[1] + iy) * input_shape_[2] + ix];
}

std::vector<int32_t> LayerOperands::operands(std::size_t weight_index) const {
    if (weight_index >= weight_count())
        throw RangeError("weight index " + std::to_string(weight_index) +
                         " out of range");
    std::vector<int32_t> out;
    out.reserve(inferences_ * positions_);
    for (std::size_t m = 0; m < inferences_; m++)
        for (std::size_t p = 0; p < positions_; p++)
            out.push_back(operand(weight_index, m, p));
    return out;
}

std::vector<int64_t>
LayerOperands::accumulators(std::size_t output_index,
                            std::span<const int8_t> weights) const {
    if (output_index >= output_units())
        throw RangeError("output index " + std::to_string(output_index) +
                         " out of range");
    if (weights.size() != weight_count())
        throw DimensionError("accumulators need the full layer weight tensor");
    const std::size_t fan = geometry_.fan_in();
    const std::size_t first = output_index * fan;
    std::vector<int64_t> out;
    out.reserve(inferences_ * positions_);
    for (std::size_t m = 0; m < inferences_; m++)
        for (std::size_t p = 0; p < positions_; p++) {
            int64_t acc = 0;
            for (std::size_t k = 0; k < fan; k++)
                acc = checked_add(acc,
                                  int64_t(weights[first + k]) *
                                      operand(first + k, m, p),
                                  "accumulator");
            out.push_back(acc);
        }
    return out;
}

LayerOperands neuron_inputs(const QuantizedModel &model,
                            std::size_t layer_index,
                            std::span<const Tensor> network_inputs,
                            unsigned threads) {
    if (layer_index >= model.layers().size() ||
        !model.layer(layer_index).parameterized())
        throw ArgumentError("layer " + std::to_string(layer_index) +
                            " is not a dense or conv2d layer");
    const Shape &in_shape = model.layer_input_shape(layer_index);
    const std::size_t n = element_count(in_shape);
    std::vector<int8_t> acts(network_inputs.size() * n);
    parallel_for(network_inputs.size(), threads, [&](std::size_t m) {
        const Tensor t = run_prefix(model, layer_index, network_inputs[m]);
        for (std::size_t i = 0; i < n; i++)
            acts[m * n + i] = int8_t(t.data[i]);
    });
    return LayerOperands(model.layer(layer_index), in_shape, std::move(acts),
                         network_inputs.size());
}

ModelSpec parse_model_spec(std::string_view text) {
    ModelSpec spec;
    for (auto token : split(text, ',')) {
        if (token.empty())
            throw ArgumentError("empty layer entry in model spec '" +
                                std::string(text) + "'");
        auto opts = split(token, '/');
        const std::string_view head = opts[0];
        const std::size_t colon = head.find(':');
        const std::string_view name = head.substr(0, colon);
        const std::string_view dims_text =
            colon == std::string_view::npos ? std::string_view{}
                                            : head.substr(colon + 1);
        if (name == "input") {
            spec.input_shape = parse_dims(dims_text, token);
            continue;
        }
        LayerSpec ls;
        ls.kind = layer_kind_from_string(name);
        const Shape dims =
            dims_text.empty() ? Shape{} : parse_dims(dims_text, token);
        switch (ls.kind) {
        case LayerKind::dense:
            if (dims.size() != 2)
                throw ArgumentError("dense needs INxOUT in '" +
                                    std::string(token) + "'");
            ls.shape = {dims[1], dims[0]};
            break;
        case LayerKind::conv2d:
            if (dims.size() == 3)
                ls.shape = {dims[1], dims[0], dims[2], dims[2]};
            else if (dims.size() == 4)
                ls.shape = {dims[1], dims[0], dims[2], dims[3]};
            else
                throw ArgumentError("conv2d needs INxOUTxK or INxOUTxKHxKW in '" +
                                    std::string(token) + "'");
            break;
        case LayerKind::avgpool2d:
            if (dims.size() != 1)
                throw ArgumentError("avgpool2d needs a window size in '" +
                                    std::string(token) + "'");
            ls.shape = dims;
            ls.stride = unsigned(dims[0]);
            break;
        case LayerKind::relu:
        case LayerKind::flatten:
            if (!dims.empty())
                throw ArgumentError(std::string(name) + " takes no dimensions");
            break;
        }
        for (std::size_t i = 1; i < opts.size(); i++) {
            const std::size_t eq = opts[i].find('=');
            if (eq == std::string_view::npos)
                throw ArgumentError("layer option needs key=value in '" +
                                    std::string(token) + "'");
            const auto key = opts[i].substr(0, eq);
            const auto value = unsigned(parse_size(opts[i].substr(eq + 1), token));
            if (key == "stride" && ls.kind == LayerKind::conv2d)
                ls.stride = value;
            else if (key == "pad" && ls.kind == LayerKind::conv2d)
                ls.padding = value;
            else if (key == "shift" &&
                     (ls.kind == LayerKind::conv2d || ls.kind == LayerKind::dense))
                ls.requant_shift = value;
            else
                throw ArgumentError("unknown layer option '" +
                                    std::string(opts[i]) + "'");
        }
        spec.layers.push_back(std::move(ls));
    }
    if (spec.layers.empty())
        throw ArgumentError("model spec has no layers");
    if (spec.input_shape.empty()) {
        if (spec.layers.front().kind != LayerKind::dense)
            throw ArgumentError(
                "model spec needs an input:CxHxW entry unless it starts with dense");
        spec.input_shape = {spec.layers.front().shape[1]};
    }
    return spec;
}

QuantizedModel random_model(const ModelSpec &spec, Rng &rng) {
    if (spec.layers.empty())
        throw ArgumentError("model spec has no layers");
    if (spec.bias_min > spec.bias_max)
        throw ArgumentError("bias range is empty");
    std::uniform_int_distribution<int> weight_dist(WEIGHT_MIN, WEIGHT_MAX);
    std::uniform_int_distribution<int32_t> bias_dist(spec.bias_min,
                                                     spec.bias_max);
    std::vector<Layer> layers;
    for (const auto &ls : spec.layers) {
        Layer l;
        l.kind = ls.kind;
        l.shape = ls.shape;
        l.stride = ls.stride;
        l.padding = ls.padding;
        if (l.parameterized()) {
            const std::size_t fan = l.fan_in();
            l.requant_shift = ls.requant_shift.value_or(
                7 + unsigned(std::ceil(std::log2(double(fan)) / 2.0)));
            l.weights.resize(element_count(l.shape));
            for (auto &w : l.weights)
                w = int8_t(weight_dist(rng));
            l.biases.resize(l.shape[0]);
            for (auto &b : l.biases)
                b = bias_dist(rng);
        }
        layers.push_back(std::move(l));
    }
    return QuantizedModel(spec.input_shape, std::move(layers));
}

QuantizedModel calibrate_requant_shifts(const QuantizedModel &model,
                                        std::span<const Tensor> inputs,
                                        double target_rms) {
    if (inputs.empty())
        throw ArgumentError("calibration needs at least one input");
    QuantizedModel cur = model;
    for (std::size_t k : model.parameterized_layers()) {
        if (k == model.score_layer())
            break;
        const Layer &layer = cur.layer(k);
        const LayerOperands ops = neuron_inputs(cur, k, inputs);
        double sum_sq = 0.0;
        std::size_t count = 0;
        for (std::size_t o = 0; o < layer.output_units(); o++) {
            for (int64_t acc : ops.accumulators(o, layer.weights)) {
                const double v = double(acc + layer.biases[o]);
                sum_sq += v * v;
                count++;
            }
        }
        const double rms = std::sqrt(sum_sq / double(count));
        const double ideal = rms > target_rms ? std::log2(rms / target_rms) : 0;
        cur = cur.with_requant_shift(k, unsigned(std::lround(ideal)));
    }
    return cur;
}

std::vector<Tensor> random_inputs(const Shape &shape, std::size_t count,
                                  Rng &rng) {
    std::uniform_int_distribution<int> dist(ACTIVATION_MIN, ACTIVATION_MAX);
    std::vector<Tensor> out(count);
    for (auto &t : out) {
        t.shape = shape;
        t.data.resize(element_count(shape));
        for (auto &v : t.data)
            v = dist(rng);
    }
    return out;
}

} // namespace qsca
