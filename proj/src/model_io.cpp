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

#include "qsca/model_io.hpp"
#include "qsca/errors.hpp"

#include <fstream>
#include <set>

namespace qsca {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json &obj, const std::set<std::string> &known,
                         const std::string &where) {
    if (!obj.is_object())
        throw ArchiveError(where + " must be a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key()))
            throw ArchiveError("unknown key '" + it.key() + "' in " + where);
}

template <typename T> T get_int(const json &v, const std::string &what) {
    if (!v.is_number_integer())
        throw ArchiveError(what + " must be an integer");
    const auto x = v.get<int64_t>();
    if (x < int64_t(std::numeric_limits<T>::min()) ||
        x > int64_t(std::numeric_limits<T>::max()))
        throw ArchiveError(what + " out of range: " + std::to_string(x));
    return T(x);
}

Shape get_shape(const json &v, const std::string &what) {
    if (!v.is_array())
        throw ArchiveError(what + " must be an array");
    Shape s;
    for (const auto &d : v) {
        if (!d.is_number_unsigned())
            throw ArchiveError(what + " entries must be non-negative integers");
        s.push_back(d.get<std::size_t>());
    }
    return s;
}

} // namespace

json model_to_json(const QuantizedModel &model) {
    json layers = json::array();
    for (const auto &l : model.layers()) {
        json weights = json::array();
        for (int8_t w : l.weights)
            weights.push_back(int(w));
        layers.push_back({{"kind", std::string(to_string(l.kind))},
                          {"shape", l.shape},
                          {"stride", l.stride},
                          {"padding", l.padding},
                          {"requant_shift", l.requant_shift},
                          {"weights", weights},
                          {"biases", l.biases}});
    }
    json doc = {{"format_version", MODEL_FORMAT_VERSION},
                {"input_shape", model.input_shape()},
                {"layers", layers}};
    if (!model.metadata().empty())
        doc["metadata"] = model.metadata();
    return doc;
}

QuantizedModel model_from_json(const json &doc) {
    reject_unknown_keys(doc, {"format_version", "input_shape", "layers", "metadata"},
                        "model");
    if (!doc.contains("format_version") ||
        get_int<int>(doc["format_version"], "format_version") !=
            MODEL_FORMAT_VERSION)
        throw ArchiveError("model format_version must be " +
                           std::to_string(MODEL_FORMAT_VERSION));
    if (!doc.contains("input_shape") || !doc.contains("layers") ||
        !doc["layers"].is_array())
        throw ArchiveError("model needs input_shape and a layers array");
    std::vector<Layer> layers;
    for (const auto &jl : doc["layers"]) {
        const std::string where = "layer " + std::to_string(layers.size());
        reject_unknown_keys(jl, {"kind", "shape", "stride", "padding",
                                 "requant_shift", "weights", "biases"},
                            where);
        if (!jl.contains("kind") || !jl["kind"].is_string())
            throw ArchiveError(where + " needs a kind");
        Layer l;
        try {
            l.kind = layer_kind_from_string(jl["kind"].get<std::string>());
        } catch (const ArgumentError &e) {
            throw ArchiveError(where + ": " + e.what());
        }
        if (jl.contains("shape"))
            l.shape = get_shape(jl["shape"], where + " shape");
        if (jl.contains("stride"))
            l.stride = get_int<unsigned>(jl["stride"], where + " stride");
        if (jl.contains("padding"))
            l.padding = get_int<unsigned>(jl["padding"], where + " padding");
        if (jl.contains("requant_shift"))
            l.requant_shift =
                get_int<unsigned>(jl["requant_shift"], where + " requant_shift");
        if (jl.contains("weights")) {
            if (!jl["weights"].is_array())
                throw ArchiveError(where + " weights must be an array");
            for (const auto &w : jl["weights"])
                l.weights.push_back(get_int<int8_t>(w, where + " weight"));
        }
        if (jl.contains("biases")) {
            if (!jl["biases"].is_array())
                throw ArchiveError(where + " biases must be an array");
            for (const auto &b : jl["biases"])
                l.biases.push_back(get_int<int32_t>(b, where + " bias"));
        }
        layers.push_back(std::move(l));
    }
    std::map<std::string, std::string> metadata;
    if (doc.contains("metadata")) {
        if (!doc["metadata"].is_object())
            throw ArchiveError("model metadata must be an object");
        for (auto it = doc["metadata"].begin(); it != doc["metadata"].end();
             ++it) {
            if (!it->is_string())
                throw ArchiveError("model metadata values must be strings");
            metadata[it.key()] = it->get<std::string>();
        }
    }
    return QuantizedModel(get_shape(doc["input_shape"], "input_shape"),
                          std::move(layers), std::move(metadata));
}

void save_model(const QuantizedModel &model, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ArchiveError("cannot write model file " + path.string());
    out << model_to_json(model).dump() << '\n';
    if (!out)
        throw ArchiveError("failed writing model file " + path.string());
}

QuantizedModel load_model(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ArchiveError("cannot read model file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error &e) {
        throw ArchiveError("model file " + path.string() +
                           " is not valid JSON: " + e.what());
    }
    return model_from_json(doc);
}

json tensor_to_json(const Tensor &t) {
    return {{"shape", t.shape}, {"data", t.data}};
}

Tensor tensor_from_json(const json &doc) {
    reject_unknown_keys(doc, {"shape", "data"}, "tensor");
    Tensor t;
    t.shape = get_shape(doc.at("shape"), "tensor shape");
    for (const auto &v : doc.at("data"))
        t.data.push_back(get_int<int32_t>(v, "tensor value"));
    if (t.data.size() != element_count(t.shape))
        throw ArchiveError("tensor data does not match its shape");
    return t;
}

} // namespace qsca
