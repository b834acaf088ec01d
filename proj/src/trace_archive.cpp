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

#include "qsca/trace_archive.hpp"
#include "qsca/errors.hpp"
#include "qsca/model_io.hpp"
#include "qsca/parallel.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace qsca {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr char TRACE_MAGIC[4] = {'Q', 'S', 'C', 'A'};
constexpr char INPUTS_MAGIC[4] = {'Q', 'S', 'C', 'I'};

template <typename T> void put_le(std::ostream &out, T value) {
    using U = std::make_unsigned_t<T>;
    U u = static_cast<U>(value);
    char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); i++) {
        bytes[i] = char(u & 0xFF);
        u = U(u >> 8);
    }
    out.write(bytes, sizeof(T));
}

void put_f64(std::ostream &out, double v) {
    put_le<uint64_t>(out, std::bit_cast<uint64_t>(v));
}

template <typename T> T get_le(std::istream &in, const char *what) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char *>(bytes), sizeof(T)))
        throw ArchiveError(std::string("truncated trace data while reading ") +
                           what);
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = sizeof(T); i-- > 0;)
        u = U((u << 8) | bytes[i]);
    return static_cast<T>(u);
}

double get_f64(std::istream &in, const char *what) {
    return std::bit_cast<double>(get_le<uint64_t>(in, what));
}

std::string trace_file_name(const TargetId &t) {
    std::ostringstream name;
    name << "L" << t.layer << "_"
         << (t.operation == OperationKind::multiplication ? "w" : "b") << "_"
         << t.coordinate << ".qsca";
    return name.str();
}

void write_inputs(const fs::path &path, const std::vector<Tensor> &inputs,
                  const Shape &shape) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ArchiveError("cannot write " + path.string());
    out.write(INPUTS_MAGIC, 4);
    put_le<uint16_t>(out, TRACE_FORMAT_VERSION);
    put_le<uint16_t>(out, uint16_t(shape.size()));
    for (std::size_t d : shape)
        put_le<uint64_t>(out, d);
    put_le<uint64_t>(out, inputs.size());
    for (const auto &t : inputs)
        for (int32_t v : t.data)
            put_le<int8_t>(out, int8_t(v));
    if (!out)
        throw ArchiveError("failed writing " + path.string());
}

std::vector<Tensor> read_inputs(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ArchiveError("cannot read " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, INPUTS_MAGIC, 4) != 0)
        throw ArchiveError(path.string() + " is not an inputs file");
    if (get_le<uint16_t>(in, "inputs version") != TRACE_FORMAT_VERSION)
        throw ArchiveError(path.string() + " has an unsupported version");
    const auto rank = get_le<uint16_t>(in, "inputs rank");
    Shape shape(rank);
    for (auto &d : shape)
        d = get_le<uint64_t>(in, "inputs shape");
    const auto count = get_le<uint64_t>(in, "inputs count");
    const std::size_t n = element_count(shape);
    std::vector<Tensor> out(count);
    std::vector<char> buf(n);
    for (auto &t : out) {
        t.shape = shape;
        if (!in.read(buf.data(), std::streamsize(n)))
            throw ArchiveError("truncated inputs file " + path.string());
        t.data.assign(buf.begin(), buf.end());
        for (auto &v : t.data)
            v = int8_t(v);
    }
    return out;
}

json target_to_json(const TargetId &t) {
    return {{"operation", std::string(to_string(t.operation))},
            {"layer", t.layer},
            {"coordinate", t.coordinate}};
}

TargetId target_from_json(const json &j) {
    try {
        TargetId t;
        t.operation =
            operation_kind_from_string(j.at("operation").get<std::string>());
        t.layer = j.at("layer").get<uint32_t>();
        t.coordinate = j.at("coordinate").get<uint64_t>();
        return t;
    } catch (const json::exception &e) {
        throw ArchiveError(std::string("bad target entry in manifest: ") +
                           e.what());
    } catch (const ArgumentError &e) {
        throw ArchiveError(e.what());
    }
}

void check_target(const QuantizedModel &model, const TargetId &t) {
    if (t.layer >= model.layers().size() || !model.layer(t.layer).parameterized())
        throw ArchiveError("target " + t.to_string() +
                           " does not address a dense/conv2d layer");
    const Layer &l = model.layer(t.layer);
    const std::size_t limit = t.operation == OperationKind::multiplication
                                  ? l.weight_count()
                                  : l.output_units();
    if (t.coordinate >= limit)
        throw ArchiveError("target " + t.to_string() + " is out of range");
}

} // namespace

void write_trace_set(std::ostream &out, const TraceSet &ts) {
    ts.validate();
    out.write(TRACE_MAGIC, 4);
    put_le<uint16_t>(out, TRACE_FORMAT_VERSION);
    put_le<uint8_t>(out, uint8_t(ts.target.operation));
    put_le<uint8_t>(out, uint8_t(ts.width));
    put_le<uint32_t>(out, ts.target.layer);
    put_le<uint64_t>(out, ts.target.coordinate);
    put_le<uint64_t>(out, ts.samples.size());
    for (std::size_t j = 0; j < ts.samples.size(); j++) {
        put_le<int32_t>(out, ts.operands[j]);
        put_f64(out, ts.samples[j]);
    }
}

TraceSet read_trace_set(std::istream &in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, TRACE_MAGIC, 4) != 0)
        throw ArchiveError("missing QSCA magic");
    const auto version = get_le<uint16_t>(in, "version");
    if (version != TRACE_FORMAT_VERSION)
        throw ArchiveError("unsupported trace format version " +
                           std::to_string(version));
    TraceSet ts;
    const auto op = get_le<uint8_t>(in, "operation");
    if (op > 1)
        throw ArchiveError("unknown operation kind " + std::to_string(op));
    ts.target.operation = OperationKind(op);
    ts.width = get_le<uint8_t>(in, "width");
    ts.target.layer = get_le<uint32_t>(in, "layer");
    ts.target.coordinate = get_le<uint64_t>(in, "coordinate");
    const auto m = get_le<uint64_t>(in, "trace count");
    if (m > (uint64_t(1) << 34))
        throw ArchiveError("implausible trace count " + std::to_string(m));
    ts.operands.resize(m);
    ts.samples.resize(m);
    for (std::size_t j = 0; j < m; j++) {
        ts.operands[j] = get_le<int32_t>(in, "operand");
        ts.samples[j] = get_f64(in, "sample");
    }
    try {
        ts.validate();
    } catch (const std::logic_error &e) {
        throw ArchiveError(e.what());
    }
    return ts;
}

void write_trace_file(const fs::path &path, const TraceSet &ts) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ArchiveError("cannot write trace file " + path.string());
    write_trace_set(out, ts);
    if (!out)
        throw ArchiveError("failed writing trace file " + path.string());
}

TraceSet read_trace_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ArchiveError("cannot read trace file " + path.string());
    try {
        return read_trace_set(in);
    } catch (const ArchiveError &e) {
        throw ArchiveError(path.string() + ": " + e.what());
    }
}

QuantizedModel architecture_of(const QuantizedModel &model) {
    std::vector<Layer> layers = model.layers();
    for (auto &l : layers) {
        std::fill(l.weights.begin(), l.weights.end(), int8_t(0));
        std::fill(l.biases.begin(), l.biases.end(), 0);
    }
    return QuantizedModel(model.input_shape(), std::move(layers),
                          model.metadata());
}

std::vector<TargetId> model_targets(const QuantizedModel &model) {
    std::vector<TargetId> out;
    for (std::size_t k : model.parameterized_layers()) {
        const Layer &l = model.layer(k);
        for (std::size_t w = 0; w < l.weight_count(); w++)
            out.push_back({OperationKind::multiplication, uint32_t(k), w});
        for (std::size_t b = 0; b < l.output_units(); b++)
            out.push_back({OperationKind::addition, uint32_t(k), b});
    }
    return out;
}

InMemoryArchive::InMemoryArchive(QuantizedModel architecture,
                                 std::vector<Tensor> inputs, json notes)
    : arch_(architecture_of(architecture)), inputs_(std::move(inputs)),
      notes_(std::move(notes)) {}

void InMemoryArchive::insert(TraceSet ts) {
    ts.validate();
    check_target(arch_, ts.target);
    const TargetId key = ts.target;
    sets_.insert_or_assign(key, std::move(ts));
}

std::vector<TargetId> InMemoryArchive::targets() const {
    std::vector<TargetId> out;
    for (const auto &[k, v] : sets_)
        out.push_back(k);
    return out;
}

TraceSet InMemoryArchive::load(const TargetId &target) const {
    auto it = sets_.find(target);
    if (it == sets_.end())
        throw ArchiveError("archive has no traces for " + target.to_string());
    return it->second;
}

DirectoryArchive::DirectoryArchive(fs::path dir) : dir_(std::move(dir)) {
    const fs::path manifest_path = dir_ / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in)
        throw ArchiveError("cannot read " + manifest_path.string());
    json manifest;
    try {
        manifest = json::parse(in);
        if (manifest.at("format_version").get<int>() != ARCHIVE_FORMAT_VERSION)
            throw ArchiveError("unsupported archive format version");
        arch_ = std::make_unique<QuantizedModel>(
            model_from_json(manifest.at("architecture")));
        inputs_ = read_inputs(dir_ / manifest.at("inputs_file").get<std::string>());
        for (const auto &entry : manifest.at("targets")) {
            const TargetId t = target_from_json(entry);
            check_target(*arch_, t);
            files_[t] = entry.at("file").get<std::string>();
        }
        notes_ = manifest.value("notes", json::object());
    } catch (const json::exception &e) {
        throw ArchiveError("malformed manifest " + manifest_path.string() +
                           ": " + e.what());
    }
    for (const auto &t : inputs_)
        if (t.shape != arch_->input_shape())
            throw ArchiveError("archive inputs do not match the architecture");
}

std::vector<TargetId> DirectoryArchive::targets() const {
    std::vector<TargetId> out;
    for (const auto &[k, v] : files_)
        out.push_back(k);
    return out;
}

bool DirectoryArchive::contains(const TargetId &target) const {
    return files_.count(target) != 0;
}

TraceSet DirectoryArchive::load(const TargetId &target) const {
    auto it = files_.find(target);
    if (it == files_.end())
        throw ArchiveError("archive has no traces for " + target.to_string());
    TraceSet ts = read_trace_file(dir_ / it->second);
    if (ts.target != target)
        throw ArchiveError(it->second + " holds " + ts.target.to_string() +
                           ", manifest says " + target.to_string());
    return ts;
}

SimulatedArchive::SimulatedArchive(QuantizedModel victim,
                                   std::vector<Tensor> inputs,
                                   NetworkLeakage leakage, json notes)
    : victim_(std::move(victim)), arch_(architecture_of(victim_)),
      inputs_(std::move(inputs)), leakage_(std::move(leakage)),
      notes_(std::move(notes)) {
    leakage_.product.validate();
    leakage_.sum.validate();
    if (leakage_.product.width < PRODUCT_WIDTH)
        throw ArgumentError("product leakage needs a width of at least 16");
    if (leakage_.sum.width != SUM_WIDTH)
        throw ArgumentError("bias leakage needs a 32-bit model");
    if (inputs_.empty())
        throw ArgumentError("network simulation needs at least one input");
}

bool SimulatedArchive::contains(const TargetId &target) const {
    try {
        check_target(victim_, target);
        return true;
    } catch (const ArchiveError &) {
        return false;
    }
}

const LayerOperands &SimulatedArchive::true_operands(std::size_t layer) const {
    std::lock_guard<std::mutex> guard(cache_lock_);
    auto it = cache_.find(layer);
    if (it == cache_.end())
        it = cache_
                 .emplace(layer, std::make_shared<const LayerOperands>(
                                     neuron_inputs(victim_, layer, inputs_)))
                 .first;
    return *it->second;
}

TraceSet SimulatedArchive::load(const TargetId &target) const {
    check_target(victim_, target);
    const Layer &layer = victim_.layer(target.layer);
    const LayerOperands &ops = true_operands(target.layer);
    Rng rng = derive_stream(leakage_.seed,
                            uint64_t(target.layer) * 2 + uint64_t(target.operation),
                            StreamPurpose::noise, target.coordinate);
    TraceSet ts;
    if (target.operation == OperationKind::multiplication) {
        const auto xs = ops.operands(target.coordinate);
        ts = simulate_weight_traces(layer.weights[target.coordinate], xs,
                                    leakage_.product, rng);
    } else {
        const auto accs = ops.accumulators(target.coordinate, layer.weights);
        ts = simulate_bias_traces(layer.biases[target.coordinate], accs,
                                  leakage_.sum, rng);
    }
    ts.target = target;
    return ts;
}

InMemoryArchive simulate_network_traces(const QuantizedModel &victim,
                                        const std::vector<Tensor> &inputs,
                                        const NetworkLeakage &leakage,
                                        unsigned threads) {
    const SimulatedArchive sim(victim, inputs, leakage);
    const auto targets = sim.targets();
    std::vector<TraceSet> sets(targets.size());
    parallel_for(targets.size(), threads,
                 [&](std::size_t i) { sets[i] = sim.load(targets[i]); });
    InMemoryArchive archive(victim, inputs);
    for (auto &ts : sets)
        archive.insert(std::move(ts));
    return archive;
}

void write_archive(const TraceProvider &source, const fs::path &dir) {
    fs::create_directories(dir);
    json targets = json::array();
    for (const TargetId &t : source.targets()) {
        const TraceSet ts = source.load(t);
        const std::string file = trace_file_name(t);
        write_trace_file(dir / file, ts);
        json entry = target_to_json(t);
        entry["count"] = ts.size();
        entry["file"] = file;
        targets.push_back(std::move(entry));
    }
    write_inputs(dir / "inputs.bin", source.network_inputs(),
                 source.architecture().input_shape());
    json manifest = {{"format_version", ARCHIVE_FORMAT_VERSION},
                     {"architecture", model_to_json(source.architecture())},
                     {"inputs_file", "inputs.bin"},
                     {"input_count", source.network_inputs().size()},
                     {"product_width", PRODUCT_WIDTH},
                     {"sum_width", SUM_WIDTH},
                     {"targets", targets},
                     {"notes", source.notes()}};
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out)
        throw ArchiveError("cannot write manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
    if (!out)
        throw ArchiveError("failed writing manifest in " + dir.string());
}

} // namespace qsca
