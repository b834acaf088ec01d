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

#include "qsca/leakage.hpp"
#include "qsca/qnn.hpp"

#include "json.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>

namespace qsca {

inline constexpr uint16_t TRACE_FORMAT_VERSION = 1;
inline constexpr int ARCHIVE_FORMAT_VERSION = 1;

/// Binary trace file, little-endian:
///   "QSCA" | u16 version | u8 operation | u8 width | u32 layer |
///   u64 coordinate | u64 M | M x (i32 operand, f64 sample)
void write_trace_set(std::ostream &out, const TraceSet &ts);
TraceSet read_trace_set(std::istream &in);
void write_trace_file(const std::filesystem::path &path, const TraceSet &ts);
TraceSet read_trace_file(const std::filesystem::path &path);

/// Zero-parameter copy of a model: the architecture an attacker knows.
QuantizedModel architecture_of(const QuantizedModel &model);

/// Every target of a model: per parameterized layer, all weights then all
/// biases.
std::vector<TargetId> model_targets(const QuantizedModel &model);

/// Read-only source of trace sets for network recovery.
class TraceProvider {
  public:
    virtual ~TraceProvider() = default;
    virtual const QuantizedModel &architecture() const = 0;
    /// Network inputs the attacker fed to the device.
    virtual const std::vector<Tensor> &network_inputs() const = 0;
    virtual std::vector<TargetId> targets() const = 0;
    virtual bool contains(const TargetId &target) const = 0;
    /// Throws ArchiveError when the target is absent.
    virtual TraceSet load(const TargetId &target) const = 0;
    /// Free-form description stored alongside the archive.
    virtual nlohmann::json notes() const { return nlohmann::json::object(); }
};

class InMemoryArchive : public TraceProvider {
  public:
    InMemoryArchive(QuantizedModel architecture, std::vector<Tensor> inputs,
                    nlohmann::json notes = nlohmann::json::object());

    void insert(TraceSet ts);
    void erase(const TargetId &target) { sets_.erase(target); }

    const QuantizedModel &architecture() const override { return arch_; }
    const std::vector<Tensor> &network_inputs() const override {
        return inputs_;
    }
    std::vector<TargetId> targets() const override;
    bool contains(const TargetId &target) const override {
        return sets_.count(target) != 0;
    }
    TraceSet load(const TargetId &target) const override;
    nlohmann::json notes() const override { return notes_; }

  private:
    QuantizedModel arch_;
    std::vector<Tensor> inputs_;
    std::map<TargetId, TraceSet> sets_;
    nlohmann::json notes_;
};

/// Archive directory: manifest.json, inputs.bin and one trace file per
/// target. Trace files are read on demand.
class DirectoryArchive : public TraceProvider {
  public:
    explicit DirectoryArchive(std::filesystem::path dir);

    const QuantizedModel &architecture() const override { return *arch_; }
    const std::vector<Tensor> &network_inputs() const override {
        return inputs_;
    }
    std::vector<TargetId> targets() const override;
    bool contains(const TargetId &target) const override;
    TraceSet load(const TargetId &target) const override;
    nlohmann::json notes() const override { return notes_; }

  private:
    std::filesystem::path dir_;
    std::unique_ptr<QuantizedModel> arch_;
    std::vector<Tensor> inputs_;
    std::map<TargetId, std::string> files_;
    nlohmann::json notes_;
};

/// Leakage settings of a network simulation: one model for products and one
/// for bias additions, plus the seed the per-target noise streams derive from.
struct NetworkLeakage {
    LeakageModelSpec product;
    LeakageModelSpec sum;
    uint64_t seed = 0;
};

/// Simulates the trace set of a target on first request. Every target owns
/// a noise stream derived from (seed, layer, operation, coordinate), so
/// results do not depend on request order.
class SimulatedArchive : public TraceProvider {
  public:
    SimulatedArchive(QuantizedModel victim, std::vector<Tensor> inputs,
                     NetworkLeakage leakage,
                     nlohmann::json notes = nlohmann::json::object());

    const QuantizedModel &architecture() const override { return arch_; }
    const std::vector<Tensor> &network_inputs() const override {
        return inputs_;
    }
    std::vector<TargetId> targets() const override {
        return model_targets(victim_);
    }
    bool contains(const TargetId &target) const override;
    TraceSet load(const TargetId &target) const override;
    nlohmann::json notes() const override { return notes_; }

  private:
    const LayerOperands &true_operands(std::size_t layer) const;

    QuantizedModel victim_;
    QuantizedModel arch_;
    std::vector<Tensor> inputs_;
    NetworkLeakage leakage_;
    nlohmann::json notes_;
    mutable std::mutex cache_lock_;
    mutable std::map<std::size_t, std::shared_ptr<const LayerOperands>> cache_;
};

/// Materializes every trace set of `victim` for the given inputs.
InMemoryArchive simulate_network_traces(const QuantizedModel &victim,
                                        const std::vector<Tensor> &inputs,
                                        const NetworkLeakage &leakage,
                                        unsigned threads = 1);

/// Writes `source` as an archive directory (trace files, inputs.bin,
/// manifest.json listing every target).
void write_archive(const TraceProvider &source,
                   const std::filesystem::path &dir);

} // namespace qsca
