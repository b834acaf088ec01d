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

#include "qsca/report_io.hpp"
#include "qsca/errors.hpp"

#include <fstream>
#include <type_traits>

namespace qsca {

using nlohmann::json;

namespace {

json optional_json(const std::optional<double> &v) {
    return v ? json(*v) : json(nullptr);
}

template <typename T> T integer_field(const json &v, const std::string &key) {
    if (!v.is_number_integer())
        throw ArgumentError("config key '" + key + "' must be an integer");
    if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned())
            return T(v.get<uint64_t>());
        if (v.get<int64_t>() < 0)
            throw ArgumentError("config key '" + key + "' must be >= 0");
    }
    return T(v.get<int64_t>());
}

double real_field(const json &v, const std::string &key) {
    if (!v.is_number())
        throw ArgumentError("config key '" + key + "' must be a number");
    return v.get<double>();
}

} // namespace

const std::set<std::string> &config_keys() {
    static const std::set<std::string> keys = {
        "id",            "coeff_mean",        "coeff_variance",
        "noise_variance", "attack_model",     "traces_per_attack",
        "attack_count",  "include_minus_128", "bias_min",
        "bias_max",      "bias_fan_in",       "repeats",
        "eval_count",    "master_seed",       "record_duration",
        "threads"};
    return keys;
}

json config_to_json(const ScenarioConfig &cfg) {
    return {{"id", cfg.id},
            {"coeff_mean", cfg.coeff_mean},
            {"coeff_variance", cfg.coeff_variance},
            {"noise_variance", cfg.noise_variance},
            {"attack_model", std::string(to_string(cfg.attack_model))},
            {"traces_per_attack", cfg.traces_per_attack},
            {"attack_count", cfg.attack_count},
            {"include_minus_128", cfg.include_minus_128},
            {"bias_min", cfg.bias_min},
            {"bias_max", cfg.bias_max},
            {"bias_fan_in", cfg.bias_fan_in},
            {"repeats", cfg.repeats},
            {"eval_count", cfg.eval_count},
            {"master_seed", cfg.master_seed},
            {"record_duration", cfg.record_duration}};
}

ScenarioConfig config_from_json(const json &doc, ScenarioConfig cfg) {
    if (!doc.is_object())
        throw ArgumentError("config must be a JSON object");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const std::string &k = it.key();
        const json &v = it.value();
        if (!config_keys().count(k))
            throw ArgumentError("unknown config key '" + k + "'");
        if (k == "id") {
            if (v.is_number_integer())
                cfg.id = std::to_string(v.get<int64_t>());
            else if (v.is_string())
                cfg.id = v.get<std::string>();
            else
                throw ArgumentError("config key 'id' must be a string or integer");
        } else if (k == "attack_model") {
            if (!v.is_string())
                throw ArgumentError("config key 'attack_model' must be a string");
            cfg.attack_model = attack_model_from_string(v.get<std::string>());
        } else if (k == "include_minus_128" || k == "record_duration") {
            if (!v.is_boolean())
                throw ArgumentError("config key '" + k + "' must be a boolean");
            (k == "include_minus_128" ? cfg.include_minus_128
                                      : cfg.record_duration) = v.get<bool>();
        } else if (k == "coeff_mean") {
            cfg.coeff_mean = real_field(v, k);
        } else if (k == "coeff_variance") {
            cfg.coeff_variance = real_field(v, k);
        } else if (k == "noise_variance") {
            cfg.noise_variance = real_field(v, k);
        } else if (k == "traces_per_attack") {
            cfg.traces_per_attack = integer_field<std::size_t>(v, k);
        } else if (k == "attack_count") {
            cfg.attack_count = integer_field<std::size_t>(v, k);
        } else if (k == "bias_min") {
            cfg.bias_min = integer_field<int64_t>(v, k);
        } else if (k == "bias_max") {
            cfg.bias_max = integer_field<int64_t>(v, k);
        } else if (k == "bias_fan_in") {
            cfg.bias_fan_in = integer_field<unsigned>(v, k);
        } else if (k == "repeats") {
            cfg.repeats = integer_field<std::size_t>(v, k);
        } else if (k == "eval_count") {
            cfg.eval_count = integer_field<std::size_t>(v, k);
        } else if (k == "master_seed") {
            cfg.master_seed = integer_field<uint64_t>(v, k);
        } else if (k == "threads") {
            cfg.threads = integer_field<unsigned>(v, k);
        }
    }
    return cfg;
}

json report_to_json(const RecoveryReport &report) {
    json attacks = json::array();
    for (const AttackRecord &r : report.per_attack)
        attacks.push_back({{"index", r.index},
                           {"true_value", r.true_value},
                           {"guessed_value", r.guessed_value},
                           {"abs_correlation", r.abs_correlation},
                           {"rank_of_true", r.rank_of_true},
                           {"tie_break_used", r.tie_break_used}});
    return {{"format_version", REPORT_FORMAT_VERSION},
            {"kind", "recovery"},
            {"target", report.target},
            {"config", config_to_json(report.config)},
            {"per_attack", std::move(attacks)},
            {"accuracy", report.accuracy},
            {"average_error", report.average_error},
            {"duration_seconds", optional_json(report.duration_seconds)}};
}

json report_to_json(const AgreementReport &report) {
    json attacks = json::array();
    for (const ParameterRecord &r : report.per_attack)
        attacks.push_back(
            {{"operation", std::string(to_string(r.target.operation))},
             {"layer", r.target.layer},
             {"coordinate", r.target.coordinate},
             {"true_value", r.true_value},
             {"guessed_value", r.guessed_value},
             {"abs_correlation", r.abs_correlation},
             {"rank_of_true", r.rank_of_true},
             {"tie_break_used", r.tie_break_used}});
    json layers = json::array();
    for (const LayerMatch &m : report.per_layer_match)
        layers.push_back({{"layer", m.layer},
                          {"weight_match", m.weight_match},
                          {"bias_match", m.bias_match},
                          {"weight_average_error", m.weight_average_error},
                          {"bias_average_error", m.bias_average_error}});
    return {{"format_version", REPORT_FORMAT_VERSION},
            {"kind", "agreement"},
            {"target", "network"},
            {"config", config_to_json(report.config)},
            {"repeat", report.repeat},
            {"labeled", report.labeled},
            {"victim_top1", optional_json(report.victim_top1)},
            {"victim_top5", optional_json(report.victim_top5)},
            {"top1", report.top1},
            {"top5", report.top5},
            {"per_layer_match", std::move(layers)},
            {"per_attack", std::move(attacks)},
            {"accuracy", report.accuracy},
            {"average_error", report.average_error},
            {"duration_seconds", optional_json(report.duration_seconds)}};
}

json merge_reports(const std::vector<json> &reports) {
    json out = json::array();
    for (const json &r : reports) {
        if (!r.is_object() || !r.contains("format_version") ||
            r["format_version"] != REPORT_FORMAT_VERSION)
            throw ArchiveError("not a report document (missing or unsupported "
                               "format_version)");
        if (r.value("kind", "") == "merged") {
            for (const json &inner : r.at("reports"))
                out.push_back(inner);
        } else {
            out.push_back(r);
        }
    }
    return {{"format_version", REPORT_FORMAT_VERSION},
            {"kind", "merged"},
            {"count", out.size()},
            {"reports", std::move(out)}};
}

void write_json_file(const std::filesystem::path &path, const json &doc,
                     int indent) {
    std::filesystem::path tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw ArchiveError("cannot write " + path.string());
        out << doc.dump(indent) << '\n';
        out.close();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw ArchiveError("failed writing " + path.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw ArchiveError("cannot move output into place at " + path.string());
    }
}

json read_json_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ArchiveError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error &e) {
        throw ArchiveError(path.string() + " is not valid JSON: " + e.what());
    }
}

} // namespace qsca
