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

#include "qsca/harness.hpp"

#include "json.hpp"

#include <filesystem>
#include <set>
#include <string>

namespace qsca {

inline constexpr int REPORT_FORMAT_VERSION = 1;

/// Every field except `threads`, which never affects results.
nlohmann::json config_to_json(const ScenarioConfig &cfg);

/// Overlays the keys of `doc` onto `base`. Unknown keys throw ArgumentError.
ScenarioConfig config_from_json(const nlohmann::json &doc,
                                ScenarioConfig base = {});

/// Keys accepted by config_from_json, including "threads".
const std::set<std::string> &config_keys();

nlohmann::json report_to_json(const RecoveryReport &report);
/// The recovered model is not embedded; write it separately.
nlohmann::json report_to_json(const AgreementReport &report);

/// Concatenates reports. Documents that are themselves merges are
/// flattened, so merging is associative.
nlohmann::json merge_reports(const std::vector<nlohmann::json> &reports);

/// Writes `doc.dump(indent)` to a sibling temporary file and renames it into
/// place; nothing is left behind on failure.
void write_json_file(const std::filesystem::path &path,
                     const nlohmann::json &doc, int indent = 1);
nlohmann::json read_json_file(const std::filesystem::path &path);

} // namespace qsca
