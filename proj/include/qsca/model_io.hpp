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

#include "qsca/qnn.hpp"

#include "json.hpp"

#include <filesystem>

namespace qsca {

inline constexpr int MODEL_FORMAT_VERSION = 1;

nlohmann::json model_to_json(const QuantizedModel &model);
/// Rejects unknown keys, non-integer values and wrong format versions.
QuantizedModel model_from_json(const nlohmann::json &doc);

void save_model(const QuantizedModel &model, const std::filesystem::path &path);
QuantizedModel load_model(const std::filesystem::path &path);

nlohmann::json tensor_to_json(const Tensor &t);
Tensor tensor_from_json(const nlohmann::json &doc);

} // namespace qsca
