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

#include <iosfwd>
#include <string>
#include <vector>

namespace qsca {

/// Runs the command line `qsca <args...>` (program name excluded) and
/// returns the process exit code. Output and diagnostics go to the given
/// streams; nothing reads the environment.
int run_cli(const std::vector<std::string> &args, std::ostream &out,
            std::ostream &err);

} // namespace qsca
