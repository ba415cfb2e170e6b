/*
 * Copyright 2026 The snnforge Authors. All Rights Reserved.
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
 */
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace snnforge::cli {

/// Exit statuses of run_command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // file or validation error
inline constexpr int kExitUsage = 2;    // unknown subcommand or flag

/// Runs one invocation; `args` excludes the program name. Diagnostics go to
/// `err`, informational output (summaries, usage) to `out`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace snnforge::cli
