/*
 Copyright 2026 The cbfqp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#ifndef CBFQP_TOOLS_COMMANDS_HPP
#define CBFQP_TOOLS_COMMANDS_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace cbfqp::cli {

enum ExitCode : int {
    kSuccess = 0,
    kUsageError = 1,
    kInvariantViolation = 2,
    kIoError = 3,
};

struct CommandOptions {
    std::string scenario;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> samples;
    std::optional<int> x0_index;  //!< simulate only; all initial states when empty
};

// Each command writes its artifacts under out_dir, prefixed with the scenario name.
int cmd_simulate(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_equilibria(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_feasibility_scan(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_kkt_audit(const CommandOptions& opt, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a command.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cbfqp::cli

#endif  // CBFQP_TOOLS_COMMANDS_HPP
