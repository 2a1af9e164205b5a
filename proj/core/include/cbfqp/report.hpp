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
#ifndef CBFQP_REPORT_HPP
#define CBFQP_REPORT_HPP

#include <optional>
#include <string>
#include <vector>

#include "cbfqp/analysis.hpp"
#include "cbfqp/scenario.hpp"

namespace cbfqp {

inline constexpr const char* kReportSchema = "cbfqp-report/1";

const char* toolkit_version();

struct Provenance {
    std::string scenario_name;
    std::string scenario_hash;  //!< FNV-1a of the canonical scenario text
    std::string toolkit_version;
    Tolerances tolerances;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct AnalysisReport {
    Provenance provenance;
    std::vector<ActiveSetResult> boundary;
    std::vector<EquilibriumReport> interior;
    std::optional<FeasibilityScanSummary> feasibility;
    std::optional<KktAuditSummary> kkt_audit;

    friend bool operator==(const AnalysisReport&, const AnalysisReport&) = default;
};

Provenance make_provenance(const Scenario& s);

std::string report_to_json(const AnalysisReport& report);
/// Throws InvalidParameter on malformed input.
AnalysisReport report_from_json(const std::string& text);

void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);

/// Fixed-width table of every equilibrium with its verdict.
std::string format_equilibria_table(const AnalysisReport& report);

}  // namespace cbfqp

#endif  // CBFQP_REPORT_HPP
