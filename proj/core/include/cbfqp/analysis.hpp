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
#ifndef CBFQP_ANALYSIS_HPP
#define CBFQP_ANALYSIS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cbfqp/equilibria.hpp"
#include "cbfqp/qp.hpp"

namespace cbfqp {

struct ActiveSetResult {
    std::vector<int> indices;  //!< 0-based
    std::vector<EquilibriumReport> equilibria;

    friend bool operator==(const ActiveSetResult&, const ActiveSetResult&) = default;
};

struct EquilibriumAnalysis {
    std::vector<ActiveSetResult> boundary;
    std::vector<EquilibriumReport> interior;
};

/// Boundary search over every index set with r <= min(N, n), interior search, and classification.
EquilibriumAnalysis analyze_equilibria(const QpController& qp, const SearchConfig& search);

/// x_e of every validated report (boundary and interior).
std::vector<Vector> validated_equilibria(const EquilibriumAnalysis& analysis);

/// Uniform samples in [lo, hi]; deterministic for a given seed.
std::vector<Vector> sample_states(const Vector& lo, const Vector& hi, int count, std::uint64_t seed);

/// Rejection-sampled states with min_i h_i(x) > margin.
std::vector<Vector> sample_safe_states(const QpController& qp, const Vector& lo, const Vector& hi, int count,
                                       std::uint64_t seed, double margin = 0.0);

struct FeasibilitySample {
    Vector x;
    bool holds = false;
    double residual = 0.0;
    bool solver_success = false;
};

struct FeasibilityScanSummary {
    int samples = 0;
    std::uint64_t seed = 0;
    int holds = 0;
    int solver_success = 0;
    int counterexamples = 0;  //!< holds but the QP failed

    friend bool operator==(const FeasibilityScanSummary&, const FeasibilityScanSummary&) = default;
};

struct FeasibilityScan {
    std::vector<FeasibilitySample> rows;
    FeasibilityScanSummary summary;
};

FeasibilityScan feasibility_scan(const QpController& qp, const Vector& lo, const Vector& hi, int samples,
                                 std::uint64_t seed);

struct KktAuditSummary {
    int samples = 0;
    std::uint64_t seed = 0;
    std::string oracle_method;
    double u_tolerance = 1e-6;
    double residual_tolerance = 1e-7;
    double max_u_disagreement = 0.0;
    double max_delta_disagreement = 0.0;
    double max_stationarity = 0.0;
    double max_primal = 0.0;
    double max_dual = 0.0;
    double max_complementarity = 0.0;
    int both_infeasible = 0;
    int feasibility_disagreements = 0;
    int u_disagreements = 0;
    int residual_violations = 0;
    int oracle_failures = 0;

    [[nodiscard]] int failures() const {
        return feasibility_disagreements + u_disagreements + residual_violations + oracle_failures;
    }
    friend bool operator==(const KktAuditSummary&, const KktAuditSummary&) = default;
};

struct KktAudit {
    KktAuditSummary summary;
    std::optional<Vector> first_failure;
    std::string first_failure_reason;
};

/// Compares QpController::solve with the reference oracle on random states.
KktAudit kkt_audit(const QpController& qp, const Vector& lo, const Vector& hi, int samples, std::uint64_t seed,
                   double u_tol = 1e-6, double residual_tol = 1e-7);

}  // namespace cbfqp

#endif  // CBFQP_ANALYSIS_HPP
