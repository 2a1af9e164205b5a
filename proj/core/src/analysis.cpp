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
#include "cbfqp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cbfqp/oracle.hpp"
#include "cbfqp/stability.hpp"

namespace cbfqp {

EquilibriumAnalysis analyze_equilibria(const QpController& qp, const SearchConfig& search) {
    EquilibriumAnalysis out;
    for (const auto& set : active_index_sets(qp.num_cbfs(), qp.state_dim())) {
        ActiveSetResult res;
        res.indices = set;
        res.equilibria = find_boundary_equilibria(qp, set, search);
        for (auto& rep : res.equilibria) {
            if (!rep.validated_in_S_A) {
                continue;
            }
            try {
                rep.stability = classify(qp, rep.x_e, rep.lambda_e, rep.active);
            } catch (const PreconditionError& e) {
                rep.validation_note += std::string("; not classified: ") + e.what();
            }
        }
        out.boundary.push_back(std::move(res));
    }
    out.interior = find_interior_equilibria(qp, search);
    return out;
}

std::vector<Vector> validated_equilibria(const EquilibriumAnalysis& analysis) {
    std::vector<Vector> out;
    for (const auto& set : analysis.boundary) {
        for (const auto& rep : set.equilibria) {
            if (rep.validated_in_S_A) {
                out.push_back(rep.x_e);
            }
        }
    }
    for (const auto& rep : analysis.interior) {
        if (rep.validated_in_S_A) {
            out.push_back(rep.x_e);
        }
    }
    return out;
}

std::vector<Vector> sample_states(const Vector& lo, const Vector& hi, int count, std::uint64_t seed) {
    if (lo.size() != hi.size()) {
        throw ContractViolation("sample_states: box bounds differ in size");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int k = 0; k < count; ++k) {
        Vector x(lo.size());
        for (Eigen::Index i = 0; i < lo.size(); ++i) {
            x(i) = lo(i) + (hi(i) - lo(i)) * unit(rng);
        }
        out.push_back(std::move(x));
    }
    return out;
}

std::vector<Vector> sample_safe_states(const QpController& qp, const Vector& lo, const Vector& hi, int count,
                                       std::uint64_t seed, double margin) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Vector> out;
    const long max_draws = 10000L * std::max(count, 1);
    for (long draw = 0; draw < max_draws && static_cast<int>(out.size()) < count; ++draw) {
        Vector x(lo.size());
        for (Eigen::Index i = 0; i < lo.size(); ++i) {
            x(i) = lo(i) + (hi(i) - lo(i)) * unit(rng);
        }
        const Vector h = qp.certificates().barrier_values(x);
        if (h.size() == 0 || h.minCoeff() > margin) {
            out.push_back(std::move(x));
        }
    }
    if (static_cast<int>(out.size()) < count) {
        throw PreconditionError("sample_safe_states: the sampling box contains too few safe states");
    }
    return out;
}

FeasibilityScan feasibility_scan(const QpController& qp, const Vector& lo, const Vector& hi, int samples,
                                 std::uint64_t seed) {
    FeasibilityScan scan;
    scan.summary.samples = samples;
    scan.summary.seed = seed;
    for (auto& x : sample_states(lo, hi, samples, seed)) {
        FeasibilitySample row;
        const FeasibilityReport rep = qp.check_feasibility(x);
        row.holds = rep.holds;
        row.residual = rep.residual;
        row.solver_success = qp.try_solve(x).has_value();
        row.x = std::move(x);
        scan.summary.holds += row.holds ? 1 : 0;
        scan.summary.solver_success += row.solver_success ? 1 : 0;
        scan.summary.counterexamples += (row.holds && !row.solver_success) ? 1 : 0;
        scan.rows.push_back(std::move(row));
    }
    return scan;
}

KktAudit kkt_audit(const QpController& qp, const Vector& lo, const Vector& hi, int samples, std::uint64_t seed,
                   double u_tol, double residual_tol) {
    KktAudit audit;
    auto& s = audit.summary;
    s.samples = samples;
    s.seed = seed;
    s.u_tolerance = u_tol;
    s.residual_tolerance = residual_tol;
    s.oracle_method = exact_oracle_applicable(qp) ? "exact_rational" : "dual_projected_gradient";
    auto record_failure = [&](const Vector& x, const std::string& why) {
        if (!audit.first_failure) {
            audit.first_failure = x;
            audit.first_failure_reason = why;
        }
    };
    for (const auto& x : sample_states(lo, hi, samples, seed)) {
        const auto sol = qp.try_solve(x);
        OracleResult ref;
        try {
            ref = oracle_solve(qp, x);
        } catch (const OracleFailure& e) {
            ++s.oracle_failures;
            record_failure(x, e.what());
            continue;
        }
        if (sol.has_value() != ref.solution.has_value()) {
            ++s.feasibility_disagreements;
            record_failure(x, sol ? "oracle reports infeasible, solver found a solution"
                                  : "solver reports infeasible, oracle found a solution");
            continue;
        }
        if (!sol) {
            ++s.both_infeasible;
            continue;
        }
        const double du = (sol->u_star - ref.solution->u_star).cwiseAbs().maxCoeff();
        const double dd = std::abs(sol->delta_star - ref.solution->delta_star);
        s.max_u_disagreement = std::max(s.max_u_disagreement, du);
        s.max_delta_disagreement = std::max(s.max_delta_disagreement, dd);
        if (!(du <= u_tol)) {
            ++s.u_disagreements;
            record_failure(x, "u_star disagreement " + std::to_string(du));
        }
        const KktResiduals r = qp.kkt_residuals(x, *sol);
        s.max_stationarity = std::max(s.max_stationarity, r.stationarity);
        s.max_primal = std::max(s.max_primal, r.primal);
        s.max_dual = std::max(s.max_dual, r.dual);
        s.max_complementarity = std::max(s.max_complementarity, r.complementarity);
        if (!(r.max() <= residual_tol)) {
            ++s.residual_violations;
            record_failure(x, "KKT residual " + std::to_string(r.max()));
        }
    }
    return audit;
}

}  // namespace cbfqp
