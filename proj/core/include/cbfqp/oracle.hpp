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
#ifndef CBFQP_ORACLE_HPP
#define CBFQP_ORACLE_HPP

#include <optional>

#include "cbfqp/qp.hpp"

namespace cbfqp {

// Reference solvers for the pointwise QP. They share no code with
// QpController::solve beyond reading the scenario parameters, and exist to
// audit it.

enum class OracleMethod {
    ExactRational,          //!< primal KKT enumeration in exact rational arithmetic
    DualProjectedGradient,  //!< accelerated projected gradient ascent on the dual
};

struct OracleResult {
    OracleMethod method = OracleMethod::ExactRational;
    /// Empty when the method proved the QP infeasible.
    std::optional<QpSolution> solution;
    int iterations = 0;
};

/// The reference solver did not converge; callers must treat this as "no verdict".
class OracleFailure : public Error {
  public:
    using Error::Error;
};

/// Exact route applies to linear/zero drift, constant g, zero/linear u_nom and N <= 3.
bool exact_oracle_applicable(const QpController& qp);

OracleResult oracle_solve_exact(const QpController& qp, const Vector& x);

/// Throws OracleFailure if the projected-gradient residual does not reach `tol` within `max_iter`.
OracleResult oracle_solve_dual_ascent(const QpController& qp, const Vector& x, int max_iter = 400000,
                                      double tol = 1e-10);

/// Exact route when applicable, dual ascent otherwise.
OracleResult oracle_solve(const QpController& qp, const Vector& x);

}  // namespace cbfqp

#endif  // CBFQP_ORACLE_HPP
