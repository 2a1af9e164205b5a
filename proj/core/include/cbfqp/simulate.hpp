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
#ifndef CBFQP_SIMULATE_HPP
#define CBFQP_SIMULATE_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cbfqp/qp.hpp"

namespace cbfqp {

/// Early stop once |x - target| <= tol for `window` consecutive steps, for any target.
struct ConvergenceSpec {
    std::vector<Vector> targets;
    double tol = 1e-2;
    int window = 10;
};

struct IntegrationSettings {
    double dt = 1e-3;
    double t_final = 20.0;
    std::optional<ConvergenceSpec> convergence;
};

enum class TerminationKind { TimeLimit, Converged, QpInfeasible };

std::string to_string(TerminationKind k);

struct Termination {
    TerminationKind kind = TerminationKind::TimeLimit;
    double t = 0.0;
    Vector x;       //!< state at termination (the offending stage state for QpInfeasible)
    Vector target;  //!< Converged only
    double tol = 0.0;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<Vector> controls;
    std::vector<double> slacks;
    std::vector<Vector> multipliers;  //!< (lambda_0, lambda_1..lambda_N)
    std::vector<ConstraintSet> active_sets;
    std::vector<Vector> barrier_values;
    std::vector<double> clf_values;
    Termination termination;
    /// x0 violated some barrier; integration still ran.
    bool started_unsafe = false;

    [[nodiscard]] std::size_t size() const { return times.size(); }
};

/// Non-finite state during integration; carries the samples logged so far.
class IntegrationError : public NumericalError {
  public:
    IntegrationError(const std::string& what, Trajectory partial)
        : NumericalError(what), partial_(std::move(partial)) {}
    [[nodiscard]] const Trajectory& partial() const { return partial_; }

  private:
    Trajectory partial_;
};

/// Fixed-step RK4 of the QP closed loop, one QP solve per stage.
Trajectory integrate(const QpController& qp, const Vector& x0, const IntegrationSettings& settings);

/// min over samples and barriers of h_i(x(t)); +inf without barriers.
double safety_margin(const Trajectory& traj);

/// CSV with 17 significant digits: t, x_*, u_*, delta, lambda_0..N, h_1..N, V, active_mask.
void write_trajectory_csv(const Trajectory& traj, std::ostream& os);
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

}  // namespace cbfqp

#endif  // CBFQP_SIMULATE_HPP
