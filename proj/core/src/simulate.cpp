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
#include "cbfqp/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

namespace cbfqp {

std::string to_string(TerminationKind k) {
    switch (k) {
        case TerminationKind::TimeLimit:
            return "time_limit";
        case TerminationKind::Converged:
            return "converged";
        case TerminationKind::QpInfeasible:
            return "qp_infeasible";
    }
    return "unknown";
}

namespace {

void log_sample(Trajectory& traj, const QpController& qp, double t, const Vector& x, const QpSolution& sol) {
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.controls.push_back(sol.u_star);
    traj.slacks.push_back(sol.delta_star);
    Vector mult(sol.lambda.size() + 1);
    mult << sol.lambda0, sol.lambda;
    traj.multipliers.push_back(std::move(mult));
    traj.active_sets.push_back(sol.active_set);
    traj.barrier_values.push_back(qp.certificates().barrier_values(x));
    traj.clf_values.push_back(qp.certificates().clf_value(x));
}

Vector field(const QpController& qp, const Vector& x, const QpSolution& sol) {
    return qp.model().drift(x) + qp.model().input_map(x) * sol.u_star;
}

}  // namespace

Trajectory integrate(const QpController& qp, const Vector& x0, const IntegrationSettings& settings) {
    require_size(x0, qp.state_dim(), "integrate x0");
    if (!(settings.dt > 0.0) || !(settings.t_final > 0.0)) {
        throw ContractViolation("integrate: dt and t_final must be positive");
    }
    Trajectory traj;
    const Vector h0 = qp.certificates().barrier_values(x0);
    traj.started_unsafe = h0.size() > 0 && h0.minCoeff() < 0.0;

    const double dt = settings.dt;
    const auto steps = static_cast<long>(std::llround(settings.t_final / dt));
    const auto* conv = settings.convergence ? &*settings.convergence : nullptr;
    std::vector<int> streak(conv ? conv->targets.size() : 0, 0);

    auto stop_infeasible = [&](double t, const Vector& x) {
        traj.termination.kind = TerminationKind::QpInfeasible;
        traj.termination.t = t;
        traj.termination.x = x;
        return traj;
    };

    Vector x = x0;
    for (long k = 0;; ++k) {
        const double t = static_cast<double>(k) * dt;
        const auto s1 = qp.try_solve(x);
        if (!s1) {
            return stop_infeasible(t, x);
        }
        log_sample(traj, qp, t, x, *s1);
        if (conv) {
            for (std::size_t i = 0; i < conv->targets.size(); ++i) {
                streak[i] = (x - conv->targets[i]).norm() <= conv->tol ? streak[i] + 1 : 0;
                if (streak[i] >= conv->window) {
                    traj.termination.kind = TerminationKind::Converged;
                    traj.termination.t = t;
                    traj.termination.x = x;
                    traj.termination.target = conv->targets[i];
                    traj.termination.tol = conv->tol;
                    return traj;
                }
            }
        }
        if (k == steps) {
            break;
        }
        const Vector k1 = field(qp, x, *s1);
        const Vector x2 = x + 0.5 * dt * k1;
        const auto s2 = qp.try_solve(x2);
        if (!s2) {
            return stop_infeasible(t + 0.5 * dt, x2);
        }
        const Vector k2 = field(qp, x2, *s2);
        const Vector x3 = x + 0.5 * dt * k2;
        const auto s3 = qp.try_solve(x3);
        if (!s3) {
            return stop_infeasible(t + 0.5 * dt, x3);
        }
        const Vector k3 = field(qp, x3, *s3);
        const Vector x4 = x + dt * k3;
        const auto s4 = qp.try_solve(x4);
        if (!s4) {
            return stop_infeasible(t + dt, x4);
        }
        const Vector k4 = field(qp, x4, *s4);
        Vector next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!next.allFinite()) {
            throw IntegrationError("integrate: non-finite state at t = " + std::to_string(t + dt), traj);
        }
        x = std::move(next);
    }
    traj.termination.kind = TerminationKind::TimeLimit;
    traj.termination.t = traj.times.back();
    traj.termination.x = x;
    return traj;
}

double safety_margin(const Trajectory& traj) {
    if (traj.size() == 0) {
        throw ContractViolation("safety_margin: empty trajectory");
    }
    double m = std::numeric_limits<double>::infinity();
    for (const auto& h : traj.barrier_values) {
        if (h.size() > 0) {
            m = std::min(m, h.minCoeff());
        }
    }
    return m;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
    if (traj.size() == 0) {
        throw ContractViolation("write_trajectory_csv: empty trajectory");
    }
    const auto n = traj.states.front().size();
    const auto m = traj.controls.front().size();
    const auto nb = traj.barrier_values.front().size();
    os << "t";
    for (Eigen::Index i = 0; i < n; ++i) {
        os << ",x_" << i;
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        os << ",u_" << i;
    }
    os << ",delta";
    for (Eigen::Index i = 0; i <= nb; ++i) {
        os << ",lambda_" << i;
    }
    for (Eigen::Index i = 1; i <= nb; ++i) {
        os << ",h_" << i;
    }
    os << ",V,active_mask\n";
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
    };
    for (std::size_t k = 0; k < traj.size(); ++k) {
        put(traj.times[k]);
        for (const auto* vec : {&traj.states[k], &traj.controls[k]}) {
            for (Eigen::Index i = 0; i < vec->size(); ++i) {
                os << ',';
                put((*vec)(i));
            }
        }
        os << ',';
        put(traj.slacks[k]);
        for (const auto* vec : {&traj.multipliers[k], &traj.barrier_values[k]}) {
            for (Eigen::Index i = 0; i < vec->size(); ++i) {
                os << ',';
                put((*vec)(i));
            }
        }
        os << ',';
        put(traj.clf_values[k]);
        os << ',' << traj.active_sets[k].bits() << '\n';
    }
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    write_trajectory_csv(traj, out);
    if (!out) {
        throw IoError("failed writing '" + path + "'");
    }
}

}  // namespace cbfqp
