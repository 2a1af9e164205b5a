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
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cbfqp/analysis.hpp"
#include "cbfqp/report.hpp"
#include "cbfqp/scenario.hpp"
#include "cbfqp/simulate.hpp"
#include "cbfqp/stability.hpp"
#include "commands.hpp"

namespace {

using namespace cbfqp;
namespace fs = std::filesystem;

const std::vector<std::string> kScenarios{"fig1", "deadlock2d", "filter2d"};

std::string scenario_path(const std::string& name) {
    return std::string(CBFQP_SCENARIO_DIR) + "/" + name + ".scenario";
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

std::string fmt(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::string fmt_vec(const Vector& v) {
    std::string out = "(";
    for (Eigen::Index i = 0; i < v.size(); ++i) out += (i > 0 ? ", " : "") + fmt(v(i), 4);
    return out + ")";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

Outcome criterion_fig1() {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    auto s = load_scenario(scenario_path("fig1"));
    auto qp = make_controller(s);
    auto analysis = analyze_equilibria(qp, s.search);
    const EquilibriumReport* stable = nullptr;
    for (const auto& set : analysis.boundary) {
        if (set.indices != std::vector<int>{0, 1}) continue;
        for (const auto& r : set.equilibria) {
            if (r.validated_in_S_A && r.lambda_e.minCoeff() >= 0.0 && r.stability &&
                r.stability->verdict == Verdict::Stable) {
                stable = &r;
            }
        }
    }
    o.require(stable != nullptr, "no validated Stable equilibrium on the intersection with lambda >= 0");
    auto traj = integrate(qp, s.initial_states.at(0), make_integration_settings(s, validated_equilibria(analysis)));
    o.require(traj.termination.kind == TerminationKind::Converged, "simulation did not converge");
    if (stable != nullptr) {
        double dist = (traj.states.back() - stable->x_e).norm();
        o.require(dist <= 1e-2, "final state " + fmt(dist) + " from the equilibrium");
        o.detail += (o.detail.empty() ? "" : "; ") + std::string("final distance ") + fmt(dist);
    }
    double margin = safety_margin(traj);
    o.require(margin >= -1e-4, "safety margin " + fmt(margin));
    double elapsed = seconds_since(t0);
    o.require(elapsed < 30.0, "runtime " + fmt(elapsed) + " s");
    o.detail += "; margin " + fmt(margin) + ", " + fmt(elapsed) + " s";
    return o;
}

Outcome criterion_deadlock() {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    auto s = load_scenario(scenario_path("deadlock2d"));
    auto qp = make_controller(s);
    auto analysis = analyze_equilibria(qp, s.search);
    Vector xe(2);
    xe << 3, 0;
    const EquilibriumReport* found = nullptr;
    for (const auto& set : analysis.boundary) {
        for (const auto& r : set.equilibria) {
            if (r.validated_in_S_A) found = &r;
        }
    }
    o.require(found != nullptr, "no validated boundary equilibrium");
    if (found != nullptr) {
        o.require((found->x_e - xe).norm() <= 1e-8, "x_e off by " + fmt((found->x_e - xe).norm()));
        o.require(std::abs(found->lambda_e(0) - 6.75) <= 1e-8, "lambda_e = " + fmt(found->lambda_e(0)));
        o.require(found->stability && found->stability->verdict == Verdict::Unstable, "verdict is not Unstable");
        if (found->stability && found->stability->mu_max) {
            o.require(std::abs(*found->stability->mu_max - 9.0) <= 1e-6, "mu_max = " + fmt(*found->stability->mu_max));
        } else {
            o.require(false, "mu_max missing");
        }
        // Perturbation oracle: the witness direction grows away from x_e.
        IntegrationSettings st;
        st.t_final = 0.3;
        Vector w = found->stability && found->stability->witness_v ? *found->stability->witness_v : Vector::Zero(2);
        auto traj = integrate(qp, found->x_e + 1e-3 * w, st);
        double growth = (traj.states.back() - found->x_e).norm() / 1e-3;
        o.require(growth >= 10.0, "perturbation growth " + fmt(growth));
    }
    bool origin = analysis.interior.size() == 1 && analysis.interior[0].x_e.norm() <= 1e-8;
    o.require(origin, "interior equilibria are not exactly the origin");
    double elapsed = seconds_since(t0);
    o.require(elapsed < 5.0, "runtime " + fmt(elapsed) + " s");
    if (o.pass) o.detail = fmt(elapsed) + " s";
    return o;
}

Outcome criterion_kkt() {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    double worst_u = 0.0;
    double worst_res = 0.0;
    for (const auto& name : kScenarios) {
        auto s = load_scenario(scenario_path(name));
        auto audit = kkt_audit(make_controller(s), s.sampling.lo, s.sampling.hi, 1000, s.sampling.seed);
        const auto& a = audit.summary;
        worst_u = std::max(worst_u, a.max_u_disagreement);
        worst_res = std::max({worst_res, a.max_stationarity, a.max_primal, a.max_dual, a.max_complementarity});
        o.require(a.samples == 1000, name + ": sample count");
        o.require(a.failures() == 0, name + ": " + std::to_string(a.failures()) + " failures (" +
                                         audit.first_failure_reason + ")");
    }
    o.require(worst_u <= 1e-6, "max |du| " + fmt(worst_u));
    o.require(worst_res <= 1e-7, "max residual " + fmt(worst_res));
    double elapsed = seconds_since(t0);
    o.require(elapsed < 60.0, "runtime " + fmt(elapsed) + " s");
    o.detail += (o.detail.empty() ? "" : "; ") + std::string("max |du| ") + fmt(worst_u) + ", max residual " +
                fmt(worst_res) + ", " + fmt(elapsed) + " s";
    return o;
}

void each_boundary_equilibrium(
    const std::function<void(const std::string&, const QpController&, const EquilibriumReport&)>& f) {
    for (const auto& name : kScenarios) {
        auto s = load_scenario(scenario_path(name));
        auto qp = make_controller(s);
        auto analysis = analyze_equilibria(qp, s.search);
        for (const auto& set : analysis.boundary) {
            for (const auto& r : set.equilibria) {
                if (r.validated_in_S_A) f(name, qp, r);
            }
        }
    }
}

Outcome criterion_jacobians() {
    Outcome o;
    double worst_rel = 0.0;
    double worst_left = 0.0;
    double worst_fact = 0.0;
    int count = 0;
    int fact_count = 0;
    each_boundary_equilibrium([&](const std::string& name, const QpController& qp, const EquilibriumReport& r) {
        ++count;
        try {
            auto bundle = closed_loop_jacobian(qp, r.x_e, r.lambda_e, r.active);
            Matrix fd = finite_difference_closed_loop_jacobian(qp, r.x_e);
            worst_rel = std::max(worst_rel, max_abs(bundle.j_fcl - fd) / std::max(1.0, max_abs(bundle.j_fcl)));
            Matrix ua = stacked_gradients_U(qp.certificates(), r.active, r.x_e);
            Matrix lp = alpha_prime_vector(qp.certificates(), r.active, r.x_e).asDiagonal();
            worst_left = std::max(worst_left, max_abs(ua.transpose() * bundle.j_fcl + lp * ua.transpose()));
            if (auto fact = verify_jacobian_factorization(qp, r.x_e, r.lambda_e, r.active)) {
                worst_fact = std::max(worst_fact, *fact);
                ++fact_count;
            }
        } catch (const Error& e) {
            o.require(false, name + ": " + e.what());
        }
    });
    o.require(count > 0, "no validated boundary equilibria");
    o.require(worst_rel <= 1e-5, "analytic vs finite-difference " + fmt(worst_rel));
    o.require(worst_left <= 1e-6, "left-eigenvector residual " + fmt(worst_left));
    o.require(worst_fact <= 1e-8, "factorization residual " + fmt(worst_fact));
    o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(count) + " equilibria, rel " + fmt(worst_rel) +
                ", left " + fmt(worst_left) + ", factorization " + fmt(worst_fact) + " (" +
                std::to_string(fact_count) + " applicable)";
    return o;
}

Outcome criterion_feasibility() {
    Outcome o;
    for (const auto& name : kScenarios) {
        auto s = load_scenario(scenario_path(name));
        auto qp = make_controller(s);
        auto scan = feasibility_scan(qp, s.sampling.lo, s.sampling.hi, 1000, s.sampling.seed);
        o.require(scan.summary.counterexamples == 0,
                  name + ": " + std::to_string(scan.summary.counterexamples) + " counterexamples");
        const bool driftless = qp.model().is_driftless() && qp.params().nominal.is_zero();
        const bool single = qp.num_cbfs() == 1;
        if (driftless || single) {
            o.require(scan.summary.solver_success == scan.summary.samples,
                      name + ": solver success " + std::to_string(scan.summary.solver_success) + "/" +
                          std::to_string(scan.summary.samples));
        }
        o.detail += (o.detail.empty() ? "" : "; ") + name + " holds " + std::to_string(scan.summary.holds) +
                    ", solved " + std::to_string(scan.summary.solver_success);
    }
    return o;
}

Outcome criterion_verdicts() {
    Outcome o;
    int checked = 0;
    each_boundary_equilibrium([&](const std::string& name, const QpController& qp, const EquilibriumReport& r) {
        if (!r.stability || r.stability->verdict == Verdict::Marginal) return;
        ++checked;
        auto check = spectrum_cross_check(qp, r.x_e, *r.stability);
        double top = -std::numeric_limits<double>::infinity();
        for (const auto& z : check.eigenvalues) top = std::max(top, z.real());
        o.require(check.agreement, name + ": " + to_string(r.stability->verdict) + " verdict at " + fmt_vec(r.x_e) +
                                       " but max Re(eig J_fcl) = " + fmt(top));
    });
    o.require(checked > 0, "no classified equilibria");
    o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(checked) + " equilibria checked";
    return o;
}

Outcome criterion_invariance() {
    Outcome o;
    for (const auto& name : kScenarios) {
        auto s = load_scenario(scenario_path(name));
        auto qp = make_controller(s);
        auto targets = validated_equilibria(analyze_equilibria(qp, s.search));
        auto starts = sample_safe_states(qp, s.sampling.lo, s.sampling.hi, 50, s.sampling.seed);
        double worst[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
        double worst_drop[2] = {0.0, 0.0};
        for (int k = 0; k < 2; ++k) {
            auto settings = make_integration_settings(s, targets);
            settings.dt = k == 0 ? 1e-3 : 5e-4;
            for (const auto& x0 : starts) {
                auto traj = integrate(qp, x0, settings);
                worst[k] = std::min(worst[k], safety_margin(traj));
                // Discretization-induced loss relative to the continuous-time bound h(t) >= h(0) e^{-alpha t}.
                for (std::size_t i = 0; i < traj.size(); ++i) {
                    for (int j = 0; j < qp.num_cbfs(); ++j) {
                        double a = qp.certificates().cbfs()[static_cast<std::size_t>(j)].alpha.gain();
                        double bound = traj.barrier_values[0](j) * std::exp(-a * traj.times[i]);
                        worst_drop[k] = std::max(worst_drop[k], bound - traj.barrier_values[i](j));
                    }
                }
            }
        }
        o.require(worst[0] >= -1e-4, name + ": worst margin " + fmt(worst[0]));
        o.require(worst[1] > worst[0], name + ": halving dt did not improve the worst margin (" + fmt(worst[0]) +
                                           " -> " + fmt(worst[1]) + ")");
        o.detail += (o.detail.empty() ? "" : "; ") + name + " margin " + fmt(worst[0], 9) + " -> " + fmt(worst[1], 9) +
                    ", bound deficit " + fmt(worst_drop[0]) + " -> " + fmt(worst_drop[1]);
    }
    return o;
}

std::string slurp_dir(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) all += f.filename().string() + "\n" + read_text_file(f.string());
    return all;
}

Outcome criterion_determinism() {
    Outcome o;
    const fs::path root = fs::temp_directory_path() / "cbfqp_acceptance_determinism";
    fs::remove_all(root);
    std::string outputs[2];
    for (int run = 0; run < 2; ++run) {
        const fs::path dir = root / std::to_string(run);
        for (const auto& name : kScenarios) {
            for (const char* cmd : {"equilibria", "simulate", "feasibility-scan", "kkt-audit"}) {
                std::vector<std::string> args{"cbfqp", cmd, "--scenario", scenario_path(name), "--out", dir.string()};
                if (std::string(cmd) != "simulate") {
                    args.insert(args.end(), {"--seed", "42"});
                }
                std::vector<const char*> argv;
                for (const auto& a : args) argv.push_back(a.c_str());
                std::ostringstream out;
                std::ostringstream err;
                int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
                o.require(code == 0, name + " " + cmd + " exited " + std::to_string(code));
            }
        }
        outputs[run] = slurp_dir(dir);
    }
    o.require(!outputs[0].empty() && outputs[0] == outputs[1], "outputs differ between runs");
    o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(outputs[0].size()) + " bytes compared";
    fs::remove_all(root);
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* title;
        Outcome (*run)();
    };
    const std::vector<Criterion> criteria{
        {1, "fig1 stable intersection equilibrium and convergence", criterion_fig1},
        {2, "deadlock2d saddle at (3, 0)", criterion_deadlock},
        {3, "KKT audit against the reference oracle", criterion_kkt},
        {4, "closed-loop Jacobian agreement", criterion_jacobians},
        {5, "feasibility certificate soundness", criterion_feasibility},
        {6, "verdict and spectrum consistency", criterion_verdicts},
        {7, "forward invariance under step refinement", criterion_invariance},
        {8, "byte-identical repeated runs", criterion_determinism},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %d: %s (%s)\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
