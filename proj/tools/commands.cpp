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
#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "cbfqp/analysis.hpp"
#include "cbfqp/report.hpp"
#include "cbfqp/scenario.hpp"
#include "cbfqp/simulate.hpp"
#include "json.hpp"

namespace cbfqp::cli {

namespace {

using Json = nlohmann::ordered_json;

std::string artifact(const CommandOptions& opt, const Scenario& s, const std::string& suffix) {
    return (std::filesystem::path(opt.out_dir) / (s.name + suffix)).string();
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw IoError("cannot create output directory '" + dir + "'");
    }
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string vec_str(const Vector& v) {
    std::string s = "(";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        s += (i ? ", " : "") + fmt(v(i));
    }
    return s + ")";
}

Json vec_json(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back(v(i));
    }
    return a;
}

// Maps toolkit exceptions onto the documented exit codes.
int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const ScenarioError& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kIoError;
    } catch (const InvalidParameter& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const ContractViolation& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const Error& e) {
        err << "invariant violation: " << e.what() << '\n';
        return kInvariantViolation;
    }
}

}  // namespace

int cmd_simulate(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Scenario s = load_scenario(opt.scenario);
        if (s.initial_states.empty()) {
            out << "scenario '" << s.name << "' lists no initial states; nothing to simulate\n";
            return static_cast<int>(kSuccess);
        }
        if (opt.x0_index && (*opt.x0_index < 0 || *opt.x0_index >= static_cast<int>(s.initial_states.size()))) {
            err << "error: --x0-index out of range (scenario has " << s.initial_states.size() << " initial states)\n";
            return static_cast<int>(kUsageError);
        }
        ensure_out_dir(opt.out_dir);
        const QpController qp = make_controller(s);
        const std::vector<Vector> equilibria = validated_equilibria(analyze_equilibria(qp, s.search));
        const IntegrationSettings settings = make_integration_settings(s, equilibria);

        Json runs = Json::array();
        int status = kSuccess;
        for (int i = 0; i < static_cast<int>(s.initial_states.size()); ++i) {
            if (opt.x0_index && *opt.x0_index != i) {
                continue;
            }
            const Vector& x0 = s.initial_states[static_cast<std::size_t>(i)];
            Trajectory traj;
            try {
                traj = integrate(qp, x0, settings);
            } catch (const IntegrationError& e) {
                err << "integration error for initial state " << i << ": " << e.what() << '\n';
                status = kInvariantViolation;
                continue;
            }
            const std::string csv = artifact(opt, s, "_traj_" + std::to_string(i) + ".csv");
            write_trajectory_csv(traj, csv);
            const Vector& xf = traj.states.back();
            Json run{{"initial_state_index", i},
                     {"x0", vec_json(x0)},
                     {"csv", std::filesystem::path(csv).filename().string()},
                     {"termination", to_string(traj.termination.kind)},
                     {"t_end", traj.termination.t},
                     {"final_state", vec_json(xf)},
                     {"safety_margin", safety_margin(traj)},
                     {"started_unsafe", traj.started_unsafe}};
            if (traj.termination.kind == TerminationKind::QpInfeasible) {
                run["infeasible_state"] = vec_json(traj.termination.x);
            }
            std::string nearest = "-";
            if (!equilibria.empty()) {
                std::size_t best = 0;
                for (std::size_t k = 1; k < equilibria.size(); ++k) {
                    if ((xf - equilibria[k]).norm() < (xf - equilibria[best]).norm()) {
                        best = k;
                    }
                }
                run["nearest_equilibrium"] = vec_json(equilibria[best]);
                run["distance_to_nearest_equilibrium"] = (xf - equilibria[best]).norm();
                nearest = vec_str(equilibria[best]) + " at distance " + fmt((xf - equilibria[best]).norm());
            }
            if (traj.started_unsafe) {
                err << "warning: initial state " << i << " is outside the safe set\n";
            }
            out << "run " << i << ": " << to_string(traj.termination.kind) << " at t = " << fmt(traj.termination.t)
                << ", final state " << vec_str(xf) << ", safety margin " << fmt(safety_margin(traj))
                << ", nearest equilibrium " << nearest << '\n';
            runs.push_back(run);
        }
        Json summary{{"scenario", s.name},
                     {"scenario_hash", make_provenance(s).scenario_hash},
                     {"toolkit_version", toolkit_version()},
                     {"dt", settings.dt},
                     {"t_final", settings.t_final},
                     {"runs", runs}};
        write_text_file(artifact(opt, s, "_simulate.json"), summary.dump(2) + "\n");
        return status;
    });
}

int cmd_equilibria(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        Scenario s = load_scenario(opt.scenario);
        if (opt.seed) {
            s.search.seed = *opt.seed;
        }
        ensure_out_dir(opt.out_dir);
        const QpController qp = make_controller(s);
        const EquilibriumAnalysis analysis = analyze_equilibria(qp, s.search);
        AnalysisReport report;
        report.provenance = make_provenance(s);
        report.boundary = analysis.boundary;
        report.interior = analysis.interior;
        write_text_file(artifact(opt, s, "_report.json"), report_to_json(report));
        const std::string table = format_equilibria_table(report);
        write_text_file(artifact(opt, s, "_equilibria.txt"), table);
        out << table;
        return static_cast<int>(kSuccess);
    });
}

int cmd_feasibility_scan(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Scenario s = load_scenario(opt.scenario);
        const int samples = opt.samples.value_or(s.sampling.samples);
        const std::uint64_t seed = opt.seed.value_or(s.sampling.seed);
        if (samples < 0) {
            err << "error: --samples must be non-negative\n";
            return static_cast<int>(kUsageError);
        }
        ensure_out_dir(opt.out_dir);
        const QpController qp = make_controller(s);
        const FeasibilityScan scan = feasibility_scan(qp, s.sampling.lo, s.sampling.hi, samples, seed);

        std::ostringstream csv;
        csv << "sample";
        for (int i = 0; i < s.n; ++i) {
            csv << ",x_" << i;
        }
        csv << ",holds,residual,solver_success\n";
        for (std::size_t k = 0; k < scan.rows.size(); ++k) {
            const auto& r = scan.rows[k];
            csv << k;
            for (Eigen::Index i = 0; i < r.x.size(); ++i) {
                csv << ',' << fmt(r.x(i));
            }
            csv << ',' << (r.holds ? 1 : 0) << ',' << fmt(r.residual) << ',' << (r.solver_success ? 1 : 0) << '\n';
        }
        write_text_file(artifact(opt, s, "_feasibility.csv"), csv.str());
        AnalysisReport report;
        report.provenance = make_provenance(s);
        report.feasibility = scan.summary;
        write_text_file(artifact(opt, s, "_feasibility.json"), report_to_json(report));

        out << "feasibility scan of '" << s.name << "': " << samples << " samples, condition holds on "
            << scan.summary.holds << ", solver success on " << scan.summary.solver_success << ", counterexamples "
            << scan.summary.counterexamples << '\n';
        if (scan.summary.counterexamples > 0) {
            for (const auto& r : scan.rows) {
                if (r.holds && !r.solver_success) {
                    err << "soundness violation: feasibility condition holds but the QP failed at x = "
                        << vec_str(r.x) << '\n';
                    break;
                }
            }
            return static_cast<int>(kInvariantViolation);
        }
        return static_cast<int>(kSuccess);
    });
}

int cmd_kkt_audit(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Scenario s = load_scenario(opt.scenario);
        const int samples = opt.samples.value_or(s.sampling.samples);
        const std::uint64_t seed = opt.seed.value_or(s.sampling.seed);
        if (samples < 0) {
            err << "error: --samples must be non-negative\n";
            return static_cast<int>(kUsageError);
        }
        ensure_out_dir(opt.out_dir);
        if (samples == 0) {
            err << "warning: zero samples requested; the audit passes vacuously\n";
        }
        const QpController qp = make_controller(s);
        const KktAudit audit = kkt_audit(qp, s.sampling.lo, s.sampling.hi, samples, seed);
        AnalysisReport report;
        report.provenance = make_provenance(s);
        report.kkt_audit = audit.summary;
        write_text_file(artifact(opt, s, "_kkt_audit.json"), report_to_json(report));
        const auto& a = audit.summary;
        out << "kkt audit of '" << s.name << "' (" << a.oracle_method << "): " << a.samples
            << " samples, max |du| = " << fmt(a.max_u_disagreement) << ", max residuals (stationarity "
            << fmt(a.max_stationarity) << ", primal " << fmt(a.max_primal) << ", dual " << fmt(a.max_dual)
            << ", complementarity " << fmt(a.max_complementarity) << "), failures " << a.failures() << '\n';
        if (a.failures() > 0) {
            err << "audit failure at x = " << vec_str(*audit.first_failure) << ": " << audit.first_failure_reason
                << '\n';
            return static_cast<int>(kInvariantViolation);
        }
        return static_cast<int>(kSuccess);
    });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Safety-filter / CLF-CBF quadratic program analysis toolkit", "cbfqp"};
    app.set_version_flag("--version", std::string(toolkit_version()));
    app.require_subcommand(1);

    CommandOptions opt;
    std::uint64_t seed = 0;
    int samples = 0;
    int x0_index = 0;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--scenario", opt.scenario, "Scenario file")->required();
        sub->add_option("--out", opt.out_dir, "Output directory")->capture_default_str();
    };
    auto* sim = app.add_subcommand("simulate", "Integrate the closed loop from the scenario's initial states");
    common(sim);
    auto* x0_opt = sim->add_option("--x0-index", x0_index, "Simulate only this initial state (0-based)");
    auto* eq = app.add_subcommand("equilibria", "Locate, validate and classify equilibria");
    common(eq);
    auto* eq_seed = eq->add_option("--seed", seed, "Multistart seed");
    auto* scan = app.add_subcommand("feasibility-scan", "Check the feasibility certificate against the solver");
    common(scan);
    auto* scan_seed = scan->add_option("--seed", seed, "Sampling seed");
    auto* scan_samples = scan->add_option("--samples", samples, "Number of random states");
    auto* audit = app.add_subcommand("kkt-audit", "Compare the solver with the reference oracle");
    common(audit);
    auto* audit_seed = audit->add_option("--seed", seed, "Sampling seed");
    auto* audit_samples = audit->add_option("--samples", samples, "Number of random states");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? static_cast<int>(kSuccess) : static_cast<int>(kUsageError);
    }
    if (*x0_opt) {
        opt.x0_index = x0_index;
    }
    if (*eq_seed || *scan_seed || *audit_seed) {
        opt.seed = seed;
    }
    if (*scan_samples || *audit_samples) {
        opt.samples = samples;
    }
    if (sim->parsed()) {
        return cmd_simulate(opt, out, err);
    }
    if (eq->parsed()) {
        return cmd_equilibria(opt, out, err);
    }
    if (scan->parsed()) {
        return cmd_feasibility_scan(opt, out, err);
    }
    return cmd_kkt_audit(opt, out, err);
}

}  // namespace cbfqp::cli
