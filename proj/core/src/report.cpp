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
#include "cbfqp/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#ifndef CBFQP_VERSION
#define CBFQP_VERSION "0.0.0"
#endif

namespace cbfqp {

using Json = nlohmann::ordered_json;

const char* toolkit_version() { return CBFQP_VERSION; }

namespace {

Json vec_json(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back(v(i));
    }
    return a;
}

Vector vec_from(const Json& j) {
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
    }
    return v;
}

// Tolerances travel as an object keyed by field name.
Json tolerances_json(const Tolerances& t) {
    return Json{{"active", t.active},
                {"multiplier_clamp", t.multiplier_clamp},
                {"primal", t.primal},
                {"image", t.image},
                {"rank", t.rank},
                {"equilibrium", t.equilibrium},
                {"dedup", t.dedup},
                {"interior", t.interior},
                {"negative_multiplier", t.negative_multiplier},
                {"newton", t.newton},
                {"stability", t.stability},
                {"spectrum", t.spectrum},
                {"fd_step", t.fd_step},
                {"max_schur_condition", t.max_schur_condition}};
}

Tolerances tolerances_from(const Json& j) {
    Tolerances t;
    t.active = j.at("active").get<double>();
    t.multiplier_clamp = j.at("multiplier_clamp").get<double>();
    t.primal = j.at("primal").get<double>();
    t.image = j.at("image").get<double>();
    t.rank = j.at("rank").get<double>();
    t.equilibrium = j.at("equilibrium").get<double>();
    t.dedup = j.at("dedup").get<double>();
    t.interior = j.at("interior").get<double>();
    t.negative_multiplier = j.at("negative_multiplier").get<double>();
    t.newton = j.at("newton").get<double>();
    t.stability = j.at("stability").get<double>();
    t.spectrum = j.at("spectrum").get<double>();
    t.fd_step = j.at("fd_step").get<double>();
    t.max_schur_condition = j.at("max_schur_condition").get<double>();
    return t;
}

Json verdict_json(const StabilityVerdict& v) {
    Json spectrum = Json::array();
    for (const auto& z : v.spectrum_fcl) {
        spectrum.push_back(Json::array({z.real(), z.imag()}));
    }
    Json j{{"verdict", to_string(v.verdict)}};
    j["mu_max"] = v.mu_max ? Json(*v.mu_max) : Json(nullptr);
    j["witness_v"] = v.witness_v ? vec_json(*v.witness_v) : Json(nullptr);
    j["spectrum_fcl"] = spectrum;
    return j;
}

StabilityVerdict verdict_from(const Json& j) {
    StabilityVerdict v;
    v.verdict = verdict_from_string(j.at("verdict").get<std::string>());
    if (!j.at("mu_max").is_null()) {
        v.mu_max = j.at("mu_max").get<double>();
    }
    if (!j.at("witness_v").is_null()) {
        v.witness_v = vec_from(j.at("witness_v"));
    }
    for (const auto& z : j.at("spectrum_fcl")) {
        v.spectrum_fcl.emplace_back(z.at(0).get<double>(), z.at(1).get<double>());
    }
    return v;
}

Json equilibrium_json(const EquilibriumReport& r) {
    Json active = Json::array();
    for (const int i : r.active) {
        active.push_back(i + 1);
    }
    Json j{{"kind", to_string(r.kind)},
           {"active_set", active},
           {"x_e", vec_json(r.x_e)},
           {"lambda_e", vec_json(r.lambda_e)},
           {"lambda0_e", r.lambda0_e},
           {"residual_f", r.residual_f},
           {"residual_h", r.residual_h},
           {"validated_in_S_A", r.validated_in_S_A},
           {"degenerate", r.degenerate},
           {"validation_note", r.validation_note}};
    j["stability"] = r.stability ? verdict_json(*r.stability) : Json(nullptr);
    return j;
}

EquilibriumReport equilibrium_from(const Json& j) {
    EquilibriumReport r;
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "boundary" && kind != "interior") {
        throw InvalidParameter("unknown equilibrium kind '" + kind + "'");
    }
    r.kind = kind == "boundary" ? EquilibriumKind::Boundary : EquilibriumKind::Interior;
    for (const auto& i : j.at("active_set")) {
        r.active.push_back(i.get<int>() - 1);
    }
    r.x_e = vec_from(j.at("x_e"));
    r.lambda_e = vec_from(j.at("lambda_e"));
    r.lambda0_e = j.at("lambda0_e").get<double>();
    r.residual_f = j.at("residual_f").get<double>();
    r.residual_h = j.at("residual_h").get<double>();
    r.validated_in_S_A = j.at("validated_in_S_A").get<bool>();
    r.degenerate = j.at("degenerate").get<bool>();
    r.validation_note = j.at("validation_note").get<std::string>();
    if (!j.at("stability").is_null()) {
        r.stability = verdict_from(j.at("stability"));
    }
    return r;
}

}  // namespace

Provenance make_provenance(const Scenario& s) {
    return {s.name, fnv1a64_hex(serialize_scenario(s)), toolkit_version(), s.tolerances};
}

std::string report_to_json(const AnalysisReport& report) {
    Json root;
    root["schema"] = kReportSchema;
    root["provenance"] = Json{{"scenario_name", report.provenance.scenario_name},
                              {"scenario_hash", report.provenance.scenario_hash},
                              {"toolkit_version", report.provenance.toolkit_version},
                              {"tolerances", tolerances_json(report.provenance.tolerances)}};
    Json boundary = Json::array();
    for (const auto& set : report.boundary) {
        Json idx = Json::array();
        for (const int i : set.indices) {
            idx.push_back(i + 1);
        }
        Json eqs = Json::array();
        for (const auto& e : set.equilibria) {
            eqs.push_back(equilibrium_json(e));
        }
        boundary.push_back(Json{{"active_set", idx}, {"equilibria", eqs}});
    }
    root["boundary"] = boundary;
    Json interior = Json::array();
    for (const auto& e : report.interior) {
        interior.push_back(equilibrium_json(e));
    }
    root["interior"] = interior;
    if (report.feasibility) {
        const auto& f = *report.feasibility;
        root["feasibility_scan"] = Json{{"samples", f.samples},
                                        {"seed", f.seed},
                                        {"holds", f.holds},
                                        {"solver_success", f.solver_success},
                                        {"counterexamples", f.counterexamples}};
    } else {
        root["feasibility_scan"] = nullptr;
    }
    if (report.kkt_audit) {
        const auto& k = *report.kkt_audit;
        root["kkt_audit"] = Json{{"samples", k.samples},
                                 {"seed", k.seed},
                                 {"oracle_method", k.oracle_method},
                                 {"u_tolerance", k.u_tolerance},
                                 {"residual_tolerance", k.residual_tolerance},
                                 {"max_u_disagreement", k.max_u_disagreement},
                                 {"max_delta_disagreement", k.max_delta_disagreement},
                                 {"max_stationarity", k.max_stationarity},
                                 {"max_primal", k.max_primal},
                                 {"max_dual", k.max_dual},
                                 {"max_complementarity", k.max_complementarity},
                                 {"both_infeasible", k.both_infeasible},
                                 {"feasibility_disagreements", k.feasibility_disagreements},
                                 {"u_disagreements", k.u_disagreements},
                                 {"residual_violations", k.residual_violations},
                                 {"oracle_failures", k.oracle_failures}};
    } else {
        root["kkt_audit"] = nullptr;
    }
    return root.dump(2) + "\n";
}

AnalysisReport report_from_json(const std::string& text) {
    try {
        const Json root = Json::parse(text);
        if (root.at("schema").get<std::string>() != kReportSchema) {
            throw InvalidParameter("unsupported report schema");
        }
        AnalysisReport r;
        const Json& prov = root.at("provenance");
        r.provenance.scenario_name = prov.at("scenario_name").get<std::string>();
        r.provenance.scenario_hash = prov.at("scenario_hash").get<std::string>();
        r.provenance.toolkit_version = prov.at("toolkit_version").get<std::string>();
        r.provenance.tolerances = tolerances_from(prov.at("tolerances"));
        for (const auto& set : root.at("boundary")) {
            ActiveSetResult res;
            for (const auto& i : set.at("active_set")) {
                res.indices.push_back(i.get<int>() - 1);
            }
            for (const auto& e : set.at("equilibria")) {
                res.equilibria.push_back(equilibrium_from(e));
            }
            r.boundary.push_back(std::move(res));
        }
        for (const auto& e : root.at("interior")) {
            r.interior.push_back(equilibrium_from(e));
        }
        if (const Json& f = root.at("feasibility_scan"); !f.is_null()) {
            FeasibilityScanSummary s;
            s.samples = f.at("samples").get<int>();
            s.seed = f.at("seed").get<std::uint64_t>();
            s.holds = f.at("holds").get<int>();
            s.solver_success = f.at("solver_success").get<int>();
            s.counterexamples = f.at("counterexamples").get<int>();
            r.feasibility = s;
        }
        if (const Json& k = root.at("kkt_audit"); !k.is_null()) {
            KktAuditSummary s;
            s.samples = k.at("samples").get<int>();
            s.seed = k.at("seed").get<std::uint64_t>();
            s.oracle_method = k.at("oracle_method").get<std::string>();
            s.u_tolerance = k.at("u_tolerance").get<double>();
            s.residual_tolerance = k.at("residual_tolerance").get<double>();
            s.max_u_disagreement = k.at("max_u_disagreement").get<double>();
            s.max_delta_disagreement = k.at("max_delta_disagreement").get<double>();
            s.max_stationarity = k.at("max_stationarity").get<double>();
            s.max_primal = k.at("max_primal").get<double>();
            s.max_dual = k.at("max_dual").get<double>();
            s.max_complementarity = k.at("max_complementarity").get<double>();
            s.both_infeasible = k.at("both_infeasible").get<int>();
            s.feasibility_disagreements = k.at("feasibility_disagreements").get<int>();
            s.u_disagreements = k.at("u_disagreements").get<int>();
            s.residual_violations = k.at("residual_violations").get<int>();
            s.oracle_failures = k.at("oracle_failures").get<int>();
            r.kkt_audit = s;
        }
        return r;
    } catch (const Json::exception& e) {
        throw InvalidParameter(std::string("malformed report: ") + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    out << contents;
    if (!out) {
        throw IoError("failed writing '" + path + "'");
    }
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string format_equilibria_table(const AnalysisReport& report) {
    std::ostringstream os;
    char line[512];
    std::snprintf(line, sizeof line, "%-10s %-9s %-40s %-26s %-10s %-12s %s\n", "kind", "set", "x_e", "lambda_e",
                  "verdict", "mu_max", "note");
    os << line;
    auto vec_str = [](const Vector& v) {
        std::string s = "(";
        char b[32];
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            std::snprintf(b, sizeof b, "%s%.6g", i ? ", " : "", v(i));
            s += b;
        }
        return s + ")";
    };
    auto row = [&](const EquilibriumReport& e) {
        std::string set = "{";
        for (std::size_t i = 0; i < e.active.size(); ++i) {
            set += (i ? "," : "") + std::to_string(e.active[i] + 1);
        }
        set += "}";
        std::string verdict = e.stability ? to_string(e.stability->verdict) : "-";
        char mu[32] = "-";
        if (e.stability && e.stability->mu_max) {
            std::snprintf(mu, sizeof mu, "%.6g", *e.stability->mu_max);
        }
        std::snprintf(line, sizeof line, "%-10s %-9s %-40s %-26s %-10s %-12s %s\n", to_string(e.kind).c_str(),
                      set.c_str(), vec_str(e.x_e).c_str(), vec_str(e.lambda_e).c_str(), verdict.c_str(), mu,
                      e.validation_note.c_str());
        os << line;
    };
    for (const auto& set : report.boundary) {
        for (const auto& e : set.equilibria) {
            row(e);
        }
    }
    for (const auto& e : report.interior) {
        row(e);
    }
    return os.str();
}

}  // namespace cbfqp
