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
#include "cbfqp/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cbfqp {

using Json = nlohmann::ordered_json;

namespace {

bool same_opt(const std::optional<Matrix>& a, const std::optional<Matrix>& b) {
    return a.has_value() == b.has_value() && (!a || same_values(*a, *b));
}

bool same_list(const std::vector<Vector>& a, const std::vector<Vector>& b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](const auto& x, const auto& y) {
               return same_values(x, y);
           });
}

// Tolerance fields addressable from scenario files.
const std::vector<std::pair<const char*, double Tolerances::*>>& tolerance_fields() {
    static const std::vector<std::pair<const char*, double Tolerances::*>> fields = {
        {"active", &Tolerances::active},
        {"multiplier_clamp", &Tolerances::multiplier_clamp},
        {"primal", &Tolerances::primal},
        {"image", &Tolerances::image},
        {"rank", &Tolerances::rank},
        {"equilibrium", &Tolerances::equilibrium},
        {"dedup", &Tolerances::dedup},
        {"interior", &Tolerances::interior},
        {"negative_multiplier", &Tolerances::negative_multiplier},
        {"newton", &Tolerances::newton},
        {"stability", &Tolerances::stability},
        {"spectrum", &Tolerances::spectrum},
        {"fd_step", &Tolerances::fd_step},
        {"max_schur_condition", &Tolerances::max_schur_condition},
    };
    return fields;
}

bool is_symmetric(const Matrix& m) {
    return m.rows() == m.cols() &&
           (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
}

bool is_spd(const Matrix& m) { return is_symmetric(m) && Eigen::LLT<Matrix>(m).info() == Eigen::Success; }

class Reader {
  public:
    std::vector<std::string> errors;

    void error(const std::string& path, const std::string& msg) { errors.push_back(path + ": " + msg); }

    static std::string join(const std::string& path, const std::string& key) {
        return path.empty() ? key : path + "." + key;
    }

    bool expect_object(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) {
        if (!j.is_object()) {
            error(path.empty() ? "<root>" : path, "expected an object");
            return false;
        }
        for (const auto& item : j.items()) {
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; })) {
                error(join(path, item.key()), "unknown key");
            }
        }
        return true;
    }

    const Json* field(const Json& obj, const char* key, const std::string& path, bool required) {
        const auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) {
            if (required) {
                error(join(path, key), "missing required field");
            }
            return nullptr;
        }
        return &*it;
    }

    std::optional<double> number(const Json* j, const std::string& path) {
        if (!j) {
            return std::nullopt;
        }
        if (!j->is_number()) {
            error(path, "expected a number");
            return std::nullopt;
        }
        const double v = j->get<double>();
        if (!std::isfinite(v)) {
            error(path, "must be finite");
            return std::nullopt;
        }
        return v;
    }

    std::optional<double> positive(const Json* j, const std::string& path, const std::string& what) {
        auto v = number(j, path);
        if (v && !(*v > 0.0)) {
            error(path, what + " must be positive");
            return std::nullopt;
        }
        return v;
    }

    std::optional<std::int64_t> integer(const Json* j, const std::string& path, std::int64_t lo) {
        if (!j) {
            return std::nullopt;
        }
        if (!j->is_number_integer()) {
            error(path, "expected an integer");
            return std::nullopt;
        }
        const auto v = j->get<std::int64_t>();
        if (v < lo) {
            error(path, "must be at least " + std::to_string(lo));
            return std::nullopt;
        }
        return v;
    }

    std::optional<std::uint64_t> unsigned64(const Json* j, const std::string& path) {
        if (!j) {
            return std::nullopt;
        }
        if (!j->is_number_unsigned()) {
            error(path, "expected a non-negative integer");
            return std::nullopt;
        }
        return j->get<std::uint64_t>();
    }

    std::optional<std::string> string(const Json* j, const std::string& path) {
        if (!j) {
            return std::nullopt;
        }
        if (!j->is_string()) {
            error(path, "expected a string");
            return std::nullopt;
        }
        return j->get<std::string>();
    }

    std::optional<Vector> vector(const Json* j, const std::string& path, int expected) {
        if (!j) {
            return std::nullopt;
        }
        if (!j->is_array()) {
            error(path, "expected an array of numbers");
            return std::nullopt;
        }
        Vector v(static_cast<Eigen::Index>(j->size()));
        bool ok = true;
        for (std::size_t i = 0; i < j->size(); ++i) {
            const auto x = number(&(*j)[i], path + "[" + std::to_string(i) + "]");
            ok = ok && x.has_value();
            if (x) {
                v(static_cast<Eigen::Index>(i)) = *x;
            }
        }
        if (!ok) {
            return std::nullopt;
        }
        if (expected >= 0 && v.size() != expected) {
            error(path, "dimension mismatch: expected " + std::to_string(expected) + " entries, got " +
                            std::to_string(v.size()));
            return std::nullopt;
        }
        return v;
    }

    std::optional<Matrix> matrix(const Json* j, const std::string& path, int rows, int cols) {
        if (!j) {
            return std::nullopt;
        }
        if (!j->is_array() || j->empty()) {
            error(path, "expected a non-empty array of rows");
            return std::nullopt;
        }
        const auto r = static_cast<Eigen::Index>(j->size());
        Matrix m;
        for (Eigen::Index i = 0; i < r; ++i) {
            const auto row = vector(&(*j)[static_cast<std::size_t>(i)], path + "[" + std::to_string(i) + "]", -1);
            if (!row) {
                return std::nullopt;
            }
            if (i == 0) {
                m.resize(r, row->size());
            } else if (row->size() != m.cols()) {
                error(path, "rows have different lengths");
                return std::nullopt;
            }
            m.row(i) = row->transpose();
        }
        if ((rows >= 0 && m.rows() != rows) || (cols >= 0 && m.cols() != cols)) {
            error(path, "dimension mismatch: expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                            ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
            return std::nullopt;
        }
        return m;
    }
};

Json to_json(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back(v(i));
    }
    return a;
}

Json to_json(const Matrix& m) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        a.push_back(to_json(Vector(m.row(i).transpose())));
    }
    return a;
}

void default_sampling_box(Scenario& s) {
    Vector lo = Vector::Zero(s.n);
    Vector hi = Vector::Zero(s.n);
    auto extend = [&](const Vector& c) {
        if (c.size() == s.n) {
            lo = lo.cwiseMin(c);
            hi = hi.cwiseMax(c);
        }
    };
    if (s.clf) {
        extend(s.clf->center);
    }
    for (const auto& b : s.cbfs) {
        extend(b.center);
    }
    const double pad = std::max(2.0, 0.5 * (hi - lo).maxCoeff());
    s.sampling.lo = lo.array() - pad;
    s.sampling.hi = hi.array() + pad;
}

std::string line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

bool operator==(const Scenario& a, const Scenario& b) {
    auto clf_eq = [](const std::optional<ScenarioClf>& x, const std::optional<ScenarioClf>& y) {
        return x.has_value() == y.has_value() &&
               (!x || (same_values(x->shape, y->shape) && same_values(x->center, y->center) && x->gamma == y->gamma));
    };
    auto cbf_eq = [](const ScenarioCbf& x, const ScenarioCbf& y) {
        return same_values(x.shape, y.shape) && same_values(x.center, y.center) && x.offset == y.offset &&
               x.alpha == y.alpha;
    };
    auto conv_eq = [](const std::optional<ScenarioConvergence>& x, const std::optional<ScenarioConvergence>& y) {
        return x.has_value() == y.has_value() &&
               (!x || (x->use_equilibria == y->use_equilibria && same_list(x->targets, y->targets) &&
                       x->tol == y->tol && x->window == y->window));
    };
    return a.name == b.name && a.description == b.description && a.n == b.n && a.m == b.m &&
           same_opt(a.drift_a, b.drift_a) && same_values(a.g, b.g) && same_opt(a.nominal_k, b.nominal_k) &&
           a.mode == b.mode && a.p == b.p && same_values(a.h_metric, b.h_metric) && clf_eq(a.clf, b.clf) &&
           a.cbfs.size() == b.cbfs.size() && std::equal(a.cbfs.begin(), a.cbfs.end(), b.cbfs.begin(), cbf_eq) &&
           same_list(a.initial_states, b.initial_states) && a.dt == b.dt && a.t_final == b.t_final &&
           conv_eq(a.convergence, b.convergence) && a.search == b.search && same_values(a.sampling.lo, b.sampling.lo) &&
           same_values(a.sampling.hi, b.sampling.hi) && a.sampling.samples == b.sampling.samples &&
           a.sampling.seed == b.sampling.seed && a.tolerances == b.tolerances;
}

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
    std::string msg = "invalid scenario (" + std::to_string(errors.size()) + " error" +
                      (errors.size() == 1 ? "" : "s") + ")";
    for (const auto& e : errors) {
        msg += "\n  " + e;
    }
    return msg;
}

}  // namespace

ScenarioError::ScenarioError(std::vector<std::string> errors)
    : InvalidParameter(join_errors(errors)), errors_(std::move(errors)) {}

Scenario parse_scenario(const std::string& text) {
    Json root;
    try {
        root = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ScenarioError({"parse error at " + line_column(text, e.byte) + ": " + e.what()});
    }
    Reader rd;
    Scenario s;
    if (!rd.expect_object(root, "", {"schema", "name", "description", "dynamics", "nominal", "controller", "clf",
                                     "cbfs", "initial_states", "integration", "search", "sampling", "tolerances"})) {
        throw ScenarioError(rd.errors);
    }
    if (const auto schema = rd.string(rd.field(root, "schema", "", true), "schema");
        schema && *schema != kScenarioSchema) {
        rd.error("schema", "unsupported schema '" + *schema + "' (expected '" + kScenarioSchema + "')");
    }
    if (const auto name = rd.string(rd.field(root, "name", "", true), "name")) {
        if (name->empty()) {
            rd.error("name", "must not be empty");
        }
        s.name = *name;
    }
    s.description = rd.string(rd.field(root, "description", "", false), "description").value_or("");

    // Dimensions come first; later checks skip dimension tests when they are unknown.
    int n = -1;
    int m = -1;
    if (const Json* dyn = rd.field(root, "dynamics", "", true);
        dyn && rd.expect_object(*dyn, "dynamics", {"n", "m", "drift", "input"})) {
        n = static_cast<int>(rd.integer(rd.field(*dyn, "n", "dynamics", true), "dynamics.n", 1).value_or(-1));
        m = static_cast<int>(rd.integer(rd.field(*dyn, "m", "dynamics", true), "dynamics.m", 1).value_or(-1));
        if (const Json* drift = rd.field(*dyn, "drift", "dynamics", false);
            drift && rd.expect_object(*drift, "dynamics.drift", {"type", "A"})) {
            const auto type = rd.string(rd.field(*drift, "type", "dynamics.drift", true), "dynamics.drift.type");
            if (type == "linear") {
                s.drift_a = rd.matrix(rd.field(*drift, "A", "dynamics.drift", true), "dynamics.drift.A", n, n);
            } else if (type == "zero") {
                if (drift->contains("A")) {
                    rd.error("dynamics.drift.A", "not allowed for a zero drift");
                }
            } else if (type) {
                rd.error("dynamics.drift.type", "expected 'zero' or 'linear'");
            }
        }
        if (const Json* input = rd.field(*dyn, "input", "dynamics", true);
            input && rd.expect_object(*input, "dynamics.input", {"type", "g"})) {
            const auto type = rd.string(rd.field(*input, "type", "dynamics.input", true), "dynamics.input.type");
            if (type && *type != "constant") {
                rd.error("dynamics.input.type", "expected 'constant'");
            }
            if (auto g = rd.matrix(rd.field(*input, "g", "dynamics.input", true), "dynamics.input.g", n, m)) {
                s.g = *g;
            }
        }
    }
    s.n = n;
    s.m = m;

    if (const Json* nom = rd.field(root, "nominal", "", false);
        nom && rd.expect_object(*nom, "nominal", {"type", "K"})) {
        const auto type = rd.string(rd.field(*nom, "type", "nominal", true), "nominal.type");
        if (type == "linear_feedback") {
            s.nominal_k = rd.matrix(rd.field(*nom, "K", "nominal", true), "nominal.K", m, n);
        } else if (type == "zero") {
            if (nom->contains("K")) {
                rd.error("nominal.K", "not allowed for a zero nominal controller");
            }
        } else if (type) {
            rd.error("nominal.type", "expected 'zero' or 'linear_feedback'");
        }
    }

    if (const Json* ctl = rd.field(root, "controller", "", true);
        ctl && rd.expect_object(*ctl, "controller", {"mode", "p", "H"})) {
        if (const auto mode = rd.string(rd.field(*ctl, "mode", "controller", true), "controller.mode")) {
            try {
                s.mode = controller_mode_from_string(*mode);
            } catch (const InvalidParameter&) {
                rd.error("controller.mode", "expected 'safety_filter', 'clf_cbf' or 'generalized'");
            }
        }
        if (const auto p = rd.number(rd.field(*ctl, "p", "controller", true), "controller.p")) {
            if (!(*p > 0.0)) {
                rd.error("controller.p", "p must be positive");
            }
            s.p = *p;
        }
        if (const Json* h = rd.field(*ctl, "H", "controller", false)) {
            if (auto hm = rd.matrix(h, "controller.H", m, m)) {
                if (!is_spd(*hm)) {
                    rd.error("controller.H", "H is not symmetric positive definite");
                }
                s.h_metric = *hm;
            }
        } else if (m > 0) {
            s.h_metric = Matrix::Identity(m, m);
        }
    }

    if (const Json* clf = rd.field(root, "clf", "", false);
        clf && rd.expect_object(*clf, "clf", {"shape", "center", "gamma"})) {
        ScenarioClf c;
        auto shape = rd.matrix(rd.field(*clf, "shape", "clf", true), "clf.shape", n, n);
        auto center = rd.vector(rd.field(*clf, "center", "clf", true), "clf.center", n);
        auto gamma = rd.positive(rd.field(*clf, "gamma", "clf", false), "clf.gamma", "gamma");
        if (shape && !is_spd(*shape)) {
            rd.error("clf.shape", "CLF shape must be symmetric positive definite");
        }
        if (shape && center) {
            c.shape = *shape;
            c.center = *center;
            c.gamma = gamma.value_or(1.0);
            s.clf = c;
        }
    }

    if (const Json* cbfs = rd.field(root, "cbfs", "", true)) {
        if (!cbfs->is_array()) {
            rd.error("cbfs", "expected an array");
        } else {
            if (cbfs->empty()) {
                rd.error("cbfs", "at least one CBF is required");
            }
            if (cbfs->size() > static_cast<std::size_t>(kMaxBarriers)) {
                rd.error("cbfs", "at most " + std::to_string(kMaxBarriers) + " CBFs are supported");
            }
            for (std::size_t i = 0; i < cbfs->size(); ++i) {
                const std::string path = "cbfs[" + std::to_string(i) + "]";
                const Json& b = (*cbfs)[i];
                if (!rd.expect_object(b, path, {"shape", "center", "offset", "alpha"})) {
                    continue;
                }
                auto shape = rd.matrix(rd.field(b, "shape", path, true), path + ".shape", n, n);
                auto center = rd.vector(rd.field(b, "center", path, true), path + ".center", n);
                auto offset = rd.number(rd.field(b, "offset", path, true), path + ".offset");
                auto alpha = rd.positive(rd.field(b, "alpha", path, false), path + ".alpha", "alpha");
                if (shape && !is_symmetric(*shape)) {
                    rd.error(path + ".shape", "must be symmetric");
                }
                if (shape && center && offset) {
                    s.cbfs.push_back({*shape, *center, *offset, alpha.value_or(1.0)});
                }
            }
        }
    }

    if (const Json* xs = rd.field(root, "initial_states", "", false)) {
        if (!xs->is_array()) {
            rd.error("initial_states", "expected an array of states");
        } else {
            for (std::size_t i = 0; i < xs->size(); ++i) {
                if (auto v = rd.vector(&(*xs)[i], "initial_states[" + std::to_string(i) + "]", n)) {
                    s.initial_states.push_back(*v);
                }
            }
        }
    }

    if (const Json* integ = rd.field(root, "integration", "", false);
        integ && rd.expect_object(*integ, "integration", {"dt", "t_final", "convergence"})) {
        s.dt = rd.positive(rd.field(*integ, "dt", "integration", false), "integration.dt", "dt").value_or(s.dt);
        s.t_final = rd.positive(rd.field(*integ, "t_final", "integration", false), "integration.t_final", "t_final")
                        .value_or(s.t_final);
        if (const Json* conv = rd.field(*integ, "convergence", "integration", false);
            conv && rd.expect_object(*conv, "integration.convergence", {"targets", "tol", "window"})) {
            ScenarioConvergence c;
            const std::string path = "integration.convergence";
            if (const Json* t = rd.field(*conv, "targets", path, true)) {
                if (t->is_string()) {
                    if (t->get<std::string>() == "equilibria") {
                        c.use_equilibria = true;
                    } else {
                        rd.error(path + ".targets", "expected \"equilibria\" or a list of states");
                    }
                } else if (t->is_array()) {
                    for (std::size_t i = 0; i < t->size(); ++i) {
                        if (auto v = rd.vector(&(*t)[i], path + ".targets[" + std::to_string(i) + "]", n)) {
                            c.targets.push_back(*v);
                        }
                    }
                } else {
                    rd.error(path + ".targets", "expected \"equilibria\" or a list of states");
                }
            }
            c.tol = rd.positive(rd.field(*conv, "tol", path, false), path + ".tol", "tol").value_or(c.tol);
            c.window = static_cast<int>(rd.integer(rd.field(*conv, "window", path, false), path + ".window", 1)
                                            .value_or(c.window));
            s.convergence = c;
        }
    }

    if (const Json* search = rd.field(root, "search", "", false);
        search && rd.expect_object(*search, "search",
                                   {"boundary_seeds", "interior_seeds", "seed", "max_iterations", "max_halvings",
                                    "box"})) {
        auto& sc = s.search;
        sc.boundary_seeds = static_cast<int>(
            rd.integer(rd.field(*search, "boundary_seeds", "search", false), "search.boundary_seeds", 1)
                .value_or(sc.boundary_seeds));
        sc.interior_seeds = static_cast<int>(
            rd.integer(rd.field(*search, "interior_seeds", "search", false), "search.interior_seeds", 0)
                .value_or(sc.interior_seeds));
        sc.seed = rd.unsigned64(rd.field(*search, "seed", "search", false), "search.seed").value_or(sc.seed);
        sc.max_iterations = static_cast<int>(
            rd.integer(rd.field(*search, "max_iterations", "search", false), "search.max_iterations", 1)
                .value_or(sc.max_iterations));
        sc.max_halvings = static_cast<int>(
            rd.integer(rd.field(*search, "max_halvings", "search", false), "search.max_halvings", 0)
                .value_or(sc.max_halvings));
        if (const Json* box = rd.field(*search, "box", "search", false);
            box && rd.expect_object(*box, "search.box", {"lo", "hi"})) {
            auto lo = rd.vector(rd.field(*box, "lo", "search.box", true), "search.box.lo", n);
            auto hi = rd.vector(rd.field(*box, "hi", "search.box", true), "search.box.hi", n);
            if (lo && hi) {
                if (!(lo->array() < hi->array()).all()) {
                    rd.error("search.box", "lo must be below hi in every coordinate");
                }
                sc.box_lo = *lo;
                sc.box_hi = *hi;
            }
        }
    }

    bool sampling_box = false;
    if (const Json* samp = rd.field(root, "sampling", "", false);
        samp && rd.expect_object(*samp, "sampling", {"lo", "hi", "samples", "seed"})) {
        auto lo = rd.vector(rd.field(*samp, "lo", "sampling", true), "sampling.lo", n);
        auto hi = rd.vector(rd.field(*samp, "hi", "sampling", true), "sampling.hi", n);
        if (lo && hi) {
            if (!(lo->array() < hi->array()).all()) {
                rd.error("sampling", "lo must be below hi in every coordinate");
            }
            s.sampling.lo = *lo;
            s.sampling.hi = *hi;
            sampling_box = true;
        }
        s.sampling.samples = static_cast<int>(
            rd.integer(rd.field(*samp, "samples", "sampling", false), "sampling.samples", 0).value_or(s.sampling.samples));
        s.sampling.seed = rd.unsigned64(rd.field(*samp, "seed", "sampling", false), "sampling.seed").value_or(s.sampling.seed);
    }

    if (const Json* tol = rd.field(root, "tolerances", "", false)) {
        if (!tol->is_object()) {
            rd.error("tolerances", "expected an object");
        } else {
            for (const auto& item : tol->items()) {
                const auto& fields = tolerance_fields();
                const auto it = std::find_if(fields.begin(), fields.end(),
                                             [&](const auto& f) { return item.key() == f.first; });
                const std::string path = "tolerances." + item.key();
                if (it == fields.end()) {
                    rd.error(path, "unknown key");
                    continue;
                }
                if (auto v = rd.positive(&item.value(), path, item.key())) {
                    s.tolerances.*(it->second) = *v;
                }
            }
        }
    }

    // Cross-field rules.
    switch (s.mode) {
        case ControllerMode::SafetyFilter:
            if (root.contains("clf") && !root["clf"].is_null()) {
                rd.error("clf", "safety_filter mode requires the CLF to be absent");
            }
            break;
        case ControllerMode::ClfCbf:
            if (!root.contains("clf") || root["clf"].is_null()) {
                rd.error("clf", "clf_cbf mode requires a CLF");
            }
            if (s.nominal_k) {
                rd.error("nominal", "clf_cbf mode requires a zero nominal controller");
            }
            break;
        case ControllerMode::Generalized:
            if (!root.contains("clf") || root["clf"].is_null()) {
                rd.error("clf", "generalized mode requires a CLF");
            }
            break;
    }

    if (!rd.errors.empty()) {
        throw ScenarioError(rd.errors);
    }
    if (!sampling_box) {
        default_sampling_box(s);
    }
    try {
        (void)make_controller(s);
    } catch (const Error& e) {
        throw ScenarioError({std::string("controller: ") + e.what()});
    }
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open scenario file '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_scenario(buf.str());
    } catch (const ScenarioError& e) {
        std::vector<std::string> errs;
        errs.reserve(e.errors().size());
        for (const auto& msg : e.errors()) {
            errs.push_back(path + ": " + msg);
        }
        throw ScenarioError(std::move(errs));
    }
}

std::string serialize_scenario(const Scenario& s) {
    Json root;
    root["schema"] = kScenarioSchema;
    root["name"] = s.name;
    if (!s.description.empty()) {
        root["description"] = s.description;
    }
    Json dyn;
    dyn["n"] = s.n;
    dyn["m"] = s.m;
    if (s.drift_a) {
        dyn["drift"] = Json{{"type", "linear"}, {"A", to_json(*s.drift_a)}};
    } else {
        dyn["drift"] = Json{{"type", "zero"}};
    }
    dyn["input"] = Json{{"type", "constant"}, {"g", to_json(s.g)}};
    root["dynamics"] = dyn;
    if (s.nominal_k) {
        root["nominal"] = Json{{"type", "linear_feedback"}, {"K", to_json(*s.nominal_k)}};
    } else {
        root["nominal"] = Json{{"type", "zero"}};
    }
    root["controller"] = Json{{"mode", to_string(s.mode)}, {"p", s.p}, {"H", to_json(s.h_metric)}};
    if (s.clf) {
        root["clf"] = Json{{"shape", to_json(s.clf->shape)}, {"center", to_json(s.clf->center)}, {"gamma", s.clf->gamma}};
    }
    Json cbfs = Json::array();
    for (const auto& b : s.cbfs) {
        cbfs.push_back(Json{{"shape", to_json(b.shape)}, {"center", to_json(b.center)}, {"offset", b.offset},
                            {"alpha", b.alpha}});
    }
    root["cbfs"] = cbfs;
    Json xs = Json::array();
    for (const auto& x : s.initial_states) {
        xs.push_back(to_json(x));
    }
    root["initial_states"] = xs;
    Json integ{{"dt", s.dt}, {"t_final", s.t_final}};
    if (s.convergence) {
        Json targets;
        if (s.convergence->use_equilibria) {
            targets = "equilibria";
        } else {
            targets = Json::array();
            for (const auto& t : s.convergence->targets) {
                targets.push_back(to_json(t));
            }
        }
        integ["convergence"] = Json{{"targets", targets}, {"tol", s.convergence->tol}, {"window", s.convergence->window}};
    }
    root["integration"] = integ;
    Json search{{"boundary_seeds", s.search.boundary_seeds},
                {"interior_seeds", s.search.interior_seeds},
                {"seed", s.search.seed},
                {"max_iterations", s.search.max_iterations},
                {"max_halvings", s.search.max_halvings}};
    if (s.search.box_lo.size() > 0) {
        search["box"] = Json{{"lo", to_json(s.search.box_lo)}, {"hi", to_json(s.search.box_hi)}};
    }
    root["search"] = search;
    root["sampling"] = Json{{"lo", to_json(s.sampling.lo)},
                            {"hi", to_json(s.sampling.hi)},
                            {"samples", s.sampling.samples},
                            {"seed", s.sampling.seed}};
    Json tol = Json::object();
    for (const auto& [key, member] : tolerance_fields()) {
        tol[key] = s.tolerances.*member;
    }
    root["tolerances"] = tol;
    return root.dump(2) + "\n";
}

DynamicsModel make_model(const Scenario& s) {
    return s.drift_a ? DynamicsModel::linear(*s.drift_a, s.g) : DynamicsModel::driftless(s.g);
}

CertificateSet make_certificates(const Scenario& s) {
    std::optional<LyapunovTerm> clf;
    if (s.clf) {
        clf = LyapunovTerm{QuadraticCertificate::clf(s.clf->shape, s.clf->center), LinearClassK(s.clf->gamma)};
    }
    std::vector<BarrierTerm> cbfs;
    for (const auto& b : s.cbfs) {
        cbfs.push_back({QuadraticCertificate::cbf(b.shape, b.center, b.offset), LinearClassK(b.alpha)});
    }
    return {std::move(clf), std::move(cbfs)};
}

QpController make_controller(const Scenario& s) {
    ControllerParams params;
    params.p = s.p;
    params.h_metric = s.h_metric;
    params.mode = s.mode;
    params.nominal = s.nominal_k ? NominalController::linear_feedback(*s.nominal_k) : NominalController::zero();
    return {make_model(s), make_certificates(s), params, s.tolerances};
}

IntegrationSettings make_integration_settings(const Scenario& s, const std::vector<Vector>& equilibria) {
    IntegrationSettings out;
    out.dt = s.dt;
    out.t_final = s.t_final;
    if (s.convergence) {
        ConvergenceSpec c;
        c.targets = s.convergence->use_equilibria ? equilibria : s.convergence->targets;
        c.tol = s.convergence->tol;
        c.window = s.convergence->window;
        out.convergence = c;
    }
    return out;
}

std::string fnv1a64_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace cbfqp
