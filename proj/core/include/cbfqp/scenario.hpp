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
#ifndef CBFQP_SCENARIO_HPP
#define CBFQP_SCENARIO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cbfqp/equilibria.hpp"
#include "cbfqp/qp.hpp"
#include "cbfqp/simulate.hpp"

namespace cbfqp {

inline constexpr const char* kScenarioSchema = "cbfqp-scenario/1";

struct ScenarioClf {
    Matrix shape;
    Vector center;
    double gamma = 1.0;
};

struct ScenarioCbf {
    Matrix shape;
    Vector center;
    double offset = 0.0;
    double alpha = 1.0;
};

struct ScenarioConvergence {
    /// Use the validated equilibria of the scenario as targets.
    bool use_equilibria = false;
    std::vector<Vector> targets;
    double tol = 1e-2;
    int window = 10;
};

/// Box for random state sampling (scans, audits, random initial states).
struct ScenarioSampling {
    Vector lo;
    Vector hi;
    int samples = 1000;
    std::uint64_t seed = 42;
};

/**
 * Declarative description of one experiment.
 *
 * Stored as JSON with a "schema" field; see docs in the README for the layout.
 */
struct Scenario {
    std::string name;
    std::string description;
    int n = 0;
    int m = 0;
    std::optional<Matrix> drift_a;    //!< empty for a driftless plant
    Matrix g;
    std::optional<Matrix> nominal_k;  //!< empty for u_nom = 0
    ControllerMode mode = ControllerMode::ClfCbf;
    double p = 1.0;
    Matrix h_metric;
    std::optional<ScenarioClf> clf;
    std::vector<ScenarioCbf> cbfs;
    std::vector<Vector> initial_states;
    double dt = 1e-3;
    double t_final = 20.0;
    std::optional<ScenarioConvergence> convergence;
    SearchConfig search;
    ScenarioSampling sampling;
    Tolerances tolerances;

    friend bool operator==(const Scenario& a, const Scenario& b);
};

/// Every problem found while loading, each prefixed with its field path.
class ScenarioError : public InvalidParameter {
  public:
    explicit ScenarioError(std::vector<std::string> errors);
    [[nodiscard]] const std::vector<std::string>& errors() const { return errors_; }

  private:
    std::vector<std::string> errors_;
};

Scenario parse_scenario(const std::string& text);
/// Throws IoError when the file cannot be read, ScenarioError otherwise.
Scenario load_scenario(const std::string& path);
/// Canonical JSON text; parse_scenario(serialize_scenario(s)) == s.
std::string serialize_scenario(const Scenario& s);

DynamicsModel make_model(const Scenario& s);
CertificateSet make_certificates(const Scenario& s);
QpController make_controller(const Scenario& s);

/// Integration settings; `equilibria` supplies targets when convergence uses them.
IntegrationSettings make_integration_settings(const Scenario& s, const std::vector<Vector>& equilibria = {});

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a64_hex(const std::string& bytes);

}  // namespace cbfqp

#endif  // CBFQP_SCENARIO_HPP
