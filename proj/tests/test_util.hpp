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
#ifndef CBFQP_TESTS_TEST_UTIL_HPP
#define CBFQP_TESTS_TEST_UTIL_HPP

#include <string>

#include <Eigen/Dense>

#include "cbfqp/qp.hpp"
#include "cbfqp/scenario.hpp"

namespace cbfqp::testing {

inline std::string scenario_path(const std::string& name) {
    return std::string(CBFQP_SCENARIO_DIR) + "/" + name + ".scenario";
}

inline std::string data_path(const std::string& name) { return std::string(CBFQP_TEST_DATA_DIR) + "/" + name; }

inline Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double d : v) out(i++) = d;
    return out;
}

/// Single integrator, V = |x|^2 / 2, one unit circle centered at (2, 0).
inline QpController deadlock_controller(double p = 1.0) {
    auto model = DynamicsModel::driftless(Matrix::Identity(2, 2));
    CertificateSet certs(LyapunovTerm{QuadraticCertificate::clf(0.5 * Matrix::Identity(2, 2), Vector::Zero(2)),
                                      LinearClassK(1.0)},
                         {BarrierTerm{QuadraticCertificate::cbf(Matrix::Identity(2, 2), vec({2, 0}), -1.0),
                                      LinearClassK(1.0)}});
    ControllerParams params;
    params.p = p;
    params.h_metric = Matrix::Identity(2, 2);
    params.mode = ControllerMode::ClfCbf;
    return {model, certs, params};
}

/// xdot = u, u_nom = -x. The barrier (x - 1)^2 + 1/4 has the value and slope of x - 1 at x = 1.5.
inline QpController scalar_filter() {
    auto model = DynamicsModel::driftless(Matrix::Identity(1, 1));
    CertificateSet certs(std::nullopt, {BarrierTerm{QuadraticCertificate::cbf(Matrix::Identity(1, 1), vec({1}), 0.25),
                                                    LinearClassK(1.0)}});
    ControllerParams params;
    params.p = 1.0;
    params.h_metric = Matrix::Identity(1, 1);
    params.mode = ControllerMode::SafetyFilter;
    params.nominal = NominalController::linear_feedback(-Matrix::Identity(1, 1));
    return {model, certs, params};
}

inline QpController bundled_controller(const std::string& name) {
    return make_controller(load_scenario(scenario_path(name)));
}

}  // namespace cbfqp::testing

#endif  // CBFQP_TESTS_TEST_UTIL_HPP
