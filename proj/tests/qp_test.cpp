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
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cbfqp/analysis.hpp"
#include "cbfqp/qp.hpp"
#include "test_util.hpp"

namespace cbfqp {
namespace {

using testing::deadlock_controller;
using testing::scalar_filter;
using testing::vec;

/// Safety filter around a unit circle at `center`, u_nom = -x, g = H = I.
QpController circle_filter(const Vector& center, double p = 1.0) {
    CertificateSet certs(std::nullopt, {BarrierTerm{QuadraticCertificate::cbf(Matrix::Identity(2, 2), center, -1.0),
                                                    LinearClassK(1.0)}});
    ControllerParams params;
    params.p = p;
    params.h_metric = Matrix::Identity(2, 2);
    params.mode = ControllerMode::SafetyFilter;
    params.nominal = NominalController::linear_feedback(-Matrix::Identity(2, 2));
    return {DynamicsModel::driftless(Matrix::Identity(2, 2)), certs, params};
}

/// The deadlock scenario with its obstacle listed twice, gains 1 and 2.
QpController duplicated_barrier() {
    auto circle = QuadraticCertificate::cbf(Matrix::Identity(2, 2), vec({2, 0}), -1.0);
    CertificateSet certs(LyapunovTerm{QuadraticCertificate::clf(0.5 * Matrix::Identity(2, 2), Vector::Zero(2)),
                                      LinearClassK(1.0)},
                         {BarrierTerm{circle, LinearClassK(1.0)}, BarrierTerm{circle, LinearClassK(2.0)}});
    ControllerParams params;
    params.h_metric = Matrix::Identity(2, 2);
    return {DynamicsModel::driftless(Matrix::Identity(2, 2)), certs, params};
}

TEST(QpCore, ScalarC) {
    EXPECT_EQ(circle_filter(vec({5, 0})).scalar_c(vec({0, 0})), 1.0);
    EXPECT_DOUBLE_EQ(deadlock_controller().scalar_c(vec({3, 0})), 10.0);
    EXPECT_DOUBLE_EQ(deadlock_controller(2.0).scalar_c(vec({0, 0})), 0.5);
}

TEST(QpCore, ProjectionPV) {
    EXPECT_EQ(circle_filter(vec({5, 0})).projection_P_V(vec({1, 2})), Matrix::Identity(2, 2));
    Matrix expected(2, 2);
    expected << 0.1, 0, 0, 1;
    EXPECT_LE((deadlock_controller().projection_P_V(vec({3, 0})) - expected).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(deadlock_controller().projection_P_V(vec({0, 0})), Matrix::Identity(2, 2));
}

TEST(QpCore, AssembleDual) {
    const double p = 4.0;
    CertificateSet certs(std::nullopt, {BarrierTerm{QuadraticCertificate::cbf(Matrix::Identity(2, 2), vec({2, 0}), -1.0),
                                                    LinearClassK(1.0)}});
    ControllerParams params;
    params.p = p;
    params.h_metric = Matrix::Identity(2, 2);
    params.mode = ControllerMode::SafetyFilter;
    QpController boundary(DynamicsModel::driftless(Matrix::Identity(2, 2)), certs, params);
    auto dual = boundary.assemble_dual(vec({3, 0}));
    Matrix a(2, 2);
    a << 1.0 / p, 0, 0, 4.0;
    EXPECT_LE((dual.a - a).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_TRUE(dual.b.isZero(0.0));

    auto scalar = scalar_filter().assemble_dual(vec({1.5}));
    EXPECT_LE((scalar.a - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((scalar.b - vec({0, 1})).cwiseAbs().maxCoeff(), 1e-15);

    auto dl = deadlock_controller().assemble_dual(vec({3, 0}));
    EXPECT_DOUBLE_EQ(dl.a(0, 0), 10.0);
    EXPECT_TRUE((dl.a - dl.a.transpose()).isZero(1e-12));
    Eigen::SelfAdjointEigenSolver<Matrix> es(dl.a);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
}

TEST(QpCore, DeepInteriorReturnsNominal) {
    auto qp = circle_filter(vec({5, 0}));
    auto sol = qp.solve(vec({0.1, 0.2}));
    EXPECT_EQ(sol.u_star, vec({-0.1, -0.2}));
    EXPECT_EQ(sol.delta_star, 0.0);
    EXPECT_TRUE(sol.lambda.isZero(0.0));
    EXPECT_FALSE(sol.active_set.has_cbf(0));
}

TEST(QpCore, ScalarExample) {
    auto qp = scalar_filter();
    auto sol = qp.solve(vec({1.5}));
    EXPECT_NEAR(sol.u_star(0), -0.5, 1e-14);
    EXPECT_NEAR(sol.lambda(0), 1.0, 1e-14);
    EXPECT_EQ(sol.delta_star, 0.0);
    EXPECT_TRUE(sol.active_set.has_cbf(0));
}

TEST(QpCore, DeadlockEquilibriumSolution) {
    auto qp = deadlock_controller();
    Vector x = vec({3, 0});
    auto sol = qp.solve(x);
    EXPECT_NEAR(sol.lambda0, 4.5, 1e-12);
    EXPECT_NEAR(sol.lambda(0), 6.75, 1e-12);
    EXPECT_NEAR(sol.delta_star, 4.5, 1e-12);
    EXPECT_EQ(sol.active_set, ConstraintSet(0b11));
    // The conical-combination identity p gamma(V) grad V = lambda grad h.
    Vector lhs = 1.0 * 4.5 * vec({3, 0});
    Vector rhs = sol.lambda(0) * vec({2, 0});
    EXPECT_LE((lhs - rhs).norm(), 1e-12);
    EXPECT_LE(qp.closed_loop_field(x).norm(), 1e-8);
}

TEST(QpCore, ClosedLoopField) {
    auto qp = deadlock_controller();
    EXPECT_TRUE(qp.closed_loop_field(vec({0, 0})).isZero(0.0));
    Vector f = qp.closed_loop_field(vec({5, 0}));
    EXPECT_LT(f(0), 0.0);
    EXPECT_EQ(f(1), 0.0);
}

TEST(QpCore, ClosedLoopFieldMatchesPlant) {
    for (const char* name : {"fig1", "deadlock2d", "filter2d"}) {
        auto s = load_scenario(testing::scenario_path(name));
        auto qp = make_controller(s);
        for (const auto& x : sample_states(s.sampling.lo, s.sampling.hi, 200, 9)) {
            auto sol = qp.try_solve(x);
            if (!sol) continue;
            Vector plant = qp.model().drift(x) + qp.model().input_map(x) * sol->u_star;
            EXPECT_LE((plant - qp.closed_loop_field(x, *sol)).norm(), 1e-8) << name;
        }
    }
}

TEST(QpCore, ModeReductions) {
    auto filter = testing::bundled_controller("filter2d");
    auto s = load_scenario(testing::scenario_path("filter2d"));
    for (const auto& x : sample_states(s.sampling.lo, s.sampling.hi, 300, 4)) {
        auto sol = filter.try_solve(x);
        ASSERT_TRUE(sol);
        EXPECT_EQ(sol->delta_star, 0.0);
    }

    auto qp = deadlock_controller();
    int checked = 0;
    for (const auto& x : sample_states(vec({-2, -3}), vec({6, 3}), 300, 5)) {
        auto sol = qp.try_solve(x);
        ASSERT_TRUE(sol);
        if (sol->active_set.has_cbf(0)) continue;
        Vector expected = -sol->lambda0 * qp.h_inverse() * qp.model().input_map(x).transpose() *
                          qp.certificates().clf_gradient(x);
        EXPECT_LE((sol->u_star - expected).norm(), 1e-12);
        ++checked;
    }
    EXPECT_GT(checked, 100);
}

TEST(QpCore, KktInvariantsAtRandomStates) {
    for (const char* name : {"fig1", "deadlock2d", "filter2d"}) {
        auto s = load_scenario(testing::scenario_path(name));
        auto qp = make_controller(s);
        for (const auto& x : sample_states(s.sampling.lo, s.sampling.hi, 200, 12)) {
            auto sol = qp.try_solve(x);
            ASSERT_TRUE(sol) << name;
            auto pd = qp.evaluate(x);
            Vector stat = pd.u_nom + qp.h_inverse() * pd.g.transpose() * (-sol->lambda0 * pd.grad_v + pd.u_all * sol->lambda);
            EXPECT_LE((stat - sol->u_star).norm(), 1e-8);
            EXPECT_NEAR(sol->delta_star, sol->lambda0 / qp.params().p, 1e-10);
            EXPECT_GE(sol->lambda.minCoeff(), 0.0);
            Vector rows = pd.u_all.transpose() * (pd.f_nom + pd.g * (sol->u_star - pd.u_nom)) + pd.alpha_bar;
            EXPECT_GE(rows.minCoeff(), -1e-8);
            EXPECT_LE(qp.kkt_residuals(x, *sol).max(), 1e-7);
        }
    }
}

TEST(QpCore, CandidateOrder) {
    auto sets = candidate_active_sets(2, false);
    std::vector<std::vector<int>> expected{{}, {0}, {1}, {2}, {0, 1}, {0, 2}, {1, 2}, {0, 1, 2}};
    EXPECT_EQ(sets, expected);
    auto filter = candidate_active_sets(2, true);
    std::vector<std::vector<int>> expected_filter{{0}, {0, 1}, {0, 2}, {0, 1, 2}};
    EXPECT_EQ(filter, expected_filter);
}

TEST(QpCore, ConstraintSetBits) {
    std::vector<int> idx{0, 2};
    auto set = ConstraintSet::clf_with(idx);
    EXPECT_EQ(set.bits(), 0b1011U);
    EXPECT_TRUE(set.has_clf());
    EXPECT_TRUE(set.has_cbf(0));
    EXPECT_FALSE(set.has_cbf(1));
    EXPECT_EQ(set.cbf_indices(), idx);
}

TEST(QpCore, BlockInverseFormula) {
    for (const char* name : {"fig1", "deadlock2d", "filter2d"}) {
        auto s = load_scenario(testing::scenario_path(name));
        auto qp = make_controller(s);
        int n_checked = 0;
        for (const auto& x : sample_states(s.sampling.lo, s.sampling.hi, 100, 21)) {
            auto pd = qp.evaluate(x);
            for (const auto& a : active_index_sets(qp.num_cbfs(), qp.state_dim())) {
                Matrix ua(pd.u_all.rows(), static_cast<Eigen::Index>(a.size()));
                for (std::size_t j = 0; j < a.size(); ++j) ua.col(static_cast<Eigen::Index>(j)) = pd.u_all.col(a[j]);
                Matrix pv = qp.projection_P_V(x);
                Matrix s_a = ua.transpose() * pv * pd.gram * ua;
                Eigen::JacobiSVD<Matrix> svd(s_a);
                double cond = svd.singularValues()(0) / svd.singularValues().tail(1)(0);
                if (!(cond < 1e8)) continue;
                Matrix aa = reduced_dual_matrix(pd, a);
                Matrix inv = reduced_dual_inverse_formula(pd, a);
                EXPECT_LE((aa * inv - Matrix::Identity(aa.rows(), aa.cols())).cwiseAbs().maxCoeff(), 1e-8) << name;
                ++n_checked;
            }
        }
        EXPECT_GT(n_checked, 50) << name;
    }
}

TEST(QpCore, FeasibilityCondition) {
    auto single = deadlock_controller();
    auto rep = single.check_feasibility(vec({4, 1}));
    EXPECT_TRUE(rep.holds);
    EXPECT_EQ(rep.rank_used, 1);

    auto fig1 = testing::bundled_controller("fig1");
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ud(-3, 3);
    for (int k = 0; k < 100; ++k) {
        Vector x = vec({ud(rng), ud(rng), 3 + ud(rng)});
        EXPECT_TRUE(fig1.check_feasibility(x).holds);
    }
}

TEST(QpCore, FeasibilityConditionFailsForDuplicatedBarrier) {
    auto qp = duplicated_barrier();
    // b_2 = (k - h, k - 2h) lies in span{(1, 1)} only on the boundary; off it the
    // condition fails while the QP itself stays solvable.
    Vector x = vec({4, 1});
    auto rep = qp.check_feasibility(x);
    EXPECT_FALSE(rep.holds);
    EXPECT_EQ(rep.rank_used, 1);
    EXPECT_GT(rep.residual, 1e-3);
    EXPECT_TRUE(qp.try_solve(x).has_value());
}

TEST(QpCore, InfeasibleQpCarriesReport) {
    // Two half-planes x1 >= 1 and x1 <= -1 encoded as barriers with a constant gradient at x = 0.
    CertificateSet certs(std::nullopt,
                         {BarrierTerm{QuadraticCertificate::cbf(Matrix::Identity(1, 1), vec({-1}), -2.0), LinearClassK(1.0)},
                          BarrierTerm{QuadraticCertificate::cbf(Matrix::Identity(1, 1), vec({1}), -2.0), LinearClassK(1.0)}});
    ControllerParams params;
    params.h_metric = Matrix::Identity(1, 1);
    params.mode = ControllerMode::SafetyFilter;
    // g = 0 removes all control authority, so h1 + h2 < 0 at x = 0 cannot be repaired.
    QpController qp(DynamicsModel::driftless(Matrix::Zero(1, 1)), certs, params);
    try {
        (void)qp.solve(vec({0}));
        FAIL() << "expected InfeasibleQp";
    } catch (const InfeasibleQp& e) {
        EXPECT_EQ(e.state(), vec({0}));
        EXPECT_FALSE(e.report().holds);
    }
    EXPECT_FALSE(qp.try_solve(vec({0})).has_value());
}

}  // namespace
}  // namespace cbfqp
