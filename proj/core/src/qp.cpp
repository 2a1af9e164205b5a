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
#include "cbfqp/qp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cbfqp {

std::string to_string(ControllerMode mode) {
    switch (mode) {
        case ControllerMode::SafetyFilter:
            return "safety_filter";
        case ControllerMode::ClfCbf:
            return "clf_cbf";
        case ControllerMode::Generalized:
            return "generalized";
    }
    return "unknown";
}

ControllerMode controller_mode_from_string(const std::string& s) {
    if (s == "safety_filter") {
        return ControllerMode::SafetyFilter;
    }
    if (s == "clf_cbf") {
        return ControllerMode::ClfCbf;
    }
    if (s == "generalized") {
        return ControllerMode::Generalized;
    }
    throw InvalidParameter("unknown controller mode '" + s + "'");
}

ConstraintSet ConstraintSet::clf_with(std::span<const int> cbf_indices) {
    std::uint32_t bits = 1U;
    for (const int i : cbf_indices) {
        bits |= 1U << (i + 1);
    }
    return ConstraintSet{bits};
}

std::vector<int> ConstraintSet::cbf_indices() const {
    std::vector<int> out;
    for (int i = 0; i < 31; ++i) {
        if (has_cbf(i)) {
            out.push_back(i);
        }
    }
    return out;
}

std::string ConstraintSet::to_string() const {
    std::ostringstream os;
    os << '{';
    bool first = true;
    if (has_clf()) {
        os << "CLF";
        first = false;
    }
    for (const int i : cbf_indices()) {
        os << (first ? "" : ",") << (i + 1);
        first = false;
    }
    os << '}';
    return os.str();
}

double KktResiduals::max() const { return std::max({stationarity, primal, dual, complementarity}); }

std::vector<std::vector<int>> candidate_active_sets(int num_cbfs, bool clf_mandatory) {
    // Rows are 0 (CLF) .. num_cbfs. Combinations of each cardinality are
    // generated in lexicographic order.
    const int rows = num_cbfs + 1;
    std::vector<std::vector<int>> out;
    for (int k = 0; k <= rows; ++k) {
        std::vector<bool> pick(static_cast<std::size_t>(rows), false);
        std::fill(pick.begin(), pick.begin() + k, true);
        do {
            std::vector<int> set;
            for (int r = 0; r < rows; ++r) {
                if (pick[static_cast<std::size_t>(r)]) {
                    set.push_back(r);
                }
            }
            if (!clf_mandatory || (!set.empty() && set.front() == 0)) {
                out.push_back(std::move(set));
            }
        } while (std::prev_permutation(pick.begin(), pick.end()));
    }
    return out;
}

QpController::QpController(DynamicsModel model, CertificateSet certificates, ControllerParams params, Tolerances tol)
    : model_(std::move(model)), certs_(std::move(certificates)), params_(std::move(params)), tol_(tol) {
    if (certs_.dim() != model_.state_dim()) {
        throw ContractViolation("certificate dimension differs from the plant state dimension");
    }
    if (!(params_.p > 0.0) || !std::isfinite(params_.p)) {
        throw InvalidParameter("p must be positive");
    }
    if (params_.h_metric.size() == 0) {
        params_.h_metric = Matrix::Identity(model_.input_dim(), model_.input_dim());
    }
    if (params_.h_metric.rows() != model_.input_dim() || params_.h_metric.cols() != model_.input_dim()) {
        throw ContractViolation("H must be m x m");
    }
    h_inv_ = spd_inverse(params_.h_metric);
    if (certs_.num_cbfs() > kMaxBarriers) {
        throw InvalidParameter("at most " + std::to_string(kMaxBarriers) + " CBFs are supported");
    }
    switch (params_.mode) {
        case ControllerMode::SafetyFilter:
            if (certs_.has_clf()) {
                throw InvalidParameter("safety_filter mode requires the CLF to be absent");
            }
            break;
        case ControllerMode::ClfCbf:
            if (!certs_.has_clf()) {
                throw InvalidParameter("clf_cbf mode requires a CLF");
            }
            if (!params_.nominal.is_zero()) {
                throw InvalidParameter("clf_cbf mode requires a zero nominal controller");
            }
            break;
        case ControllerMode::Generalized:
            if (!certs_.has_clf()) {
                throw InvalidParameter("generalized mode requires a CLF");
            }
            break;
    }
    if (const auto* k = std::get_if<LinearFeedback>(&params_.nominal.spec())) {
        if (k->k.rows() != model_.input_dim() || k->k.cols() != model_.state_dim()) {
            throw ContractViolation("nominal gain K must be m x n");
        }
    }
    candidates_ = candidate_active_sets(certs_.num_cbfs(), is_safety_filter());
}

bool QpController::analytic_derivatives() const {
    return model_.derivative_tier() == DerivativeTier::Analytic && params_.nominal.has_analytic_jacobian();
}

PointData QpController::evaluate(const Vector& x) const {
    require_size(x, model_.state_dim(), "QP state");
    PointData pd;
    pd.x = x;
    pd.g = model_.input_map(x);
    pd.u_nom = params_.nominal.eval(x, model_.input_dim());
    pd.f_nom = model_.drift(x) + pd.g * pd.u_nom;
    pd.gram = pd.g * h_inv_ * pd.g.transpose();
    pd.gram = 0.5 * (pd.gram + pd.gram.transpose()).eval();
    pd.v = certs_.clf_value(x);
    pd.grad_v = certs_.clf_gradient(x);
    pd.gamma = certs_.gamma(pd.v);
    pd.gamma_prime = certs_.gamma_prime(pd.v);
    pd.c = 1.0 / params_.p + pd.grad_v.dot(pd.gram * pd.grad_v);
    const int nb = certs_.num_cbfs();
    pd.h.resize(nb);
    pd.u_all.resize(x.size(), nb);
    pd.alpha_bar.resize(nb);
    for (int i = 0; i < nb; ++i) {
        const auto& b = certs_.cbfs()[static_cast<std::size_t>(i)];
        pd.h(i) = b.certificate.value(x);
        pd.u_all.col(i) = b.certificate.gradient(x);
        pd.alpha_bar(i) = b.alpha.value(pd.h(i));
    }
    return pd;
}

double QpController::scalar_c(const Vector& x) const { return evaluate(x).c; }

Matrix QpController::projection_P_V(const Vector& x) const {
    const PointData pd = evaluate(x);
    const auto n = x.size();
    return Matrix::Identity(n, n) - (pd.gram * pd.grad_v) * pd.grad_v.transpose() / pd.c;
}

namespace {

DualProblem dual_from(const PointData& pd, double p) {
    const auto nb = pd.u_all.cols();
    Matrix ubar(pd.x.size(), nb + 1);
    ubar.col(0) = -pd.grad_v;
    ubar.rightCols(nb) = pd.u_all;
    DualProblem d;
    d.a = ubar.transpose() * pd.gram * ubar;
    d.a(0, 0) += 1.0 / p;
    d.a = 0.5 * (d.a + d.a.transpose()).eval();
    d.b.resize(nb + 1);
    d.b(0) = pd.grad_v.dot(pd.f_nom) + pd.gamma;
    d.b.tail(nb) = -(pd.u_all.transpose() * pd.f_nom + pd.alpha_bar);
    return d;
}

}  // namespace

DualProblem QpController::assemble_dual(const Vector& x) const { return dual_from(evaluate(x), params_.p); }

std::optional<QpSolution> QpController::enumerate(const PointData& pd, const DualProblem& dual) const {
    const auto rows = dual.b.size();
    Vector lam(rows);
    for (const auto& set : candidates_) {
        lam.setZero();
        const auto k = static_cast<Eigen::Index>(set.size());
        if (k > 0) {
            Matrix sub(k, k);
            Vector rhs(k);
            for (Eigen::Index i = 0; i < k; ++i) {
                rhs(i) = dual.b(set[static_cast<std::size_t>(i)]);
                for (Eigen::Index j = 0; j < k; ++j) {
                    sub(i, j) = dual.a(set[static_cast<std::size_t>(i)], set[static_cast<std::size_t>(j)]);
                }
            }
            Vector y;
            Eigen::FullPivLU<Matrix> lu(sub);
            if (lu.isInvertible()) {
                y = lu.solve(rhs);
            } else {
                // Redundant rows: accept the minimum-norm solution only if the system is consistent.
                Eigen::CompleteOrthogonalDecomposition<Matrix> cod(sub);
                y = cod.solve(rhs);
                if ((sub * y - rhs).norm() > tol_.primal * std::max(1.0, rhs.norm())) {
                    continue;
                }
            }
            if (!y.allFinite() || (y.array() < -tol_.multiplier_clamp).any()) {
                continue;
            }
            for (Eigen::Index i = 0; i < k; ++i) {
                lam(set[static_cast<std::size_t>(i)]) = std::max(0.0, y(i));
            }
        }
        const Vector w = dual.a * lam - dual.b;
        bool feasible = true;
        std::size_t pos = 0;
        for (Eigen::Index r = 0; r < rows; ++r) {
            if (pos < set.size() && set[pos] == r) {
                ++pos;
                continue;
            }
            if (w(r) < -tol_.primal * std::max(1.0, std::abs(dual.b(r)))) {
                feasible = false;
                break;
            }
        }
        if (!feasible) {
            continue;
        }
        QpSolution sol;
        sol.lambda0 = lam(0);
        sol.lambda = lam.tail(rows - 1);
        const Vector combo = -sol.lambda0 * pd.grad_v + pd.u_all * sol.lambda;
        sol.u_star = pd.u_nom + h_inv_ * (pd.g.transpose() * combo);
        sol.delta_star = sol.lambda0 / params_.p;
        std::uint32_t bits = 0;
        for (const int r : set) {
            bits |= 1U << r;
        }
        if (is_safety_filter()) {
            bits |= 1U;
        }
        sol.active_set = ConstraintSet{bits};
        return sol;
    }
    return std::nullopt;
}

std::optional<QpSolution> QpController::try_solve(const Vector& x) const {
    const PointData pd = evaluate(x);
    auto sol = enumerate(pd, dual_from(pd, params_.p));
    if (sol) {
        sol->kkt_residual = kkt_residuals(x, *sol).max();
    }
    return sol;
}

QpSolution QpController::solve(const Vector& x) const {
    auto sol = try_solve(x);
    if (!sol) {
        std::ostringstream os;
        os << "QP infeasible at x = [" << x.transpose() << "]: no candidate active set satisfies KKT";
        throw InfeasibleQp(os.str(), x, check_feasibility(x));
    }
    return *sol;
}

std::optional<QpSolution> try_solve(const QpController& qp, const Vector& x) { return qp.try_solve(x); }

FeasibilityReport QpController::check_feasibility(const Vector& x) const {
    const PointData pd = evaluate(x);
    const Vector g_grad_v = pd.gram * pd.grad_v;
    const Vector ut_g_grad_v = pd.u_all.transpose() * g_grad_v;
    Matrix m = pd.u_all.transpose() * pd.gram * pd.u_all - ut_g_grad_v * ut_g_grad_v.transpose() / pd.c;
    m = 0.5 * (m + m.transpose()).eval();
    const Vector pv_f_nom = pd.f_nom - g_grad_v * (pd.grad_v.dot(pd.f_nom) / pd.c);
    const Vector b2 = pd.u_all.transpose() * (g_grad_v * (pd.gamma / pd.c) - pv_f_nom) - pd.alpha_bar;

    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& sigma = svd.singularValues();
    const double sigma_max = sigma.size() > 0 ? sigma(0) : 0.0;
    FeasibilityReport rep;
    Vector y = Vector::Zero(m.cols());
    if (sigma_max > 0.0) {
        const Vector ub = svd.matrixU().transpose() * b2;
        for (Eigen::Index i = 0; i < sigma.size(); ++i) {
            if (sigma(i) > tol_.rank * sigma_max) {
                y += svd.matrixV().col(i) * (ub(i) / sigma(i));
                ++rep.rank_used;
            }
        }
    }
    rep.residual = (m * y - b2).norm();
    rep.holds = rep.residual <= tol_.image * std::max(1.0, b2.norm());
    return rep;
}

Vector QpController::closed_loop_field(const Vector& x, const QpSolution& sol) const {
    const PointData pd = evaluate(x);
    return pd.f_nom + pd.gram * (-sol.lambda0 * pd.grad_v + pd.u_all * sol.lambda);
}

Vector QpController::closed_loop_field(const Vector& x) const { return closed_loop_field(x, solve(x)); }

KktResiduals QpController::kkt_residuals(const Vector& x, const QpSolution& sol) const {
    const PointData pd = evaluate(x);
    KktResiduals r;
    const Vector stat_u =
        params_.h_metric * (sol.u_star - pd.u_nom) + pd.g.transpose() * (sol.lambda0 * pd.grad_v - pd.u_all * sol.lambda);
    r.stationarity = std::max(stat_u.cwiseAbs().maxCoeff(), std::abs(params_.p * sol.delta_star - sol.lambda0));

    const Vector xdot = model_.drift(x) + pd.g * sol.u_star;
    // CLF row: value <= 0.  CBF rows: value >= 0.
    const double clf_row = pd.grad_v.dot(xdot) + pd.gamma - sol.delta_star;
    const Vector cbf_rows = pd.u_all.transpose() * xdot + pd.alpha_bar;
    r.primal = std::max(0.0, clf_row);
    r.dual = std::max(0.0, -sol.lambda0);
    for (Eigen::Index i = 0; i < cbf_rows.size(); ++i) {
        r.primal = std::max(r.primal, -cbf_rows(i));
        r.dual = std::max(r.dual, -sol.lambda(i));
    }
    // Rows in the active set hold with equality; rows outside carry no multiplier.
    auto comp = [&](bool active, double row, double mult) {
        return active ? std::abs(row) : std::abs(mult);
    };
    r.complementarity = comp(sol.active_set.has_clf(), clf_row, sol.lambda0);
    for (Eigen::Index i = 0; i < cbf_rows.size(); ++i) {
        r.complementarity = std::max(r.complementarity,
                                     comp(sol.active_set.has_cbf(static_cast<int>(i)), cbf_rows(i), sol.lambda(i)));
    }
    return r;
}

Matrix reduced_dual_matrix(const PointData& pd, std::span<const int> indices) {
    const auto r = static_cast<Eigen::Index>(indices.size());
    Matrix ua(pd.x.size(), r);
    for (Eigen::Index j = 0; j < r; ++j) {
        ua.col(j) = pd.u_all.col(indices[static_cast<std::size_t>(j)]);
    }
    Matrix a(r + 1, r + 1);
    a(0, 0) = pd.c;
    const Vector cross = -(ua.transpose() * pd.gram * pd.grad_v);
    a.block(0, 1, 1, r) = cross.transpose();
    a.block(1, 0, r, 1) = cross;
    a.bottomRightCorner(r, r) = ua.transpose() * pd.gram * ua;
    return a;
}

Matrix reduced_dual_inverse_formula(const PointData& pd, std::span<const int> indices) {
    const auto r = static_cast<Eigen::Index>(indices.size());
    const auto n = pd.x.size();
    Matrix ua(n, r);
    for (Eigen::Index j = 0; j < r; ++j) {
        ua.col(j) = pd.u_all.col(indices[static_cast<std::size_t>(j)]);
    }
    const Matrix pv = Matrix::Identity(n, n) - (pd.gram * pd.grad_v) * pd.grad_v.transpose() / pd.c;
    const Matrix schur = ua.transpose() * pv * pd.gram * ua;
    Eigen::FullPivLU<Matrix> lu(schur);
    if (!lu.isInvertible()) {
        throw PreconditionError("Schur complement S_A is singular");
    }
    Matrix block(r + 1, r);
    block.row(0) = pd.grad_v.transpose() * pd.gram * ua;
    block.bottomRows(r) = pd.c * Matrix::Identity(r, r);
    Matrix inv = block * lu.inverse() * block.transpose() / (pd.c * pd.c);
    inv(0, 0) += 1.0 / pd.c;
    return inv;
}

}  // namespace cbfqp
