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
#include "cbfqp/systems.hpp"

#include <algorithm>
#include <cmath>

namespace cbfqp {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

DynamicsModel::DynamicsModel(int n, int m, DriftSpec drift, InputSpec input)
    : n_(n), m_(m), drift_(std::move(drift)), input_(std::move(input)) {
    if (n_ <= 0 || m_ <= 0) {
        throw ContractViolation("DynamicsModel: dimensions must be positive");
    }
    if (const auto* lin = std::get_if<LinearDrift>(&drift_)) {
        if (lin->a.rows() != n_ || lin->a.cols() != n_) {
            throw ContractViolation("DynamicsModel: drift matrix must be n x n");
        }
    }
    if (const auto* gen = std::get_if<GenericDrift>(&drift_); gen && !gen->eval) {
        throw ContractViolation("DynamicsModel: generic drift without evaluator");
    }
    if (const auto* c = std::get_if<ConstantInput>(&input_)) {
        if (c->g.rows() != n_ || c->g.cols() != m_) {
            throw ContractViolation("DynamicsModel: input matrix must be n x m");
        }
    }
    if (const auto* gen = std::get_if<GenericInput>(&input_); gen && !gen->eval) {
        throw ContractViolation("DynamicsModel: generic input map without evaluator");
    }
    const bool analytic = !std::holds_alternative<GenericDrift>(drift_) && has_constant_input();
    tier_ = analytic ? DerivativeTier::Analytic : DerivativeTier::FiniteDifference;
}

DynamicsModel DynamicsModel::driftless(Matrix g0) {
    const auto n = static_cast<int>(g0.rows());
    const auto m = static_cast<int>(g0.cols());
    return {n, m, ZeroDrift{}, ConstantInput{std::move(g0)}};
}

DynamicsModel DynamicsModel::linear(Matrix a, Matrix g0) {
    const auto n = static_cast<int>(g0.rows());
    const auto m = static_cast<int>(g0.cols());
    return {n, m, LinearDrift{std::move(a)}, ConstantInput{std::move(g0)}};
}

Vector DynamicsModel::drift(const Vector& x) const {
    require_size(x, n_, "drift");
    Vector out = std::visit(Overloaded{
                                [&](const ZeroDrift&) -> Vector { return Vector::Zero(n_); },
                                [&](const LinearDrift& d) -> Vector { return d.a * x; },
                                [&](const GenericDrift& d) -> Vector { return d.eval(x); },
                            },
                            drift_);
    require_size(out, n_, "drift evaluator result");
    return out;
}

Matrix DynamicsModel::input_map(const Vector& x) const {
    require_size(x, n_, "input_map");
    Matrix out = std::visit(Overloaded{
                                [&](const ConstantInput& c) -> Matrix { return c.g; },
                                [&](const GenericInput& c) -> Matrix { return c.eval(x); },
                            },
                            input_);
    if (out.rows() != n_ || out.cols() != m_) {
        throw ContractViolation("input_map evaluator returned a matrix of the wrong shape");
    }
    return out;
}

Matrix DynamicsModel::drift_jacobian(const Vector& x, double fd_step_rel) const {
    return std::visit(Overloaded{
                          [&](const ZeroDrift&) -> Matrix { return Matrix::Zero(n_, n_); },
                          [&](const LinearDrift& d) -> Matrix { return d.a; },
                          [&](const GenericDrift& d) -> Matrix {
                              return finite_difference_jacobian(d.eval, x, default_fd_step(x, fd_step_rel));
                          },
                      },
                      drift_);
}

bool NominalController::has_analytic_jacobian() const {
    if (const auto* gen = std::get_if<GenericNominal>(&spec_)) {
        return static_cast<bool>(gen->jacobian);
    }
    return true;
}

Vector NominalController::eval(const Vector& x, int m) const {
    Vector out = std::visit(Overloaded{
                                [&](const ZeroNominal&) -> Vector { return Vector::Zero(m); },
                                [&](const LinearFeedback& k) -> Vector { return k.k * x; },
                                [&](const GenericNominal& g) -> Vector { return g.eval(x); },
                            },
                            spec_);
    require_size(out, m, "nominal controller result");
    return out;
}

Matrix NominalController::jacobian(const Vector& x, int m, double fd_step_rel) const {
    return std::visit(Overloaded{
                          [&](const ZeroNominal&) -> Matrix { return Matrix::Zero(m, x.size()); },
                          [&](const LinearFeedback& k) -> Matrix { return k.k; },
                          [&](const GenericNominal& g) -> Matrix {
                              if (g.jacobian) {
                                  return g.jacobian(x);
                              }
                              return finite_difference_jacobian(g.eval, x, default_fd_step(x, fd_step_rel));
                          },
                      },
                      spec_);
}

Vector eval_drift(const DynamicsModel& model, const Vector& x) { return model.drift(x); }

Matrix eval_input_map(const DynamicsModel& model, const Vector& x) { return model.input_map(x); }

Vector eval_f_nom(const DynamicsModel& model, const NominalController& unom, const Vector& x) {
    return model.drift(x) + model.input_map(x) * unom.eval(x, model.input_dim());
}

Matrix spd_inverse(const Matrix& h_metric) {
    if (h_metric.rows() != h_metric.cols()) {
        throw ContractViolation("metric H must be square");
    }
    if ((h_metric - h_metric.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, h_metric.cwiseAbs().maxCoeff())) {
        throw InvalidParameter("metric H is not symmetric");
    }
    Eigen::LLT<Matrix> llt(h_metric);
    if (llt.info() != Eigen::Success) {
        throw InvalidParameter("metric H is not positive definite (Cholesky failed)");
    }
    return llt.solve(Matrix::Identity(h_metric.rows(), h_metric.cols()));
}

Matrix eval_gram_G(const DynamicsModel& model, const Matrix& h_metric, const Vector& x) {
    if (h_metric.rows() != model.input_dim()) {
        throw ContractViolation("metric H must be m x m");
    }
    const Matrix g = model.input_map(x);
    Matrix gram = g * spd_inverse(h_metric) * g.transpose();
    return 0.5 * (gram + gram.transpose());
}

double default_fd_step(const Vector& x, double rel) { return rel * std::max(1.0, x.norm()); }

Matrix finite_difference_jacobian(const VectorField& field, const Vector& x, double h_step) {
    if (!(h_step > 0.0)) {
        throw ContractViolation("finite_difference_jacobian: step must be positive");
    }
    const auto n = x.size();
    Matrix jac;
    Vector xp = x;
    for (Eigen::Index k = 0; k < n; ++k) {
        xp(k) = x(k) + h_step;
        const Vector fp = field(xp);
        xp(k) = x(k) - h_step;
        const Vector fm = field(xp);
        xp(k) = x(k);
        if (!fp.allFinite() || !fm.allFinite()) {
            throw NumericalError("finite_difference_jacobian: non-finite field value when perturbing coordinate " +
                                 std::to_string(k));
        }
        if (k == 0) {
            jac.resize(fp.size(), n);
        }
        jac.col(k) = (fp - fm) / (2.0 * h_step);
    }
    return jac;
}

}  // namespace cbfqp
