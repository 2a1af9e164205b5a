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
#ifndef CBFQP_SYSTEMS_HPP
#define CBFQP_SYSTEMS_HPP

#include <functional>
#include <optional>
#include <variant>

#include "cbfqp/types.hpp"

namespace cbfqp {

using VectorField = std::function<Vector(const Vector&)>;
using MatrixField = std::function<Matrix(const Vector&)>;

enum class DerivativeTier { Analytic, FiniteDifference };

/// f(x) = 0.
struct ZeroDrift {};
/// f(x) = A x.
struct LinearDrift {
    Matrix a;
};
/// Black-box f(x).
struct GenericDrift {
    VectorField eval;
};
using DriftSpec = std::variant<ZeroDrift, LinearDrift, GenericDrift>;

/// g(x) = g0.
struct ConstantInput {
    Matrix g;
};
/// Black-box g(x).
struct GenericInput {
    MatrixField eval;
};
using InputSpec = std::variant<ConstantInput, GenericInput>;

/**
 * Control-affine plant xdot = f(x) + g(x) u.
 *
 * Immutable after construction. The analytic derivative tier is available
 * only for zero/linear drift with a constant input matrix; everything else
 * is differentiated with central differences.
 */
class DynamicsModel {
  public:
    DynamicsModel(int n, int m, DriftSpec drift, InputSpec input);

    static DynamicsModel driftless(Matrix g0);
    static DynamicsModel linear(Matrix a, Matrix g0);

    [[nodiscard]] int state_dim() const { return n_; }
    [[nodiscard]] int input_dim() const { return m_; }
    [[nodiscard]] DerivativeTier derivative_tier() const { return tier_; }
    [[nodiscard]] const DriftSpec& drift_spec() const { return drift_; }
    [[nodiscard]] const InputSpec& input_spec() const { return input_; }
    [[nodiscard]] bool is_driftless() const { return std::holds_alternative<ZeroDrift>(drift_); }
    [[nodiscard]] bool has_constant_input() const { return std::holds_alternative<ConstantInput>(input_); }

    /// f(x).
    [[nodiscard]] Vector drift(const Vector& x) const;
    /// g(x), n x m.
    [[nodiscard]] Matrix input_map(const Vector& x) const;
    /// df/dx, analytic when available.
    [[nodiscard]] Matrix drift_jacobian(const Vector& x, double fd_step_rel = 1e-6) const;

  private:
    int n_;
    int m_;
    DriftSpec drift_;
    InputSpec input_;
    DerivativeTier tier_;
};

struct ZeroNominal {};
/// u_nom(x) = K x.
struct LinearFeedback {
    Matrix k;
};
/// Black-box u_nom(x) with an optional analytic Jacobian.
struct GenericNominal {
    VectorField eval;
    MatrixField jacobian;  // may be empty
};
using NominalSpec = std::variant<ZeroNominal, LinearFeedback, GenericNominal>;

/// Nominal (performance) control law u_nom(x).
class NominalController {
  public:
    NominalController() = default;
    explicit NominalController(NominalSpec spec) : spec_(std::move(spec)) {}

    static NominalController zero() { return NominalController{}; }
    static NominalController linear_feedback(Matrix k) { return NominalController{LinearFeedback{std::move(k)}}; }

    [[nodiscard]] const NominalSpec& spec() const { return spec_; }
    [[nodiscard]] bool is_zero() const { return std::holds_alternative<ZeroNominal>(spec_); }
    [[nodiscard]] bool has_analytic_jacobian() const;

    [[nodiscard]] Vector eval(const Vector& x, int m) const;
    /// du_nom/dx, m x n.
    [[nodiscard]] Matrix jacobian(const Vector& x, int m, double fd_step_rel = 1e-6) const;

  private:
    NominalSpec spec_ = ZeroNominal{};
};

/// f(x).
Vector eval_drift(const DynamicsModel& model, const Vector& x);
/// g(x).
Matrix eval_input_map(const DynamicsModel& model, const Vector& x);
/// f_nom(x) = f(x) + g(x) u_nom(x).
Vector eval_f_nom(const DynamicsModel& model, const NominalController& unom, const Vector& x);

/**
 * Metric-weighted input Gram matrix G(x) = g H^{-1} g^T, symmetrized.
 *
 * Throws InvalidParameter when H is not symmetric positive definite.
 */
Matrix eval_gram_G(const DynamicsModel& model, const Matrix& h_metric, const Vector& x);

/// Inverse of an SPD matrix via Cholesky; InvalidParameter if not SPD.
Matrix spd_inverse(const Matrix& h_metric);

/// Default central-difference step 1e-6 * max(1, |x|) (scaled by `rel`).
double default_fd_step(const Vector& x, double rel = 1e-6);

/**
 * Central-difference Jacobian of a vector field.
 *
 * Column k is (field(x + h e_k) - field(x - h e_k)) / (2h). Raises
 * NumericalError naming the perturbed coordinate when the field returns a
 * non-finite value.
 */
Matrix finite_difference_jacobian(const VectorField& field, const Vector& x, double h_step);

}  // namespace cbfqp

#endif  // CBFQP_SYSTEMS_HPP
