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
#ifndef CBFQP_QP_HPP
#define CBFQP_QP_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbfqp/certificates.hpp"
#include "cbfqp/systems.hpp"
#include "cbfqp/types.hpp"

namespace cbfqp {

/// Maximum number of CBFs; enumeration visits at most 2^(N+1) candidate sets.
inline constexpr int kMaxBarriers = 8;

enum class ControllerMode {
    SafetyFilter,  //!< no CLF, minimal modification of u_nom
    ClfCbf,        //!< minimum-norm CLF-CBF QP, u_nom = 0
    Generalized,   //!< CLF row plus arbitrary u_nom
};

std::string to_string(ControllerMode mode);
ControllerMode controller_mode_from_string(const std::string& s);

struct ControllerParams {
    double p = 1.0;      //!< slack weight
    Matrix h_metric;     //!< constant SPD cost metric H (m x m)
    ControllerMode mode = ControllerMode::ClfCbf;
    NominalController nominal;
};

/**
 * A set of QP rows: bit 0 is the CLF row, bit i (i >= 1) is CBF i.
 *
 * The integer value is exactly the `active_mask` column of trajectory CSVs.
 */
class ConstraintSet {
  public:
    constexpr ConstraintSet() = default;
    constexpr explicit ConstraintSet(std::uint32_t bits) : bits_(bits) {}

    static ConstraintSet clf_with(std::span<const int> cbf_indices);

    [[nodiscard]] constexpr std::uint32_t bits() const { return bits_; }
    [[nodiscard]] constexpr bool has_clf() const { return (bits_ & 1U) != 0; }
    /// `index` is 0-based.
    [[nodiscard]] constexpr bool has_cbf(int index) const { return (bits_ >> (index + 1)) & 1U; }
    [[nodiscard]] std::vector<int> cbf_indices() const;
    [[nodiscard]] std::string to_string() const;

    constexpr bool operator==(const ConstraintSet&) const = default;

  private:
    std::uint32_t bits_ = 0;
};

struct QpSolution {
    ControlVector u_star;
    double delta_star = 0.0;
    double lambda0 = 0.0;  //!< CLF multiplier
    Vector lambda;         //!< CBF multipliers, size N
    ConstraintSet active_set;
    double kkt_residual = 0.0;
};

struct FeasibilityReport {
    bool holds = false;
    double residual = 0.0;  //!< |M y* - b_2| with y* the minimum-norm least-squares solution
    int rank_used = 0;
};

/// Per-block KKT residuals of a candidate solution, evaluated in primal form.
struct KktResiduals {
    double stationarity = 0.0;
    double primal = 0.0;
    double dual = 0.0;
    double complementarity = 0.0;

    [[nodiscard]] double max() const;
};

/// Raised when no candidate active set satisfies the KKT conditions.
class InfeasibleQp : public Error {
  public:
    InfeasibleQp(const std::string& what, Vector x, FeasibilityReport report)
        : Error(what), x_(std::move(x)), report_(report) {}
    [[nodiscard]] const Vector& state() const { return x_; }
    [[nodiscard]] const FeasibilityReport& report() const { return report_; }

  private:
    Vector x_;
    FeasibilityReport report_;
};

/// Everything the QP and its analyses need at one state.
struct PointData {
    Vector x;
    Vector f_nom;
    Vector u_nom;
    Matrix g;       //!< n x m
    Matrix gram;    //!< G = g H^{-1} g^T
    double v = 0.0;
    Vector grad_v;
    double gamma = 0.0;
    double gamma_prime = 0.0;
    double c = 0.0;  //!< 1/p + |grad V|_G^2
    Vector h;        //!< all barrier values
    Matrix u_all;    //!< all barrier gradients as columns
    Vector alpha_bar;
};

/// Dual QP data max -1/2 l^T A l + l^T b over l >= 0, rows (CLF, CBF_1..N).
struct DualProblem {
    Matrix a;
    Vector b;
};

/**
 * Generalized CLF-CBF / safety-filter QP controller bound to a plant.
 *
 * min 1/2 |u - u_nom|_H^2 + 1/2 p delta^2
 * s.t. L_f V + L_g V u <= -gamma(V) + delta, L_f h_i + L_g h_i u >= -alpha_i(h_i).
 *
 * Stateless given x; safe to share across threads.
 */
class QpController {
  public:
    QpController(DynamicsModel model, CertificateSet certificates, ControllerParams params, Tolerances tol = {});

    [[nodiscard]] const DynamicsModel& model() const { return model_; }
    [[nodiscard]] const CertificateSet& certificates() const { return certs_; }
    [[nodiscard]] const ControllerParams& params() const { return params_; }
    [[nodiscard]] const Tolerances& tolerances() const { return tol_; }
    [[nodiscard]] const Matrix& h_inverse() const { return h_inv_; }
    [[nodiscard]] int state_dim() const { return model_.state_dim(); }
    [[nodiscard]] int input_dim() const { return model_.input_dim(); }
    [[nodiscard]] int num_cbfs() const { return certs_.num_cbfs(); }
    [[nodiscard]] bool is_safety_filter() const { return params_.mode == ControllerMode::SafetyFilter; }
    /// Analytic Jacobians are available (constant g, linear/zero drift, nominal with Jacobian).
    [[nodiscard]] bool analytic_derivatives() const;

    [[nodiscard]] PointData evaluate(const Vector& x) const;

    /// c(x) = 1/p + grad V^T G grad V.
    [[nodiscard]] double scalar_c(const Vector& x) const;
    /// P_V = I - c^{-1} G grad V grad V^T.
    [[nodiscard]] Matrix projection_P_V(const Vector& x) const;
    [[nodiscard]] DualProblem assemble_dual(const Vector& x) const;

    /// Pointwise QP solution by KKT active-set enumeration; throws InfeasibleQp.
    [[nodiscard]] QpSolution solve(const Vector& x) const;
    [[nodiscard]] std::optional<QpSolution> try_solve(const Vector& x) const;

    /// Sufficient feasibility certificate b_2 in Im(U^T P_V G U).
    [[nodiscard]] FeasibilityReport check_feasibility(const Vector& x) const;

    /// f_cl(x) = f_nom + G(-lambda0 grad V + U lambda).
    [[nodiscard]] Vector closed_loop_field(const Vector& x) const;
    [[nodiscard]] Vector closed_loop_field(const Vector& x, const QpSolution& sol) const;

    /// KKT residuals of (u, delta, multipliers) at x, computed from the primal problem.
    [[nodiscard]] KktResiduals kkt_residuals(const Vector& x, const QpSolution& sol) const;

  private:
    [[nodiscard]] std::optional<QpSolution> enumerate(const PointData& pd, const DualProblem& dual) const;

    DynamicsModel model_;
    CertificateSet certs_;
    ControllerParams params_;
    Tolerances tol_;
    Matrix h_inv_;
    std::vector<std::vector<int>> candidates_;
};

std::optional<QpSolution> try_solve(const QpController& qp, const Vector& x);

/// Reduced dual matrix A_a (CLF row plus the rows in `indices`).
Matrix reduced_dual_matrix(const PointData& pd, std::span<const int> indices);

/**
 * Closed-form inverse of the reduced dual matrix through its Schur complement
 * S_A = U_A^T P_V G U_A. Kept separate from the solver path and used to
 * cross-check it.
 */
Matrix reduced_dual_inverse_formula(const PointData& pd, std::span<const int> indices);

/// Candidate active sets (rows 0..N, row 0 = CLF) in ascending cardinality, then lexicographic.
std::vector<std::vector<int>> candidate_active_sets(int num_cbfs, bool clf_mandatory);

}  // namespace cbfqp

#endif  // CBFQP_QP_HPP
