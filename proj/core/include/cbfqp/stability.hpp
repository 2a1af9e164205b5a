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
#ifndef CBFQP_STABILITY_HPP
#define CBFQP_STABILITY_HPP

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbfqp/qp.hpp"

namespace cbfqp {

enum class Verdict { Stable, Unstable, Marginal };

std::string to_string(Verdict v);
Verdict verdict_from_string(const std::string& s);

struct StabilityVerdict {
    Verdict verdict = Verdict::Marginal;
    /// Largest eigenvalue of the tangent-projected symmetric part of J_fA; empty when r = n.
    std::optional<double> mu_max;
    /// Present only for Unstable verdicts.
    std::optional<Vector> witness_v;
    /// Eigenvalues of the analytic closed-loop Jacobian, sorted by (real, imag).
    std::vector<std::complex<double>> spectrum_fcl;

    friend bool operator==(const StabilityVerdict& a, const StabilityVerdict& b);
};

struct JacobianBundle {
    Matrix j_a;
    Matrix j_fa;
    Matrix s_a;    //!< U_A^T P_V G U_A
    Matrix p_ua;   //!< I - P_V G U_A S_A^{-1} U_A^T
    Matrix j_fcl;
    double cond_s_a = 0.0;
    /// Condition number of B_V; empty when B_V is not defined.
    std::optional<double> cond_b_v;
};

/// d f_nom / dx; analytic when available, central differences otherwise.
Matrix nominal_field_jacobian(const QpController& qp, const Vector& x);

/// J_A = d f_nom/dx - lambda0 d(G grad V)/dx + sum_i lambda_i d(G grad h_i)/dx, indices 0-based.
Matrix jacobian_J_A(const QpController& qp, const Vector& x, double lambda0, const Vector& lambda,
                    std::span<const int> indices);

/// Jacobian of f_A(x, lambda) = f_nom - p gamma(V) G grad V + G U_A lambda at fixed lambda.
Matrix jacobian_f_A(const QpController& qp, const Vector& x, const Vector& lambda, std::span<const int> indices);

/**
 * Analytic closed-loop Jacobian at a boundary equilibrium.
 *
 * Throws PreconditionError if U_A is rank deficient or U_A^T g vanishes, and
 * IllConditioned if cond(S_A) exceeds the configured bound.
 */
JacobianBundle closed_loop_jacobian(const QpController& qp, const Vector& x_e, const Vector& lambda_e,
                                    std::span<const int> indices);

/// Central-difference Jacobian of the QP closed-loop field.
Matrix finite_difference_closed_loop_jacobian(const QpController& qp, const Vector& x);

/**
 * Basis of the metric-orthogonal complement of span(vectors).
 *
 * Deterministic Gram-Schmidt against e_1..e_n; columns are orthonormal in
 * <a, b> = a^T X b. Throws PreconditionError if `vectors` is rank deficient.
 */
Matrix orthogonal_complement_basis(const Matrix& vectors, const Matrix& metric);

/// max|lhs - rhs| / max(1, max|lhs|) of the B_V factorization, or empty when grad V = 0 or G is singular.
std::optional<double> verify_jacobian_factorization(const QpController& qp, const Vector& x_e, const Vector& lambda_e,
                                                    std::span<const int> indices);

/// J_A - J_fA compared with p gamma' grad V grad V^T (no G) and with p gamma' G grad V grad V^T.
struct DifferenceDiagnostic {
    double residual_without_g = 0.0;
    double residual_with_g = 0.0;
};

DifferenceDiagnostic jacobian_difference_diagnostic(const QpController& qp, const Vector& x_e, const Vector& lambda_e,
                                                    std::span<const int> indices);

/// Tangent-space curvature test; r = n returns Stable.
StabilityVerdict classify(const QpController& qp, const Vector& x_e, const Vector& lambda_e,
                          std::span<const int> indices);

struct SpectrumCheck {
    bool agreement = false;
    std::vector<std::complex<double>> eigenvalues;  //!< of the finite-difference closed-loop Jacobian
};

/// Requires a non-marginal verdict; throws PreconditionError otherwise.
SpectrumCheck spectrum_cross_check(const QpController& qp, const Vector& x_e, const StabilityVerdict& verdict);

}  // namespace cbfqp

#endif  // CBFQP_STABILITY_HPP
