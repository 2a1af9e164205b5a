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
#include "cbfqp/stability.hpp"

#include <algorithm>
#include <cmath>

#include "cbfqp/equilibria.hpp"

namespace cbfqp {

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Stable:
            return "stable";
        case Verdict::Unstable:
            return "unstable";
        case Verdict::Marginal:
            return "marginal";
    }
    return "unknown";
}

Verdict verdict_from_string(const std::string& s) {
    if (s == "stable") {
        return Verdict::Stable;
    }
    if (s == "unstable") {
        return Verdict::Unstable;
    }
    if (s == "marginal") {
        return Verdict::Marginal;
    }
    throw InvalidParameter("unknown verdict '" + s + "'");
}

bool operator==(const StabilityVerdict& a, const StabilityVerdict& b) {
    const bool witness_eq = a.witness_v.has_value() == b.witness_v.has_value() &&
                            (!a.witness_v || same_values(*a.witness_v, *b.witness_v));
    return a.verdict == b.verdict && a.mu_max == b.mu_max && witness_eq && a.spectrum_fcl == b.spectrum_fcl;
}

namespace {

Matrix select_columns(const Matrix& all, std::span<const int> indices) {
    Matrix out(all.rows(), static_cast<Eigen::Index>(indices.size()));
    for (std::size_t j = 0; j < indices.size(); ++j) {
        out.col(static_cast<Eigen::Index>(j)) = all.col(indices[j]);
    }
    return out;
}

std::vector<std::complex<double>> sorted_eigenvalues(const Matrix& m) {
    std::vector<std::complex<double>> out;
    if (m.size() == 0) {
        return out;
    }
    Eigen::EigenSolver<Matrix> es(m, false);
    if (es.info() != Eigen::Success) {
        throw NumericalError("eigenvalue computation did not converge");
    }
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        out.push_back(es.eigenvalues()(i));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return out;
}

double condition_number(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0) {
        return 1.0;
    }
    const double smin = s(s.size() - 1);
    return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

double fd_step(const QpController& qp, const Vector& x) { return default_fd_step(x, qp.tolerances().fd_step); }

}  // namespace

Matrix nominal_field_jacobian(const QpController& qp, const Vector& x) {
    const auto& model = qp.model();
    if (qp.analytic_derivatives()) {
        const Matrix g = model.input_map(x);
        return model.drift_jacobian(x) + g * qp.params().nominal.jacobian(x, model.input_dim());
    }
    return finite_difference_jacobian(
        [&](const Vector& y) { return eval_f_nom(model, qp.params().nominal, y); }, x, fd_step(qp, x));
}

Matrix jacobian_J_A(const QpController& qp, const Vector& x, double lambda0, const Vector& lambda,
                    std::span<const int> indices) {
    require_size(lambda, static_cast<Eigen::Index>(indices.size()), "jacobian_J_A multipliers");
    const auto& certs = qp.certificates();
    if (qp.model().has_constant_input()) {
        const Matrix gram = eval_gram_G(qp.model(), qp.params().h_metric, x);
        Matrix j = nominal_field_jacobian(qp, x) - lambda0 * gram * certs.clf_hessian();
        for (std::size_t i = 0; i < indices.size(); ++i) {
            j += lambda(static_cast<Eigen::Index>(i)) * gram *
                 certs.cbfs()[static_cast<std::size_t>(indices[i])].certificate.hessian();
        }
        return j;
    }
    auto field = [&](const Vector& y) -> Vector {
        const Matrix gram = eval_gram_G(qp.model(), qp.params().h_metric, y);
        Vector out = eval_f_nom(qp.model(), qp.params().nominal, y) - lambda0 * gram * certs.clf_gradient(y);
        if (!indices.empty()) {
            out += gram * stacked_gradients_U(certs, indices, y) * lambda;
        }
        return out;
    };
    return finite_difference_jacobian(field, x, fd_step(qp, x));
}

Matrix jacobian_f_A(const QpController& qp, const Vector& x, const Vector& lambda, std::span<const int> indices) {
    require_size(lambda, static_cast<Eigen::Index>(indices.size()), "jacobian_f_A multipliers");
    const auto& certs = qp.certificates();
    if (qp.model().has_constant_input()) {
        const Matrix gram = eval_gram_G(qp.model(), qp.params().h_metric, x);
        const double v = certs.clf_value(x);
        const Vector grad_v = certs.clf_gradient(x);
        const double p = qp.params().p;
        Matrix j = nominal_field_jacobian(qp, x) -
                   p * (certs.gamma_prime(v) * gram * grad_v * grad_v.transpose() +
                        certs.gamma(v) * gram * certs.clf_hessian());
        for (std::size_t i = 0; i < indices.size(); ++i) {
            j += lambda(static_cast<Eigen::Index>(i)) * gram *
                 certs.cbfs()[static_cast<std::size_t>(indices[i])].certificate.hessian();
        }
        return j;
    }
    return finite_difference_jacobian([&](const Vector& y) { return residual_f_A(qp, y, lambda, indices); }, x,
                                      fd_step(qp, x));
}

JacobianBundle closed_loop_jacobian(const QpController& qp, const Vector& x_e, const Vector& lambda_e,
                                    std::span<const int> indices) {
    const PointData pd = qp.evaluate(x_e);
    const auto n = x_e.size();
    const auto r = static_cast<Eigen::Index>(indices.size());
    if (r == 0 || r > n) {
        throw PreconditionError("closed_loop_jacobian: need 1 <= r <= n active barriers");
    }
    const Matrix ua = select_columns(pd.u_all, indices);
    Eigen::JacobiSVD<Matrix> svd_u(ua);
    const auto& su = svd_u.singularValues();
    if (su(r - 1) <= 1e-12 * std::max(1.0, su(0))) {
        throw PreconditionError("closed_loop_jacobian: active barrier gradients U_A are rank deficient");
    }
    if ((ua.transpose() * pd.g).cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, ua.cwiseAbs().maxCoeff())) {
        throw PreconditionError("closed_loop_jacobian: U_A^T g vanishes at x_e");
    }

    const double lambda0 = qp.params().p * pd.gamma;
    JacobianBundle jb;
    jb.j_a = jacobian_J_A(qp, x_e, lambda0, lambda_e, indices);
    jb.j_fa = jacobian_f_A(qp, x_e, lambda_e, indices);

    const Matrix g_grad_v = pd.gram * pd.grad_v;
    const Matrix p_v = Matrix::Identity(n, n) - g_grad_v * pd.grad_v.transpose() / pd.c;
    const Matrix pvg_ua = p_v * pd.gram * ua;
    jb.s_a = ua.transpose() * pvg_ua;
    jb.cond_s_a = condition_number(jb.s_a);
    if (!(jb.cond_s_a <= qp.tolerances().max_schur_condition)) {
        throw IllConditioned("closed_loop_jacobian: Schur complement S_A is ill-conditioned", jb.cond_s_a);
    }
    const Eigen::PartialPivLU<Matrix> s_lu(jb.s_a);
    jb.p_ua = Matrix::Identity(n, n) - pvg_ua * s_lu.solve(ua.transpose());
    const Vector alpha_prime = alpha_prime_vector(qp.certificates(), indices, x_e);
    jb.j_fcl = jb.p_ua * (p_v * jb.j_a - (pd.gamma_prime / pd.c) * g_grad_v * pd.grad_v.transpose()) -
               pvg_ua * s_lu.solve(alpha_prime.asDiagonal() * ua.transpose());

    if (pd.grad_v.norm() > 0.0) {
        Matrix b_v(n, n);
        b_v.col(0) = pd.grad_v;
        b_v.rightCols(n - 1) = orthogonal_complement_basis(g_grad_v, Matrix::Identity(n, n));
        jb.cond_b_v = condition_number(b_v);
    }
    return jb;
}

Matrix finite_difference_closed_loop_jacobian(const QpController& qp, const Vector& x) {
    return finite_difference_jacobian([&](const Vector& y) { return qp.closed_loop_field(y); }, x, fd_step(qp, x));
}

Matrix orthogonal_complement_basis(const Matrix& vectors, const Matrix& metric) {
    const auto n = vectors.rows();
    const auto r = vectors.cols();
    if (metric.rows() != n || metric.cols() != n) {
        throw ContractViolation("orthogonal_complement_basis: metric must be n x n");
    }
    if (Eigen::LLT<Matrix>(metric).info() != Eigen::Success) {
        throw InvalidParameter("orthogonal_complement_basis: metric is not positive definite");
    }
    auto inner = [&](const Vector& a, const Vector& b) { return a.dot(metric * b); };
    std::vector<Vector> basis;
    auto orthogonalize = [&](Vector v) {
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& q : basis) {
                v -= inner(q, v) * q;
            }
        }
        return v;
    };
    for (Eigen::Index j = 0; j < r; ++j) {
        const Vector v = orthogonalize(vectors.col(j));
        const double nv = std::sqrt(std::max(0.0, inner(v, v)));
        const double n0 = std::sqrt(std::max(0.0, inner(vectors.col(j), vectors.col(j))));
        if (!(nv > 1e-10 * std::max(n0, 1e-300))) {
            throw PreconditionError("orthogonal_complement_basis: vectors are linearly dependent");
        }
        basis.push_back(v / nv);
    }
    Matrix out(n, n - r);
    Eigen::Index filled = 0;
    for (Eigen::Index k = 0; k < n && filled < n - r; ++k) {
        const Vector v = orthogonalize(Vector::Unit(n, k));
        const double nv = std::sqrt(std::max(0.0, inner(v, v)));
        if (nv > 1e-8) {
            basis.push_back(v / nv);
            out.col(filled++) = basis.back();
        }
    }
    if (filled != n - r) {
        throw NumericalError("orthogonal_complement_basis: failed to complete the basis");
    }
    return out;
}

std::optional<double> verify_jacobian_factorization(const QpController& qp, const Vector& x_e, const Vector& lambda_e,
                                                    std::span<const int> indices) {
    const PointData pd = qp.evaluate(x_e);
    const auto n = x_e.size();
    if (!(pd.grad_v.norm() > 0.0)) {
        return std::nullopt;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eg(pd.gram, Eigen::EigenvaluesOnly);
    if (!(eg.eigenvalues().minCoeff() > 1e-12 * std::max(1.0, eg.eigenvalues().maxCoeff()))) {
        return std::nullopt;
    }
    const double lambda0 = qp.params().p * pd.gamma;
    const Matrix j_a = jacobian_J_A(qp, x_e, lambda0, lambda_e, indices);
    const Matrix j_fa = jacobian_f_A(qp, x_e, lambda_e, indices);
    const Vector g_grad_v = pd.gram * pd.grad_v;
    const Matrix p_v = Matrix::Identity(n, n) - g_grad_v * pd.grad_v.transpose() / pd.c;
    const Matrix lhs = p_v * j_a - (pd.gamma_prime / pd.c) * g_grad_v * pd.grad_v.transpose();

    Matrix b_v(n, n);
    b_v.col(0) = pd.grad_v;
    b_v.rightCols(n - 1) = orthogonal_complement_basis(g_grad_v, Matrix::Identity(n, n));
    Vector d = Vector::Ones(n);
    d(0) = 1.0 / (qp.params().p * pd.c);
    const Matrix rhs = b_v.transpose().fullPivLu().solve(d.asDiagonal() * b_v.transpose() * j_fa);
    return (lhs - rhs).cwiseAbs().maxCoeff() / std::max(1.0, lhs.cwiseAbs().maxCoeff());
}

DifferenceDiagnostic jacobian_difference_diagnostic(const QpController& qp, const Vector& x_e, const Vector& lambda_e,
                                                    std::span<const int> indices) {
    const PointData pd = qp.evaluate(x_e);
    const double p = qp.params().p;
    const Matrix diff = jacobian_J_A(qp, x_e, p * pd.gamma, lambda_e, indices) - jacobian_f_A(qp, x_e, lambda_e, indices);
    const Matrix outer = p * pd.gamma_prime * pd.grad_v * pd.grad_v.transpose();
    DifferenceDiagnostic out;
    out.residual_without_g = (diff - outer).cwiseAbs().maxCoeff();
    out.residual_with_g = (diff - pd.gram * outer).cwiseAbs().maxCoeff();
    return out;
}

StabilityVerdict classify(const QpController& qp, const Vector& x_e, const Vector& lambda_e,
                          std::span<const int> indices) {
    const JacobianBundle jb = closed_loop_jacobian(qp, x_e, lambda_e, indices);
    StabilityVerdict out;
    out.spectrum_fcl = sorted_eigenvalues(jb.j_fcl);
    const auto n = x_e.size();
    const auto r = static_cast<Eigen::Index>(indices.size());
    if (r == n) {
        out.verdict = Verdict::Stable;
        return out;
    }
    const Matrix ua = select_columns(stacked_gradients_U(qp.certificates(), x_e), indices);
    const Matrix basis = orthogonal_complement_basis(ua, Matrix::Identity(n, n));
    const Matrix sym = 0.5 * (jb.j_fa + jb.j_fa.transpose());
    const Matrix m = basis.transpose() * sym * basis;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
    const Eigen::Index top = es.eigenvalues().size() - 1;
    const double mu = es.eigenvalues()(top);
    out.mu_max = mu;
    const double eps = qp.tolerances().stability;
    if (mu > eps) {
        out.verdict = Verdict::Unstable;
        Vector w = basis * es.eigenvectors().col(top);
        Eigen::Index imax = 0;
        w.cwiseAbs().maxCoeff(&imax);
        if (w(imax) < 0.0) {
            w = -w;
        }
        out.witness_v = w;
    } else if (mu < -eps) {
        out.verdict = Verdict::Stable;
    } else {
        out.verdict = Verdict::Marginal;
    }
    return out;
}

SpectrumCheck spectrum_cross_check(const QpController& qp, const Vector& x_e, const StabilityVerdict& verdict) {
    if (verdict.verdict == Verdict::Marginal) {
        throw PreconditionError("spectrum_cross_check: marginal verdicts are not cross-checked");
    }
    SpectrumCheck out;
    out.eigenvalues = sorted_eigenvalues(finite_difference_closed_loop_jacobian(qp, x_e));
    const double eps = qp.tolerances().spectrum;
    const bool any_unstable =
        std::any_of(out.eigenvalues.begin(), out.eigenvalues.end(), [&](const auto& z) { return z.real() > eps; });
    const bool all_stable =
        std::all_of(out.eigenvalues.begin(), out.eigenvalues.end(), [&](const auto& z) { return z.real() < -eps; });
    out.agreement = verdict.verdict == Verdict::Unstable ? any_unstable : all_stable;
    return out;
}

}  // namespace cbfqp
