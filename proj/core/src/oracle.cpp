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
#include "cbfqp/oracle.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace cbfqp {

namespace {

// Dense row-major rational matrix, just enough for exact KKT solves.
class QMatrix {
  public:
    QMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, mpq_class(0)) {}

    static QMatrix from(const Matrix& m) {
        QMatrix q(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
        for (std::size_t i = 0; i < q.rows_; ++i) {
            for (std::size_t j = 0; j < q.cols_; ++j) {
                q(i, j) = mpq_class(m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            }
        }
        return q;
    }

    mpq_class& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const mpq_class& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    [[nodiscard]] std::size_t rows() const { return rows_; }
    [[nodiscard]] std::size_t cols() const { return cols_; }

  private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<mpq_class> data_;
};

using QVector = std::vector<mpq_class>;

QVector to_q(const Vector& v) {
    QVector out(static_cast<std::size_t>(v.size()));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = mpq_class(v(static_cast<Eigen::Index>(i)));
    }
    return out;
}

QVector mul(const QMatrix& m, const QVector& v) {
    QVector out(m.rows(), mpq_class(0));
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            out[i] += m(i, j) * v[j];
        }
    }
    return out;
}

QVector mul_transposed(const QMatrix& m, const QVector& v) {
    QVector out(m.cols(), mpq_class(0));
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            out[j] += m(i, j) * v[i];
        }
    }
    return out;
}

mpq_class dot(const QVector& a, const QVector& b) {
    mpq_class s(0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

// Exact Gaussian elimination; empty result when the matrix is singular.
std::optional<QVector> solve_exact(QMatrix a, QVector b) {
    const std::size_t n = a.rows();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        while (piv < n && sgn(a(piv, col)) == 0) {
            ++piv;
        }
        if (piv == n) {
            return std::nullopt;
        }
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a(col, j), a(piv, j));
            }
            std::swap(b[col], b[piv]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            if (sgn(a(r, col)) == 0) {
                continue;
            }
            const mpq_class factor = a(r, col) / a(col, col);
            for (std::size_t j = col; j < n; ++j) {
                a(r, j) -= factor * a(col, j);
            }
            b[r] -= factor * b[col];
        }
    }
    QVector x(n);
    for (std::size_t i = n; i-- > 0;) {
        mpq_class s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            s -= a(i, j) * x[j];
        }
        x[i] = s / a(i, i);
    }
    return x;
}

struct QuadraticQ {
    QMatrix shape;
    QVector center;
    mpq_class offset;
    mpq_class gain;

    [[nodiscard]] QVector diff(const QVector& x) const {
        QVector d(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            d[i] = x[i] - center[i];
        }
        return d;
    }
    [[nodiscard]] mpq_class value(const QVector& x) const {
        const QVector d = diff(x);
        return dot(d, mul(shape, d)) + offset;
    }
    [[nodiscard]] QVector gradient(const QVector& x) const {
        QVector g = mul(shape, diff(x));
        for (auto& e : g) {
            e *= 2;
        }
        return g;
    }
};

QuadraticQ to_q(const QuadraticCertificate& c, double gain) {
    return {QMatrix::from(c.shape()), to_q(c.center()), mpq_class(c.offset()), mpq_class(gain)};
}

}  // namespace

bool exact_oracle_applicable(const QpController& qp) {
    const auto& model = qp.model();
    if (model.derivative_tier() != DerivativeTier::Analytic) {
        return false;
    }
    if (std::holds_alternative<GenericNominal>(qp.params().nominal.spec())) {
        return false;
    }
    return qp.num_cbfs() <= 3;
}

OracleResult oracle_solve_exact(const QpController& qp, const Vector& x) {
    if (!exact_oracle_applicable(qp)) {
        throw OracleFailure("exact oracle requires an analytic-tier scenario with N <= 3");
    }
    const auto n = static_cast<std::size_t>(qp.state_dim());
    const auto m = static_cast<std::size_t>(qp.input_dim());
    const auto nb = static_cast<std::size_t>(qp.num_cbfs());
    const auto& model = qp.model();
    const auto& certs = qp.certificates();

    const QVector xq = to_q(x);
    const QMatrix g = QMatrix::from(std::get<ConstantInput>(model.input_spec()).g);
    QVector f(n, mpq_class(0));
    if (const auto* lin = std::get_if<LinearDrift>(&model.drift_spec())) {
        f = mul(QMatrix::from(lin->a), xq);
    }
    QVector u_nom(m, mpq_class(0));
    if (const auto* k = std::get_if<LinearFeedback>(&qp.params().nominal.spec())) {
        u_nom = mul(QMatrix::from(k->k), xq);
    }
    const QMatrix h_metric = QMatrix::from(qp.params().h_metric);
    const mpq_class p(qp.params().p);

    // Decision variable z = (u, delta). Constraint rows a_j^T z <= beta_j.
    const std::size_t nz = m + 1;
    std::vector<QVector> rows;
    QVector beta;
    {
        QVector grad_v(n, mpq_class(0));
        mpq_class gamma_v(0);
        if (certs.has_clf()) {
            const auto clf = to_q(certs.clf()->certificate, certs.clf()->gamma.gain());
            grad_v = clf.gradient(xq);
            gamma_v = clf.gain * clf.value(xq);
        }
        QVector a0 = mul_transposed(g, grad_v);
        a0.push_back(mpq_class(-1));
        rows.push_back(std::move(a0));
        beta.push_back(-(dot(grad_v, f) + gamma_v));
    }
    for (const auto& b : certs.cbfs()) {
        const auto cbf = to_q(b.certificate, b.alpha.gain());
        const QVector grad_h = cbf.gradient(xq);
        QVector ai = mul_transposed(g, grad_h);
        for (auto& e : ai) {
            e = -e;
        }
        ai.push_back(mpq_class(0));
        rows.push_back(std::move(ai));
        beta.push_back(dot(grad_h, f) + cbf.gain * cbf.value(xq));
    }

    // Objective 1/2 z^T Q z + q^T z with Q = diag(H, p), q = (-H u_nom, 0).
    QVector q_lin(nz, mpq_class(0));
    {
        const QVector hu = mul(h_metric, u_nom);
        for (std::size_t i = 0; i < m; ++i) {
            q_lin[i] = -hu[i];
        }
    }

    const std::size_t total_rows = nb + 1;
    for (std::size_t card = 0; card <= total_rows; ++card) {
        std::vector<bool> pick(total_rows, false);
        std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(card), true);
        do {
            std::vector<std::size_t> set;
            for (std::size_t r = 0; r < total_rows; ++r) {
                if (pick[r]) {
                    set.push_back(r);
                }
            }
            const std::size_t dim = nz + set.size();
            QMatrix kkt(dim, dim);
            QVector rhs(dim, mpq_class(0));
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < m; ++j) {
                    kkt(i, j) = h_metric(i, j);
                }
                rhs[i] = -q_lin[i];
            }
            kkt(m, m) = p;
            for (std::size_t s = 0; s < set.size(); ++s) {
                for (std::size_t j = 0; j < nz; ++j) {
                    kkt(nz + s, j) = rows[set[s]][j];
                    kkt(j, nz + s) = rows[set[s]][j];
                }
                rhs[nz + s] = beta[set[s]];
            }
            const auto sol = solve_exact(std::move(kkt), std::move(rhs));
            if (!sol) {
                continue;
            }
            bool ok = true;
            for (std::size_t s = 0; s < set.size() && ok; ++s) {
                ok = sgn((*sol)[nz + s]) >= 0;
            }
            const QVector z(sol->begin(), sol->begin() + static_cast<std::ptrdiff_t>(nz));
            for (std::size_t r = 0; r < total_rows && ok; ++r) {
                if (!pick[r]) {
                    ok = dot(rows[r], z) <= beta[r];
                }
            }
            if (!ok) {
                continue;
            }
            OracleResult res;
            res.method = OracleMethod::ExactRational;
            QpSolution out;
            out.u_star.resize(static_cast<Eigen::Index>(m));
            for (std::size_t i = 0; i < m; ++i) {
                out.u_star(static_cast<Eigen::Index>(i)) = z[i].get_d();
            }
            out.delta_star = z[m].get_d();
            out.lambda = Vector::Zero(static_cast<Eigen::Index>(nb));
            std::uint32_t bits = qp.is_safety_filter() ? 1U : 0U;
            for (std::size_t s = 0; s < set.size(); ++s) {
                const double mu = (*sol)[nz + s].get_d();
                if (set[s] == 0) {
                    out.lambda0 = mu;
                } else {
                    out.lambda(static_cast<Eigen::Index>(set[s] - 1)) = mu;
                }
                bits |= 1U << set[s];
            }
            out.active_set = ConstraintSet{bits};
            res.solution = out;
            return res;
        } while (std::prev_permutation(pick.begin(), pick.end()));
    }
    // A strictly convex QP with a nonempty feasible set always has a KKT point
    // with linearly independent active rows, so exhausting the sets proves infeasibility.
    return OracleResult{OracleMethod::ExactRational, std::nullopt, 0};
}

OracleResult oracle_solve_dual_ascent(const QpController& qp, const Vector& x, int max_iter, double tol) {
    const DualProblem dual = qp.assemble_dual(x);
    const PointData pd = qp.evaluate(x);
    const auto rows = dual.b.size();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(dual.a, Eigen::EigenvaluesOnly);
    const double lip = std::max(eig.eigenvalues().maxCoeff(), 1e-300);
    const double step = 1.0 / lip;
    const double scale = std::max(1.0, dual.b.cwiseAbs().maxCoeff());
    const bool clf_pinned = qp.is_safety_filter();

    auto project = [&](Vector& l) {
        l = l.cwiseMax(0.0);
        if (clf_pinned) {
            l(0) = 0.0;  // grad V = 0 and gamma(0) = 0 fix the CLF multiplier at zero
        }
    };
    auto residual = [&](const Vector& l) {
        const Vector w = dual.a * l - dual.b;
        double r = 0.0;
        for (Eigen::Index i = 0; i < rows; ++i) {
            if (clf_pinned && i == 0) {
                continue;
            }
            r = std::max(r, l(i) > 0.0 ? std::abs(w(i)) : std::max(0.0, -w(i)));
        }
        return r;
    };

    Vector lam = Vector::Zero(rows);
    Vector y = lam;
    double t = 1.0;
    double prev_obj = -std::numeric_limits<double>::infinity();
    for (int it = 1; it <= max_iter; ++it) {
        Vector next = y + step * (dual.b - dual.a * y);
        project(next);
        double obj = -0.5 * next.dot(dual.a * next) + next.dot(dual.b);
        if (obj < prev_obj) {
            // Restart: plain projected-gradient step from the last iterate, which is monotone.
            next = lam + step * (dual.b - dual.a * lam);
            project(next);
            obj = -0.5 * next.dot(dual.a * next) + next.dot(dual.b);
            y = next;
            t = 1.0;
        } else {
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            y = next + ((t - 1.0) / t_next) * (next - lam);
            t = t_next;
        }
        prev_obj = obj;
        lam = next;
        if (!lam.allFinite() || lam.cwiseAbs().maxCoeff() > 1e12 * scale) {
            return OracleResult{OracleMethod::DualProjectedGradient, std::nullopt, it};
        }
        if (residual(lam) <= tol * scale) {
            QpSolution sol;
            sol.lambda0 = lam(0);
            sol.lambda = lam.tail(rows - 1);
            const Vector combo = -sol.lambda0 * pd.grad_v + pd.u_all * sol.lambda;
            sol.u_star = pd.u_nom + qp.h_inverse() * (pd.g.transpose() * combo);
            sol.delta_star = sol.lambda0 / qp.params().p;
            std::uint32_t bits = clf_pinned ? 1U : 0U;
            for (Eigen::Index i = 0; i < rows; ++i) {
                if (lam(i) > 0.0) {
                    bits |= 1U << i;
                }
            }
            sol.active_set = ConstraintSet{bits};
            return OracleResult{OracleMethod::DualProjectedGradient, sol, it};
        }
    }
    throw OracleFailure("dual projected-gradient oracle did not converge within " + std::to_string(max_iter) +
                        " iterations");
}

OracleResult oracle_solve(const QpController& qp, const Vector& x) {
    if (exact_oracle_applicable(qp)) {
        return oracle_solve_exact(qp, x);
    }
    return oracle_solve_dual_ascent(qp, x);
}

}  // namespace cbfqp
