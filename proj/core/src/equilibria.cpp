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
#include "cbfqp/equilibria.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

namespace cbfqp {

std::string to_string(EquilibriumKind k) { return k == EquilibriumKind::Boundary ? "boundary" : "interior"; }

bool operator==(const SearchConfig& a, const SearchConfig& b) {
    return a.boundary_seeds == b.boundary_seeds && a.interior_seeds == b.interior_seeds && a.seed == b.seed &&
           a.max_iterations == b.max_iterations && a.max_halvings == b.max_halvings &&
           same_values(a.box_lo, b.box_lo) && same_values(a.box_hi, b.box_hi);
}

bool operator==(const EquilibriumReport& a, const EquilibriumReport& b) {
    return same_values(a.x_e, b.x_e) && a.kind == b.kind && a.active == b.active &&
           same_values(a.lambda_e, b.lambda_e) && a.lambda0_e == b.lambda0_e && a.residual_f == b.residual_f &&
           a.residual_h == b.residual_h && a.validated_in_S_A == b.validated_in_S_A &&
           a.degenerate == b.degenerate && a.validation_note == b.validation_note && a.stability == b.stability;
}

Vector residual_f_A(const QpController& qp, const Vector& x, const Vector& lambda, std::span<const int> indices) {
    require_size(lambda, static_cast<Eigen::Index>(indices.size()), "residual_f_A multipliers");
    const auto& certs = qp.certificates();
    const Matrix gram = eval_gram_G(qp.model(), qp.params().h_metric, x);
    const double v = certs.clf_value(x);
    Vector out = eval_f_nom(qp.model(), qp.params().nominal, x) -
                 qp.params().p * certs.gamma(v) * (gram * certs.clf_gradient(x));
    if (!indices.empty()) {
        out += gram * (stacked_gradients_U(certs, indices, x) * lambda);
    }
    return out;
}

std::vector<std::vector<int>> active_index_sets(int num_cbfs, int state_dim) {
    std::vector<std::vector<int>> out;
    const int r_max = std::min(num_cbfs, state_dim);
    for (int r = 1; r <= r_max; ++r) {
        std::vector<bool> pick(static_cast<std::size_t>(num_cbfs), false);
        std::fill(pick.begin(), pick.begin() + r, true);
        do {
            std::vector<int> set;
            for (int i = 0; i < num_cbfs; ++i) {
                if (pick[static_cast<std::size_t>(i)]) {
                    set.push_back(i);
                }
            }
            out.push_back(std::move(set));
        } while (std::prev_permutation(pick.begin(), pick.end()));
    }
    return out;
}

Vector nonnegative_least_squares(const Matrix& m, const Vector& y) {
    const auto k = m.cols();
    Vector best = Vector::Zero(k);
    double best_res = y.norm();
    for (std::uint32_t mask = 1; mask < (1U << k); ++mask) {
        std::vector<Eigen::Index> cols;
        for (Eigen::Index j = 0; j < k; ++j) {
            if ((mask >> j) & 1U) {
                cols.push_back(j);
            }
        }
        Matrix sub(m.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) {
            sub.col(static_cast<Eigen::Index>(j)) = m.col(cols[j]);
        }
        const Vector s = sub.completeOrthogonalDecomposition().solve(y);
        if ((s.array() < 0.0).any()) {
            continue;
        }
        const double res = (sub * s - y).norm();
        if (res < best_res) {
            best_res = res;
            best.setZero();
            for (std::size_t j = 0; j < cols.size(); ++j) {
                best(cols[j]) = s(static_cast<Eigen::Index>(j));
            }
        }
    }
    return best;
}

namespace {

enum class NewtonOutcome { Converged, Singular, NotConverged };

// Damped Newton on a square system. Convergence needs both a small residual
// and a small step so that slowly converging (non-hyperbolic) roots are
// driven all the way in.
NewtonOutcome newton(const std::function<Vector(const Vector&)>& residual,
                     const std::function<Matrix(const Vector&)>& jacobian, Vector& z, const SearchConfig& cfg,
                     double tol) {
    Vector f = residual(z);
    for (int it = 0; it < cfg.max_iterations; ++it) {
        const double scale = std::max(1.0, z.cwiseAbs().maxCoeff());
        if (f.cwiseAbs().maxCoeff() == 0.0) {
            return NewtonOutcome::Converged;
        }
        Eigen::FullPivLU<Matrix> lu(jacobian(z));
        if (!lu.isInvertible()) {
            return NewtonOutcome::Singular;
        }
        const Vector dz = lu.solve(-f);
        if (!dz.allFinite()) {
            return NewtonOutcome::Singular;
        }
        const double f_norm = f.norm();
        bool moved = false;
        double t = 1.0;
        for (int h = 0; h <= cfg.max_halvings; ++h, t *= 0.5) {
            const Vector z_try = z + t * dz;
            const Vector f_try = residual(z_try);
            if (f_try.allFinite() && f_try.norm() < f_norm) {
                z = z_try;
                f = f_try;
                moved = true;
                break;
            }
        }
        const bool small_step = dz.norm() <= 1e-9 * scale;
        if (f.cwiseAbs().maxCoeff() <= tol * scale && small_step) {
            return NewtonOutcome::Converged;
        }
        if (!moved) {
            return f.cwiseAbs().maxCoeff() <= tol * scale ? NewtonOutcome::Converged : NewtonOutcome::NotConverged;
        }
    }
    return NewtonOutcome::NotConverged;
}

Vector barrier_values_at(const QpController& qp, std::span<const int> indices, const Vector& x) {
    Vector h(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        h(static_cast<Eigen::Index>(i)) = qp.certificates().cbfs()[static_cast<std::size_t>(indices[i])].certificate.value(x);
    }
    return h;
}

// Gauss-Newton minimum-norm projection onto {h_A = 0}.
std::optional<Vector> project_onto_intersection(const QpController& qp, std::span<const int> indices, Vector x) {
    for (int it = 0; it < 60; ++it) {
        const Vector h = barrier_values_at(qp, indices, x);
        if (h.cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, x.norm())) {
            break;
        }
        const Matrix ua = stacked_gradients_U(qp.certificates(), indices, x);
        const Vector step = ua.transpose().completeOrthogonalDecomposition().solve(h);
        if (!step.allFinite()) {
            return std::nullopt;
        }
        x -= step;
    }
    if (barrier_values_at(qp, indices, x).cwiseAbs().maxCoeff() > 1e-6) {
        return std::nullopt;
    }
    return x;
}

std::vector<Vector> boundary_seeds(const QpController& qp, std::span<const int> indices, const SearchConfig& cfg) {
    const auto& cert = qp.certificates().cbfs()[static_cast<std::size_t>(indices.front())].certificate;
    const auto n = static_cast<Eigen::Index>(cert.dim());
    std::mt19937_64 rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(indices.front()) + 1)));
    std::normal_distribution<double> normal(0.0, 1.0);
    const double rho = -cert.offset();
    Eigen::LLT<Matrix> llt(cert.shape());
    const bool ellipsoid = llt.info() == Eigen::Success && rho > 0.0;
    std::vector<Vector> seeds;
    for (int s = 0; s < cfg.boundary_seeds; ++s) {
        Vector dir(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            dir(i) = normal(rng);
        }
        Vector x;
        if (ellipsoid) {
            dir /= std::max(dir.norm(), 1e-300);
            // (x - c)^T S (x - c) = rho with S = L L^T.
            x = cert.center() + std::sqrt(rho) * llt.matrixU().solve(dir);
        } else {
            x = cert.center() + dir;
        }
        if (auto p = project_onto_intersection(qp, indices, x)) {
            seeds.push_back(*p);
        }
    }
    return seeds;
}

// Keeps the lowest-residual representative within `radius`.
template <class Key>
std::vector<EquilibriumReport> deduplicate(std::vector<EquilibriumReport> found, double radius, Key key, int* dups) {
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
        return std::max(a.residual_f, a.residual_h) < std::max(b.residual_f, b.residual_h);
    });
    std::vector<EquilibriumReport> out;
    for (auto& r : found) {
        const Vector kr = key(r);
        const bool dup = std::any_of(out.begin(), out.end(), [&](const auto& o) { return (key(o) - kr).norm() <= radius; });
        if (dup) {
            ++*dups;
        } else {
            out.push_back(std::move(r));
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::lexicographical_compare(a.x_e.data(), a.x_e.data() + a.x_e.size(), b.x_e.data(),
                                            b.x_e.data() + b.x_e.size());
    });
    return out;
}

void default_box(const QpController& qp, const SearchConfig& cfg, Vector& lo, Vector& hi) {
    const auto n = static_cast<Eigen::Index>(qp.state_dim());
    if (cfg.box_lo.size() == n && cfg.box_hi.size() == n) {
        lo = cfg.box_lo;
        hi = cfg.box_hi;
        return;
    }
    lo = Vector::Zero(n);
    hi = Vector::Zero(n);
    auto extend = [&](const Vector& c) {
        lo = lo.cwiseMin(c);
        hi = hi.cwiseMax(c);
    };
    if (qp.certificates().has_clf()) {
        extend(qp.certificates().clf()->certificate.center());
    }
    for (const auto& b : qp.certificates().cbfs()) {
        extend(b.certificate.center());
    }
    const double pad = std::max(2.0, 0.5 * (hi - lo).maxCoeff());
    lo.array() -= pad;
    hi.array() += pad;
}

}  // namespace

std::vector<EquilibriumReport> find_boundary_equilibria(const QpController& qp, std::span<const int> indices,
                                                        const SearchConfig& search, SearchStats* stats) {
    SearchStats local;
    SearchStats& st = stats ? *stats : local;
    const auto n = static_cast<Eigen::Index>(qp.state_dim());
    const auto r = static_cast<Eigen::Index>(indices.size());
    if (r < 1 || r > n) {
        throw ContractViolation("find_boundary_equilibria: need 1 <= |A| <= n");
    }
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0 || indices[i] >= qp.num_cbfs() || (i > 0 && indices[i] <= indices[i - 1])) {
            throw ContractViolation("find_boundary_equilibria: indices must be sorted, unique and in range");
        }
    }
    const Tolerances& tol = qp.tolerances();
    const double p = qp.params().p;
    const auto& certs = qp.certificates();

    auto residual = [&](const Vector& z) -> Vector {
        const Vector x = z.head(n);
        Vector out(n + r);
        out.head(n) = residual_f_A(qp, x, z.tail(r), indices);
        out.tail(r) = barrier_values_at(qp, indices, x);
        return out;
    };
    auto jacobian = [&](const Vector& z) -> Matrix {
        const Vector x = z.head(n);
        const Matrix ua = stacked_gradients_U(certs, indices, x);
        Matrix j = Matrix::Zero(n + r, n + r);
        j.topLeftCorner(n, n) = jacobian_f_A(qp, x, z.tail(r), indices);
        j.topRightCorner(n, r) = eval_gram_G(qp.model(), qp.params().h_metric, x) * ua;
        j.bottomLeftCorner(r, n) = ua.transpose();
        return j;
    };

    std::vector<EquilibriumReport> found;
    for (const Vector& x0 : boundary_seeds(qp, indices, search)) {
        ++st.seeds;
        const Matrix gram = eval_gram_G(qp.model(), qp.params().h_metric, x0);
        const double v = certs.clf_value(x0);
        const Vector target = p * certs.gamma(v) * (gram * certs.clf_gradient(x0)) -
                              eval_f_nom(qp.model(), qp.params().nominal, x0);
        Vector z(n + r);
        z.head(n) = x0;
        z.tail(r) = nonnegative_least_squares(gram * stacked_gradients_U(certs, indices, x0), target);
        const NewtonOutcome outcome = newton(residual, jacobian, z, search, tol.newton);
        if (outcome == NewtonOutcome::Singular) {
            ++st.singular_jacobian;
            continue;
        }
        if (outcome == NewtonOutcome::NotConverged) {
            ++st.not_converged;
            continue;
        }
        EquilibriumReport rep;
        rep.kind = EquilibriumKind::Boundary;
        rep.active.assign(indices.begin(), indices.end());
        rep.x_e = z.head(n);
        rep.lambda_e = z.tail(r);
        if ((rep.lambda_e.array() < -tol.negative_multiplier).any()) {
            ++st.negative_multiplier;
            continue;
        }
        rep.lambda_e = rep.lambda_e.cwiseMax(0.0);
        rep.residual_f = residual_f_A(qp, rep.x_e, rep.lambda_e, indices).norm();
        rep.residual_h = barrier_values_at(qp, indices, rep.x_e).cwiseAbs().maxCoeff();
        if (!(rep.residual_f <= tol.equilibrium && rep.residual_h <= tol.equilibrium)) {
            ++st.not_converged;
            continue;
        }
        rep.lambda0_e = p * certs.gamma(certs.clf_value(rep.x_e));
        found.push_back(std::move(rep));
    }
    auto key = [](const EquilibriumReport& e) {
        Vector k(e.x_e.size() + e.lambda_e.size());
        k << e.x_e, e.lambda_e;
        return k;
    };
    auto out = deduplicate(std::move(found), tol.dedup, key, &st.duplicates);
    for (auto& rep : out) {
        rep = validate_equilibrium(qp, std::move(rep));
    }
    return out;
}

EquilibriumReport validate_equilibrium(const QpController& qp, EquilibriumReport report) {
    const Tolerances& tol = qp.tolerances();
    report.validated_in_S_A = false;
    std::ostringstream note;
    const auto sol = qp.try_solve(report.x_e);
    if (report.kind == EquilibriumKind::Boundary && report.lambda_e.size() > 0) {
        const double lmax = std::max(1.0, report.lambda_e.maxCoeff());
        report.degenerate = report.lambda_e.minCoeff() <= tol.active * lmax;
    }
    if (!sol) {
        report.validation_note = "QP infeasible at x_e";
        return report;
    }
    const double fcl = qp.closed_loop_field(report.x_e, *sol).norm();
    const Vector h_all = qp.certificates().barrier_values(report.x_e);
    bool ok = true;
    auto fail = [&](const std::string& why) {
        if (!ok) {
            note << "; ";
        }
        note << why;
        ok = false;
    };
    if (report.kind == EquilibriumKind::Boundary) {
        const ConstraintSet expected = ConstraintSet::clf_with(report.active);
        if (!(sol->active_set == expected)) {
            fail("QP active set " + sol->active_set.to_string() + " differs from " + expected.to_string());
        }
        if (std::abs(sol->lambda0 - report.lambda0_e) > 1e-6 * std::max(1.0, std::abs(report.lambda0_e))) {
            fail("CLF multiplier mismatch");
        }
        for (std::size_t i = 0; i < report.active.size(); ++i) {
            const double q = sol->lambda(report.active[i]);
            const double e = report.lambda_e(static_cast<Eigen::Index>(i));
            if (std::abs(q - e) > 1e-6 * std::max(1.0, std::abs(e))) {
                fail("CBF " + std::to_string(report.active[i] + 1) + " multiplier mismatch");
            }
        }
        for (Eigen::Index j = 0; j < h_all.size(); ++j) {
            const bool in_a = std::find(report.active.begin(), report.active.end(), static_cast<int>(j)) !=
                              report.active.end();
            if (!in_a && h_all(j) < -tol.equilibrium) {
                fail("outside the safe set (h_" + std::to_string(j + 1) + " < 0)");
            }
        }
    } else {
        if (!sol->active_set.cbf_indices().empty()) {
            fail("a barrier constraint is active");
        }
        if (h_all.size() > 0 && !(h_all.minCoeff() > tol.interior)) {
            fail("not strictly inside the safe set");
        }
    }
    if (!(fcl <= 1e-6)) {
        fail("closed-loop field does not vanish");
    }
    report.validated_in_S_A = ok;
    report.validation_note = ok ? "validated" : note.str();
    return report;
}

std::vector<EquilibriumReport> find_interior_equilibria(const QpController& qp, const SearchConfig& search,
                                                        SearchStats* stats) {
    SearchStats local;
    SearchStats& st = stats ? *stats : local;
    const auto n = static_cast<Eigen::Index>(qp.state_dim());
    const Tolerances& tol = qp.tolerances();
    const std::vector<int> none;
    const Vector no_lambda(0);
    auto residual = [&](const Vector& x) { return residual_f_A(qp, x, no_lambda, none); };
    auto jacobian = [&](const Vector& x) { return jacobian_f_A(qp, x, no_lambda, none); };

    std::vector<Vector> seeds;
    if (qp.certificates().has_clf()) {
        seeds.push_back(qp.certificates().clf()->certificate.center());
    }
    seeds.push_back(Vector::Zero(n));
    Vector lo;
    Vector hi;
    default_box(qp, search, lo, hi);
    std::mt19937_64 rng(search.seed ^ 0x5851f42d4c957f2dULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int s = 0; s < search.interior_seeds; ++s) {
        Vector x(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            x(i) = lo(i) + (hi(i) - lo(i)) * unit(rng);
        }
        seeds.push_back(std::move(x));
    }

    std::vector<EquilibriumReport> found;
    for (Vector x : seeds) {
        ++st.seeds;
        const NewtonOutcome outcome = newton(residual, jacobian, x, search, tol.newton);
        if (outcome == NewtonOutcome::Singular) {
            ++st.singular_jacobian;
            continue;
        }
        if (outcome == NewtonOutcome::NotConverged) {
            ++st.not_converged;
            continue;
        }
        EquilibriumReport rep;
        rep.kind = EquilibriumKind::Interior;
        rep.x_e = x;
        rep.lambda_e = Vector(0);
        rep.residual_f = residual(x).norm();
        if (!(rep.residual_f <= tol.equilibrium)) {
            ++st.not_converged;
            continue;
        }
        const Vector h = qp.certificates().barrier_values(x);
        if (h.size() > 0 && !(h.minCoeff() > tol.interior)) {
            continue;
        }
        const auto sol = qp.try_solve(x);
        if (sol && !sol->active_set.cbf_indices().empty()) {
            continue;
        }
        rep.lambda0_e = qp.params().p * qp.certificates().gamma(qp.certificates().clf_value(x));
        found.push_back(std::move(rep));
    }
    auto out = deduplicate(std::move(found), tol.dedup, [](const EquilibriumReport& e) { return e.x_e; },
                           &st.duplicates);
    for (auto& rep : out) {
        rep = validate_equilibrium(qp, std::move(rep));
    }
    return out;
}

}  // namespace cbfqp
