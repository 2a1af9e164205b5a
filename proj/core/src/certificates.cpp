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
#include "cbfqp/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cbfqp {

QuadraticCertificate::QuadraticCertificate(CertificateKind kind, Matrix shape, Vector center, double offset)
    : kind_(kind), shape_(std::move(shape)), center_(std::move(center)), offset_(offset) {
    const auto n = center_.size();
    if (n == 0 || shape_.rows() != n || shape_.cols() != n) {
        throw ContractViolation("QuadraticCertificate: shape must be n x n with n = dim(center) > 0");
    }
    const double asym = (shape_ - shape_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, shape_.cwiseAbs().maxCoeff())) {
        throw InvalidParameter("QuadraticCertificate: shape must be symmetric");
    }
    shape_ = 0.5 * (shape_ + shape_.transpose()).eval();
    if (kind_ == CertificateKind::Clf) {
        if (offset_ != 0.0) {
            throw InvalidParameter("CLF offset must be zero");
        }
        Eigen::LLT<Matrix> llt(shape_);
        if (llt.info() != Eigen::Success) {
            throw InvalidParameter("CLF shape must be positive definite");
        }
    }
}

QuadraticCertificate QuadraticCertificate::clf(Matrix shape, Vector center) {
    return {CertificateKind::Clf, std::move(shape), std::move(center), 0.0};
}

QuadraticCertificate QuadraticCertificate::cbf(Matrix shape, Vector center, double offset) {
    return {CertificateKind::Cbf, std::move(shape), std::move(center), offset};
}

double QuadraticCertificate::value(const Vector& x) const {
    require_size(x, center_.size(), "certificate value");
    const Vector d = x - center_;
    return d.dot(shape_ * d) + offset_;
}

Vector QuadraticCertificate::gradient(const Vector& x) const {
    require_size(x, center_.size(), "certificate gradient");
    return 2.0 * (shape_ * (x - center_));
}

bool QuadraticCertificate::operator==(const QuadraticCertificate& other) const {
    return kind_ == other.kind_ && shape_ == other.shape_ && center_ == other.center_ && offset_ == other.offset_;
}

LinearClassK::LinearClassK(double gain) : gain_(gain) {
    if (!(gain_ > 0.0) || !std::isfinite(gain_)) {
        throw InvalidParameter("class-K gain must be positive and finite");
    }
}

CertificateSet::CertificateSet(std::optional<LyapunovTerm> clf, std::vector<BarrierTerm> cbfs)
    : clf_(std::move(clf)), cbfs_(std::move(cbfs)) {
    if (cbfs_.empty()) {
        throw ContractViolation("CertificateSet: at least one CBF is required");
    }
    dim_ = cbfs_.front().certificate.dim();
    for (const auto& b : cbfs_) {
        if (b.certificate.kind() != CertificateKind::Cbf) {
            throw ContractViolation("CertificateSet: barrier list contains a non-CBF certificate");
        }
        if (b.certificate.dim() != dim_) {
            throw ContractViolation("CertificateSet: CBF dimensions differ");
        }
    }
    if (clf_) {
        if (clf_->certificate.kind() != CertificateKind::Clf) {
            throw ContractViolation("CertificateSet: CLF slot holds a non-CLF certificate");
        }
        if (clf_->certificate.dim() != dim_) {
            throw ContractViolation("CertificateSet: CLF dimension differs from CBFs");
        }
    }
}

double CertificateSet::clf_value(const Vector& x) const { return clf_ ? clf_->certificate.value(x) : 0.0; }

Vector CertificateSet::clf_gradient(const Vector& x) const {
    return clf_ ? clf_->certificate.gradient(x) : Vector::Zero(dim_);
}

Matrix CertificateSet::clf_hessian() const { return clf_ ? clf_->certificate.hessian() : Matrix::Zero(dim_, dim_); }

Vector CertificateSet::barrier_values(const Vector& x) const {
    Vector h(num_cbfs());
    for (int i = 0; i < num_cbfs(); ++i) {
        h(i) = cbfs_[static_cast<std::size_t>(i)].certificate.value(x);
    }
    return h;
}

double eval_certificate(const QuadraticCertificate& c, const Vector& x) { return c.value(x); }

namespace {

void check_indices(const CertificateSet& set, std::span<const int> indices) {
    if (indices.empty()) {
        throw ContractViolation("index set must be nonempty");
    }
    std::vector<bool> seen(static_cast<std::size_t>(set.num_cbfs()), false);
    for (const int i : indices) {
        if (i < 0 || i >= set.num_cbfs()) {
            throw ContractViolation("CBF index " + std::to_string(i + 1) + " out of range");
        }
        if (seen[static_cast<std::size_t>(i)]) {
            throw ContractViolation("duplicate CBF index " + std::to_string(i + 1));
        }
        seen[static_cast<std::size_t>(i)] = true;
    }
}

}  // namespace

Matrix stacked_gradients_U(const CertificateSet& set, std::span<const int> indices, const Vector& x) {
    check_indices(set, indices);
    Matrix u(x.size(), static_cast<Eigen::Index>(indices.size()));
    for (std::size_t j = 0; j < indices.size(); ++j) {
        u.col(static_cast<Eigen::Index>(j)) =
            set.cbfs()[static_cast<std::size_t>(indices[j])].certificate.gradient(x);
    }
    return u;
}

Matrix stacked_gradients_U(const CertificateSet& set, const Vector& x) {
    const auto idx = all_indices(set);
    return stacked_gradients_U(set, idx, x);
}

Vector alpha_vector(const CertificateSet& set, std::span<const int> indices, const Vector& x) {
    check_indices(set, indices);
    Vector out(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t j = 0; j < indices.size(); ++j) {
        const auto& b = set.cbfs()[static_cast<std::size_t>(indices[j])];
        out(static_cast<Eigen::Index>(j)) = b.alpha.value(b.certificate.value(x));
    }
    return out;
}

Vector alpha_prime_vector(const CertificateSet& set, std::span<const int> indices, const Vector& x) {
    check_indices(set, indices);
    Vector out(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t j = 0; j < indices.size(); ++j) {
        const auto& b = set.cbfs()[static_cast<std::size_t>(indices[j])];
        out(static_cast<Eigen::Index>(j)) = b.alpha.derivative(b.certificate.value(x));
    }
    return out;
}

std::vector<int> all_indices(const CertificateSet& set) {
    std::vector<int> idx(static_cast<std::size_t>(set.num_cbfs()));
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

}  // namespace cbfqp
