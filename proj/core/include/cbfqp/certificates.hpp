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
#ifndef CBFQP_CERTIFICATES_HPP
#define CBFQP_CERTIFICATES_HPP

#include <optional>
#include <span>
#include <vector>

#include "cbfqp/types.hpp"

namespace cbfqp {

enum class CertificateKind { Clf, Cbf };

/**
 * Quadratic certificate value(x) = (x - center)^T shape (x - center) + offset.
 *
 * A CLF must have a positive definite shape and zero offset. A CBF shape is
 * only required to be symmetric; its safe set is {x : value(x) >= 0}.
 */
class QuadraticCertificate {
  public:
    QuadraticCertificate(CertificateKind kind, Matrix shape, Vector center, double offset = 0.0);

    static QuadraticCertificate clf(Matrix shape, Vector center);
    static QuadraticCertificate cbf(Matrix shape, Vector center, double offset);

    [[nodiscard]] CertificateKind kind() const { return kind_; }
    [[nodiscard]] const Matrix& shape() const { return shape_; }
    [[nodiscard]] const Vector& center() const { return center_; }
    [[nodiscard]] double offset() const { return offset_; }
    [[nodiscard]] int dim() const { return static_cast<int>(center_.size()); }

    [[nodiscard]] double value(const Vector& x) const;
    [[nodiscard]] Vector gradient(const Vector& x) const;
    [[nodiscard]] Matrix hessian() const { return 2.0 * shape_; }

    bool operator==(const QuadraticCertificate& other) const;

  private:
    CertificateKind kind_;
    Matrix shape_;
    Vector center_;
    double offset_;
};

/// Linear class-K function s -> gain * s with gain > 0.
class LinearClassK {
  public:
    explicit LinearClassK(double gain = 1.0);

    [[nodiscard]] double gain() const { return gain_; }
    [[nodiscard]] double value(double s) const { return gain_ * s; }
    [[nodiscard]] double derivative(double /*s*/) const { return gain_; }

    bool operator==(const LinearClassK&) const = default;

  private:
    double gain_;
};

struct LyapunovTerm {
    QuadraticCertificate certificate;
    LinearClassK gamma;
};

struct BarrierTerm {
    QuadraticCertificate certificate;
    LinearClassK alpha;
};

/**
 * The CLF (optional) and the ordered list of CBFs.
 *
 * Without a CLF, V and its derivatives are identically zero; that is how
 * safety-filter mode is expressed. Barrier indices are 0-based here and
 * 1-based in every user-facing artifact.
 */
class CertificateSet {
  public:
    CertificateSet(std::optional<LyapunovTerm> clf, std::vector<BarrierTerm> cbfs);

    [[nodiscard]] bool has_clf() const { return clf_.has_value(); }
    [[nodiscard]] const std::optional<LyapunovTerm>& clf() const { return clf_; }
    [[nodiscard]] const std::vector<BarrierTerm>& cbfs() const { return cbfs_; }
    [[nodiscard]] int num_cbfs() const { return static_cast<int>(cbfs_.size()); }
    [[nodiscard]] int dim() const { return dim_; }

    /// V(x); 0 without a CLF.
    [[nodiscard]] double clf_value(const Vector& x) const;
    [[nodiscard]] Vector clf_gradient(const Vector& x) const;
    [[nodiscard]] Matrix clf_hessian() const;
    [[nodiscard]] double gamma(double v) const { return clf_ ? clf_->gamma.value(v) : 0.0; }
    [[nodiscard]] double gamma_prime(double v) const { return clf_ ? clf_->gamma.derivative(v) : 0.0; }

    /// (h_1(x), ..., h_N(x)).
    [[nodiscard]] Vector barrier_values(const Vector& x) const;

  private:
    std::optional<LyapunovTerm> clf_;
    std::vector<BarrierTerm> cbfs_;
    int dim_;
};

/// V(x) or h_i(x).
double eval_certificate(const QuadraticCertificate& c, const Vector& x);

/**
 * U_A = [grad h_{a_1} ... grad h_{a_r}] in the given column order.
 *
 * Throws ContractViolation on an empty, out-of-range or duplicated index.
 */
Matrix stacked_gradients_U(const CertificateSet& set, std::span<const int> indices, const Vector& x);

/// All N gradients as columns.
Matrix stacked_gradients_U(const CertificateSet& set, const Vector& x);

/// (alpha_{a_j}(h_{a_j}(x)))_j.
Vector alpha_vector(const CertificateSet& set, std::span<const int> indices, const Vector& x);

/// diag(alpha'_{a_j}(h_{a_j}(x))).
Vector alpha_prime_vector(const CertificateSet& set, std::span<const int> indices, const Vector& x);

std::vector<int> all_indices(const CertificateSet& set);

}  // namespace cbfqp

#endif  // CBFQP_CERTIFICATES_HPP
