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
#ifndef CBFQP_TYPES_HPP
#define CBFQP_TYPES_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cbfqp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Plant state x in R^n.
using StateVector = Eigen::VectorXd;
/// Plant input u in R^m.
using ControlVector = Eigen::VectorXd;

/**
 * Numerical thresholds shared by every analysis stage.
 *
 * Each field can be overridden from a scenario file; the defaults are the
 * values the toolkit is validated against.
 */
struct Tolerances {
    double active = 1e-8;            //!< |constraint residual| below which a row counts as active
    double multiplier_clamp = 1e-10; //!< multipliers in [-clamp, 0) are clamped to zero
    double primal = 1e-8;            //!< allowed primal infeasibility of a KKT candidate
    double image = 1e-8;             //!< relative least-squares residual for Im-membership
    double rank = 1e-12;             //!< singular values below rank * sigma_max are dropped
    double equilibrium = 1e-8;       //!< residual bound on accepted equilibria
    double dedup = 1e-6;             //!< joint (x, lambda) merge radius for equilibria
    double interior = 1e-9;          //!< strict interior margin on h_i
    double negative_multiplier = 1e-6; //!< Newton roots with lambda_i below -this are rejected
    double newton = 1e-12;           //!< Newton residual target
    double stability = 1e-7;         //!< Marginal band half-width for mu_max
    double spectrum = 1e-6;          //!< eigenvalue sign threshold in the spectral cross-check
    double fd_step = 1e-6;           //!< central-difference step, relative to max(1, |x|)
    double max_schur_condition = 1e12;

    bool operator==(const Tolerances&) const = default;
};

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Dimension mismatch or otherwise malformed call.
class ContractViolation : public Error {
  public:
    using Error::Error;
};

/// A parameter is outside its admissible domain (non-SPD H, p <= 0, ...).
class InvalidParameter : public Error {
  public:
    using Error::Error;
};

/// Non-finite value or failed numerical procedure.
class NumericalError : public Error {
  public:
    using Error::Error;
};

/// A documented precondition of an analysis routine does not hold.
class PreconditionError : public Error {
  public:
    using Error::Error;
};

/// Ill-conditioned Schur complement; carries the measured condition number.
class IllConditioned : public PreconditionError {
  public:
    IllConditioned(const std::string& what, double condition)
        : PreconditionError(what), condition_(condition) {}
    [[nodiscard]] double condition() const { return condition_; }

  private:
    double condition_;
};

/// I/O failure while reading or writing artifacts.
class IoError : public Error {
  public:
    using Error::Error;
};

/// Throws ContractViolation when a vector does not have the expected size.
inline void require_size(const Eigen::Ref<const Vector>& v, Eigen::Index expected, const char* what) {
    if (v.size() != expected) {
        throw ContractViolation(std::string(what) + ": expected dimension " + std::to_string(expected) +
                                ", got " + std::to_string(v.size()));
    }
}

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

/// Exact equality that treats differently sized arrays as unequal.
template <class A, class B>
bool same_values(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.derived().array() == b.derived().array()).all();
}

}  // namespace cbfqp

#endif  // CBFQP_TYPES_HPP
