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
#ifndef CBFQP_EQUILIBRIA_HPP
#define CBFQP_EQUILIBRIA_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbfqp/qp.hpp"
#include "cbfqp/stability.hpp"

namespace cbfqp {

/// Multistart Newton settings shared by the boundary and interior searches.
struct SearchConfig {
    int boundary_seeds = 64;
    int interior_seeds = 64;
    std::uint64_t seed = 0;
    int max_iterations = 100;
    int max_halvings = 8;
    /// Interior seeding box; derived from the certificate centers when empty.
    Vector box_lo;
    Vector box_hi;

    friend bool operator==(const SearchConfig& a, const SearchConfig& b);
};

enum class EquilibriumKind { Boundary, Interior };

std::string to_string(EquilibriumKind k);

struct EquilibriumReport {
    Vector x_e;
    EquilibriumKind kind = EquilibriumKind::Boundary;
    std::vector<int> active;  //!< 0-based barrier indices A (empty for interior points)
    Vector lambda_e;          //!< size |A|
    double lambda0_e = 0.0;   //!< p gamma(V(x_e))
    double residual_f = 0.0;
    double residual_h = 0.0;
    bool validated_in_S_A = false;
    bool degenerate = false;  //!< some lambda_i is numerically zero
    std::string validation_note;
    std::optional<StabilityVerdict> stability;

    friend bool operator==(const EquilibriumReport& a, const EquilibriumReport& b);
};

/// Seed bookkeeping for diagnostics.
struct SearchStats {
    int seeds = 0;
    int singular_jacobian = 0;
    int not_converged = 0;
    int negative_multiplier = 0;
    int duplicates = 0;
};

/// f_A(x, lambda) = f_nom - p gamma(V) G grad V + G U_A lambda, indices 0-based.
Vector residual_f_A(const QpController& qp, const Vector& x, const Vector& lambda, std::span<const int> indices);

/// All index sets with 1 <= r <= min(N, n), by size then lexicographically.
std::vector<std::vector<int>> active_index_sets(int num_cbfs, int state_dim);

/**
 * Boundary equilibria on the intersection of the barrier boundaries in `indices`.
 *
 * Every returned report has passed the residual checks and carries its
 * validation outcome. Results are sorted lexicographically by x_e.
 */
std::vector<EquilibriumReport> find_boundary_equilibria(const QpController& qp, std::span<const int> indices,
                                                        const SearchConfig& search, SearchStats* stats = nullptr);

/// Re-solves the QP at x_e and fills validated_in_S_A, degenerate and validation_note.
EquilibriumReport validate_equilibrium(const QpController& qp, EquilibriumReport report);

/// Roots of f_nom = p gamma(V) G grad V strictly inside the safe set with no barrier active.
std::vector<EquilibriumReport> find_interior_equilibria(const QpController& qp, const SearchConfig& search,
                                                        SearchStats* stats = nullptr);

/// Minimizes |M l - y| over l >= 0 by enumerating supports; fine for a handful of columns.
Vector nonnegative_least_squares(const Matrix& m, const Vector& y);

}  // namespace cbfqp

#endif  // CBFQP_EQUILIBRIA_HPP
