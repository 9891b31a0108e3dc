#pragma once

// Solvers for the triangular matrix equation
//
//     stril(T L - L T) = -E,
//
// with T upper triangular and E, L strictly lower triangular, all in lp.

#include <cstddef>
#include <optional>

#include "mpschur/matrix.hpp"

namespace mpschur {

struct TriEqProblem {
    MatrixLp T;  // upper triangular
    MatrixLp E;  // strictly lower triangular
    // Entries of L with larger modulus are zeroed as soon as they are computed.
    std::optional<double> clip_threshold;
};

struct TriEqSolution {
    MatrixLp L;
    std::size_t clipped_count = 0;
    std::size_t sylvester_solves = 0;
};

// Successive substitution, columns left to right, each column bottom to top.
// Throws SeparationError when two diagonal entries of T coincide and
// NonFiniteError when an entry of L overflows.
TriEqSolution solve_scalar(const TriEqProblem& p);

// Recursive blocking with split n1 = floor(n/2); blocks of order <= n_min
// go to solve_scalar.
TriEqSolution solve_block(const TriEqProblem& p, Index n_min = 4);

struct SylvesterResult {
    MatrixLp X;
    std::size_t clipped_count = 0;
};

// T22 X - X T11 = C for upper triangular T11, T22, by columnwise
// back substitution.
SylvesterResult solve_sylvester_tri(const MatrixLp& T22, const MatrixLp& T11, const MatrixLp& C,
                                    std::optional<double> clip_threshold = std::nullopt);

// Smallest singular value of L -> stril(T L - L T) on strictly lower
// triangular L (n <= 64).
double phi_estimate(const MatrixLp& T);

// Smallest singular value of a real matrix by one-sided Jacobi.
double smallest_singular_value(const Eigen::MatrixXd& M);

}  // namespace mpschur
