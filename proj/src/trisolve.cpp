#include "mpschur/trisolve.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mpschur {

namespace {

using ConstBlock = Eigen::Ref<const MatrixLp>;
using Block = Eigen::Ref<MatrixLp>;

void check_separation(const ConstBlock& T, Index offset) {
    const Index n = T.rows();
    for (Index j = 0; j < n; ++j)
        for (Index i = j + 1; i < n; ++i)
            if (T(i, i) == T(j, j))
                throw SeparationError(static_cast<std::size_t>(i + offset), static_cast<std::size_t>(j + offset));
}

void check_problem(const TriEqProblem& p) {
    if (p.T.rows() != p.T.cols() || p.E.rows() != p.E.cols() || p.T.rows() != p.E.rows())
        throw DimensionError("triangular equation: T and E must be square of equal order");
    if (p.clip_threshold && !(*p.clip_threshold > 0.0))
        throw std::invalid_argument("triangular equation: clip threshold must be positive");
}

cplx finish_entry(cplx value, const std::optional<double>& clip, std::size_t& clipped, Index i, Index j) {
    if (!std::isfinite(value.real()) || !std::isfinite(value.imag()))
        throw NonFiniteError(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    if (clip && std::abs(value) > *clip) {
        ++clipped;
        return {0.0, 0.0};
    }
    return value;
}

// Algorithm of successive substitution on a diagonal block; offset maps
// local indices to global ones for diagnostics.
void scalar_core(const ConstBlock& T, const ConstBlock& E, Block L, const std::optional<double>& clip,
                 std::size_t& clipped, Index offset) {
    const Index n = T.rows();
    L.setZero();
    for (Index j = 0; j + 1 < n; ++j) {
        for (Index i = n - 1; i > j; --i) {
            cplx upper = 0.0;
            for (Index k = i + 1; k < n; ++k) upper += T(i, k) * L(k, j);
            cplx left = 0.0;
            for (Index k = 0; k < j; ++k) left += L(i, k) * T(k, j);
            cplx s = E(i, j) + upper - left;
            cplx d = T(i, i) - T(j, j);
            if (d == cplx(0.0)) throw SeparationError(static_cast<std::size_t>(i + offset), static_cast<std::size_t>(j + offset));
            L(i, j) = finish_entry(-s / d, clip, clipped, i + offset, j + offset);
        }
    }
}

void sylvester_core(const ConstBlock& T22, const ConstBlock& T11, const ConstBlock& C, Block X,
                    const std::optional<double>& clip, std::size_t& clipped, Index row_offset) {
    const Index m = T22.rows();
    const Index k = T11.rows();
    Eigen::VectorXcd rhs(m);
    for (Index j = 0; j < k; ++j) {
        for (Index i = 0; i < m; ++i) {
            cplx s = C(i, j);
            for (Index l = 0; l < j; ++l) s += X(i, l) * T11(l, j);
            rhs(i) = s;
        }
        const cplx shift = T11(j, j);
        for (Index i = m - 1; i >= 0; --i) {
            cplx s = rhs(i);
            for (Index p = i + 1; p < m; ++p) s -= T22(i, p) * X(p, j);
            cplx d = T22(i, i) - shift;
            if (d == cplx(0.0))
                throw SeparationError(static_cast<std::size_t>(i + row_offset), static_cast<std::size_t>(j));
            X(i, j) = finish_entry(s / d, clip, clipped, i + row_offset, j);
        }
    }
}

void block_recursive(const ConstBlock& T, MatrixLp E, Block L, Index n_min, const std::optional<double>& clip,
                     TriEqSolution& sol, Index offset) {
    const Index n = T.rows();
    if (n <= n_min) {
        scalar_core(T, E, L, clip, sol.clipped_count, offset);
        return;
    }
    const Index n1 = n / 2;
    const Index n2 = n - n1;
    const MatrixLp T11 = T.topLeftCorner(n1, n1);
    const MatrixLp T12 = T.topRightCorner(n1, n2);
    const MatrixLp T22 = T.bottomRightCorner(n2, n2);

    MatrixLp X(n2, n1);
    sylvester_core(T22, T11, -E.bottomLeftCorner(n2, n1), X, clip, sol.clipped_count, offset + n1);
    ++sol.sylvester_solves;
    L.bottomLeftCorner(n2, n1) = X;
    L.topRightCorner(n1, n2).setZero();

    MatrixLp E11 = E.topLeftCorner(n1, n1);
    MatrixLp E22 = E.bottomRightCorner(n2, n2);
    E11 += stril(matmul_lp(T12, X));
    E22 -= stril(matmul_lp(X, T12));

    block_recursive(T11, std::move(E11), L.topLeftCorner(n1, n1), n_min, clip, sol, offset);
    block_recursive(T22, std::move(E22), L.bottomRightCorner(n2, n2), n_min, clip, sol, offset + n1);
}

}  // namespace

TriEqSolution solve_scalar(const TriEqProblem& p) {
    check_problem(p);
    check_separation(p.T, 0);
    TriEqSolution sol;
    sol.L = MatrixLp::Zero(p.T.rows(), p.T.cols());
    scalar_core(p.T, p.E, sol.L, p.clip_threshold, sol.clipped_count, 0);
    return sol;
}

TriEqSolution solve_block(const TriEqProblem& p, Index n_min) {
    if (n_min < 2) throw std::invalid_argument("solve_block: n_min must be at least 2");
    check_problem(p);
    if (p.T.rows() <= n_min) return solve_scalar(p);
    check_separation(p.T, 0);
    TriEqSolution sol;
    sol.L = MatrixLp::Zero(p.T.rows(), p.T.cols());
    block_recursive(p.T, p.E, sol.L, n_min, p.clip_threshold, sol, 0);
    return sol;
}

SylvesterResult solve_sylvester_tri(const MatrixLp& T22, const MatrixLp& T11, const MatrixLp& C,
                                    std::optional<double> clip_threshold) {
    if (T22.rows() != T22.cols() || T11.rows() != T11.cols() || C.rows() != T22.rows() || C.cols() != T11.rows())
        throw DimensionError("solve_sylvester_tri: incompatible shapes");
    SylvesterResult r;
    r.X = MatrixLp::Zero(C.rows(), C.cols());
    sylvester_core(T22, T11, C, r.X, clip_threshold, r.clipped_count, 0);
    return r;
}

double smallest_singular_value(const Eigen::MatrixXd& M) {
    if (M.cols() == 0) return std::numeric_limits<double>::infinity();
    Eigen::MatrixXd U = M;
    const Index k = U.cols();
    for (int sweep = 0; sweep < 80; ++sweep) {
        bool rotated = false;
        for (Index p = 0; p + 1 < k; ++p) {
            for (Index q = p + 1; q < k; ++q) {
                double alpha = U.col(p).squaredNorm();
                double beta = U.col(q).squaredNorm();
                double gamma = U.col(p).dot(U.col(q));
                if (gamma == 0.0 || std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;
                rotated = true;
                double zeta = (beta - alpha) / (2.0 * gamma);
                double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = c * t;
                Eigen::VectorXd up = U.col(p);
                U.col(p) = c * up - s * U.col(q);
                U.col(q) = s * up + c * U.col(q);
            }
        }
        if (!rotated) break;
    }
    double smallest = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < k; ++j) smallest = std::min(smallest, U.col(j).norm());
    return smallest;
}

double phi_estimate(const MatrixLp& T) {
    if (T.rows() != T.cols()) throw DimensionError("phi_estimate: T is not square");
    const Index n = T.rows();
    if (n > 64) throw DimensionError("phi_estimate: order exceeds the diagnostic cap of 64");
    const Index N = n * (n - 1) / 2;
    if (N == 0) return std::numeric_limits<double>::infinity();

    Eigen::MatrixXi index = Eigen::MatrixXi::Constant(n, n, -1);
    int next = 0;
    for (Index j = 0; j < n; ++j)
        for (Index i = j + 1; i < n; ++i) index(i, j) = next++;

    // Column (p, q) holds the image of the unit matrix e_p e_q^T.
    MatrixLp op = MatrixLp::Zero(N, N);
    for (Index q = 0; q < n; ++q) {
        for (Index p = q + 1; p < n; ++p) {
            const Index col = index(p, q);
            for (Index i = q + 1; i <= p; ++i) op(index(i, q), col) += T(i, p);
            for (Index j = q; j < p; ++j) op(index(p, j), col) -= T(q, j);
        }
    }
    Eigen::MatrixXd real(2 * N, 2 * N);
    real << op.real(), -op.imag(), op.imag(), op.real();
    return smallest_singular_value(real);
}

}  // namespace mpschur
