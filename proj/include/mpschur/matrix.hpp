#pragma once

// Dense complex matrices at working (lp = binary64) and high (hp =
// double-double) precision, plus the deterministic GEMM every refinement
// step is built on.

#include <complex>
#include <cstdint>
#include <utility>

#include <Eigen/Core>

#include "mpschur/dd.hpp"
#include "mpschur/errors.hpp"

namespace mpschur {

using Index = Eigen::Index;
using cplx = std::complex<double>;

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixLp = DenseMatrix<cplx>;
using MatrixHp = DenseMatrix<DDComplex>;

// Trans::Conj applies the conjugate transpose to an operand.
enum class Trans { None, Conj };

enum class TriangleKind { StrictLower, Upper, Diagonal };

struct GemmOptions {
    Index panel = 32;
    int threads = 0;  // 0: use default_gemm_threads()
};

void set_default_gemm_threads(int threads);
int default_gemm_threads();

// Per calling thread; GEMMs are counted where they are requested.
struct GemmCounters {
    std::uint64_t hp_calls = 0;
    std::uint64_t lp_calls = 0;
    double hp_seconds = 0.0;
    double lp_seconds = 0.0;
};
GemmCounters& gemm_counters();

// op(A) * op(B).  Each entry is accumulated over the inner dimension in
// fixed-size panels, left to right inside a panel, and the panel partial
// sums are then added left to right.  Threads own disjoint column ranges of
// the result, so the bits do not depend on the thread count.
MatrixHp matmul_hp(const MatrixHp& A, const MatrixHp& B, Trans ta = Trans::None,
                   Trans tb = Trans::None, const GemmOptions& opts = {});
MatrixLp matmul_lp(const MatrixLp& A, const MatrixLp& B, Trans ta = Trans::None,
                   Trans tb = Trans::None, const GemmOptions& opts = {});

inline MatrixHp matmul(const MatrixHp& A, const MatrixHp& B, Trans ta = Trans::None,
                       Trans tb = Trans::None) {
    return matmul_hp(A, B, ta, tb);
}
inline MatrixLp matmul(const MatrixLp& A, const MatrixLp& B, Trans ta = Trans::None,
                       Trans tb = Trans::None) {
    return matmul_lp(A, B, ta, tb);
}

template <typename Scalar>
DenseMatrix<Scalar> triangle(const DenseMatrix<Scalar>& M, TriangleKind kind) {
    DenseMatrix<Scalar> out = DenseMatrix<Scalar>::Zero(M.rows(), M.cols());
    for (Index j = 0; j < M.cols(); ++j) {
        for (Index i = 0; i < M.rows(); ++i) {
            bool keep = kind == TriangleKind::StrictLower ? i > j
                        : kind == TriangleKind::Upper     ? i <= j
                                                          : i == j;
            if (keep) out(i, j) = M(i, j);
        }
    }
    return out;
}

template <typename Scalar>
DenseMatrix<Scalar> stril(const DenseMatrix<Scalar>& M) {
    return triangle(M, TriangleKind::StrictLower);
}

// Splits a square M into E = stril(M) and T = M - E; E + T == M exactly.
template <typename Scalar>
std::pair<DenseMatrix<Scalar>, DenseMatrix<Scalar>> stril_extract(const DenseMatrix<Scalar>& M) {
    if (M.rows() != M.cols()) throw DimensionError("stril_extract: matrix is not square");
    return {triangle(M, TriangleKind::StrictLower), triangle(M, TriangleKind::Upper)};
}

DDReal frobenius_norm(const MatrixHp& M);
DDReal frobenius_norm(const MatrixLp& M);

// Power iteration on M^H M; relative accuracy about 1e-6, at most 200 steps.
double spectral_norm_estimate(const MatrixLp& M);

MatrixHp to_hp(const MatrixLp& M);
MatrixLp to_lp(const MatrixHp& M);

// Solves A X = B in hp by LU with partial pivoting.
MatrixHp solve_hp(const MatrixHp& A, const MatrixHp& B);

template <typename Scalar>
DenseMatrix<Scalar> identity(Index n) {
    return DenseMatrix<Scalar>::Identity(n, n);
}

bool all_finite(const MatrixHp& M);
bool all_finite(const MatrixLp& M);

}  // namespace mpschur
