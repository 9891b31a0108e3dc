#include "mpschur/lp_schur.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/QR>

namespace mpschur {

namespace {

// Unitary G = [c, -conj(s); s, conj(c)] whose first column is (x, y)/||(x, y)||,
// so that G^H (x, y)^T = (r, 0)^T.
struct Rotation {
    cplx c{1.0, 0.0};
    cplx s{0.0, 0.0};
};

Rotation make_rotation(cplx x, cplx y) {
    double r = std::hypot(std::abs(x), std::abs(y));
    if (r == 0.0) return {};
    return {x / r, y / r};
}

// Rows k, k+1 of M, columns [c0, c1), multiplied by G^H from the left.
void apply_left_adjoint(MatrixLp& M, Index k, const Rotation& g, Index c0, Index c1) {
    const cplx cc = std::conj(g.c), sc = std::conj(g.s);
    for (Index j = c0; j < c1; ++j) {
        cplx a = M(k, j), b = M(k + 1, j);
        M(k, j) = cc * a + sc * b;
        M(k + 1, j) = -g.s * a + g.c * b;
    }
}

// Columns k, k+1 of M, rows [r0, r1), multiplied by G from the right.
void apply_right(MatrixLp& M, Index k, const Rotation& g, Index r0, Index r1) {
    const cplx cc = std::conj(g.c), sc = std::conj(g.s);
    for (Index i = r0; i < r1; ++i) {
        cplx a = M(i, k), b = M(i, k + 1);
        M(i, k) = g.c * a + g.s * b;
        M(i, k + 1) = -sc * a + cc * b;
    }
}

bool negligible_subdiagonal(const MatrixLp& H, Index i) {
    double sub = std::abs(H(i, i - 1));
    double diag = std::abs(H(i - 1, i - 1)) + std::abs(H(i, i));
    return sub <= kUnitRoundoffLp * diag || sub <= std::numeric_limits<double>::min();
}

cplx wilkinson_shift(const MatrixLp& H, Index iu) {
    cplx a = H(iu - 1, iu - 1), b = H(iu - 1, iu), c = H(iu, iu - 1), d = H(iu, iu);
    double scale = std::abs(a) + std::abs(b) + std::abs(c) + std::abs(d);
    if (scale == 0.0) return d;
    a /= scale;
    b /= scale;
    c /= scale;
    d /= scale;
    cplx half = 0.5 * (a - d);
    cplx disc = std::sqrt(half * half + b * c);
    cplx mid = 0.5 * (a + d);
    cplx e1 = mid + disc, e2 = mid - disc;
    cplx shift = std::abs(e1 - d) <= std::abs(e2 - d) ? e1 : e2;
    return shift * scale;
}

// Powers-of-two scaling D with D^{-1} A D having comparable row and column
// norms (no permutations).
Eigen::VectorXd balancing_scales(const MatrixLp& A) {
    const Index n = A.rows();
    MatrixLp B = A;
    Eigen::VectorXd d = Eigen::VectorXd::Ones(n);
    for (bool changed = true; changed;) {
        changed = false;
        for (Index i = 0; i < n; ++i) {
            double c = 0.0, r = 0.0;
            for (Index j = 0; j < n; ++j) {
                if (j == i) continue;
                c += std::abs(B(j, i));
                r += std::abs(B(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            const double sum = c + r;
            double f = 1.0;
            while (c < r / 2.0) {
                f *= 2.0;
                c *= 4.0;
            }
            while (c >= r * 2.0) {
                f /= 2.0;
                c /= 4.0;
            }
            if ((c + r) / f < 0.95 * sum) {
                changed = true;
                d(i) *= f;
                B.row(i) /= f;
                B.col(i) *= f;
            }
        }
    }
    return d;
}

SchurPairLp balanced_schur(const MatrixLp& A, const QrSchurOptions& opts);

}  // namespace

Hessenberg hessenberg_reduce(const MatrixLp& A) {
    if (A.rows() != A.cols()) throw DimensionError("hessenberg_reduce: matrix is not square");
    const Index n = A.rows();
    Hessenberg out{MatrixLp::Identity(n, n), A};
    MatrixLp& H = out.H;
    MatrixLp& Q = out.Q;
    for (Index k = 0; k + 2 < n; ++k) {
        const Index m = n - k - 1;
        Eigen::VectorXcd v = H.col(k).segment(k + 1, m);
        if (v.tail(m - 1).squaredNorm() == 0.0) continue;
        double xnorm = v.norm();
        cplx phase = v(0) == cplx(0.0) ? cplx(1.0) : v(0) / std::abs(v(0));
        cplx alpha = -phase * xnorm;
        v(0) -= alpha;
        double vnorm2 = v.squaredNorm();
        // P = I - tau v v^H
        double tau = 2.0 / vnorm2;
        auto rows = H.bottomRightCorner(m, n - k);
        Eigen::RowVectorXcd w = v.adjoint() * rows;
        rows.noalias() -= tau * v * w;
        auto cols = H.rightCols(m);
        Eigen::VectorXcd u = cols * v;
        cols.noalias() -= tau * u * v.adjoint();
        auto qcols = Q.rightCols(m);
        Eigen::VectorXcd uq = qcols * v;
        qcols.noalias() -= tau * uq * v.adjoint();
        H(k + 1, k) = alpha;
        H.col(k).tail(m - 1).setZero();
    }
    return out;
}

SchurPairLp qr_schur_lp(const MatrixLp& A, const QrSchurOptions& opts) {
    if (A.rows() != A.cols()) throw DimensionError("qr_schur_lp: matrix is not square");
    if (!A.allFinite()) throw Error("qr_schur_lp: matrix has non-finite entries");
    const Index n = A.rows();
    if (opts.balance && n > 1) return balanced_schur(A, opts);
    Hessenberg hs = hessenberg_reduce(A);
    MatrixLp& H = hs.H;
    MatrixLp& Q = hs.Q;

    const long budget = static_cast<long>(opts.sweeps_per_row) * std::max<Index>(n, 1);
    long total = 0;
    int stalled = 0;
    Index iu = n - 1;
    while (iu > 0) {
        if (negligible_subdiagonal(H, iu)) {
            H(iu, iu - 1) = 0.0;
            --iu;
            stalled = 0;
            continue;
        }
        Index il = iu - 1;
        while (il > 0 && !negligible_subdiagonal(H, il)) --il;
        if (il > 0) H(il, il - 1) = 0.0;

        if (++total > budget) throw NoConvergence("qr_schur_lp: QR sweep budget exhausted");
        ++stalled;

        cplx shift;
        if (stalled % opts.exceptional_every == 0) {
            shift = std::abs(H(iu, iu - 1).real());
            if (iu >= 2) shift += std::abs(H(iu - 1, iu - 2).real());
        } else {
            shift = wilkinson_shift(H, iu);
        }

        Rotation g = make_rotation(H(il, il) - shift, H(il + 1, il));
        apply_left_adjoint(H, il, g, il, n);
        apply_right(H, il, g, 0, std::min(il + 2, iu) + 1);
        apply_right(Q, il, g, 0, n);
        for (Index i = il + 1; i < iu; ++i) {
            g = make_rotation(H(i, i - 1), H(i + 1, i - 1));
            apply_left_adjoint(H, i, g, i - 1, n);
            H(i + 1, i - 1) = 0.0;
            apply_right(H, i, g, 0, std::min(i + 2, iu) + 1);
            apply_right(Q, i, g, 0, n);
        }
    }

    SchurPairLp pair;
    pair.T = triangle(H, TriangleKind::Upper);
    pair.Q = std::move(Q);
    pair.ortho_residual = orthogonality_residual(pair.Q);
    return pair;
}

namespace {

// B = D^{-1} A D = Q T Q^H gives A = (DQ) T (DQ)^{-1}; with DQ = Q' R the
// pair (Q', R T R^{-1}) is a Schur form of A.
SchurPairLp balanced_schur(const MatrixLp& A, const QrSchurOptions& opts) {
    const Index n = A.rows();
    const Eigen::VectorXd d = balancing_scales(A);
    MatrixLp B = d.cwiseInverse().asDiagonal() * A * d.asDiagonal();
    QrSchurOptions plain = opts;
    plain.balance = false;
    SchurPairLp inner = qr_schur_lp(B, plain);
    const MatrixLp DQ = d.asDiagonal() * inner.Q;
    Eigen::HouseholderQR<MatrixLp> qr(DQ);
    MatrixLp Q = qr.householderQ() * MatrixLp::Identity(n, n);
    MatrixLp R = qr.matrixQR().triangularView<Eigen::Upper>();
    MatrixLp RT = R * inner.T;
    // (R T) R^{-1} by a triangular solve from the right.
    MatrixLp T = R.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(RT);
    SchurPairLp pair;
    pair.T = triangle(T, TriangleKind::Upper);
    for (Index i = 0; i < n; ++i) pair.T(i, i) = inner.T(i, i);
    pair.Q = std::move(Q);
    pair.ortho_residual = orthogonality_residual(pair.Q);
    return pair;
}

}  // namespace

EigOrder order_by_random_line(const DenseVector<cplx>& eigs, double theta) {
    const cplx dir = std::polar(1.0, -theta);
    std::vector<double> key(static_cast<std::size_t>(eigs.size()));
    for (Index i = 0; i < eigs.size(); ++i) key[static_cast<std::size_t>(i)] = (dir * eigs(i)).real();
    EigOrder order;
    order.permutation.resize(key.size());
    std::iota(order.permutation.begin(), order.permutation.end(), Index{0});
    std::stable_sort(order.permutation.begin(), order.permutation.end(),
                     [&](Index a, Index b) { return key[static_cast<std::size_t>(a)] < key[static_cast<std::size_t>(b)]; });
    return order;
}

EigOrder order_by_random_line(const DenseVector<cplx>& eigs, CounterRng& rng) {
    return order_by_random_line(eigs, rng.uniform(0.0, 2.0 * std::numbers::pi));
}

void swap_adjacent(MatrixLp& Q, MatrixLp& T, Index k) {
    const Index n = T.rows();
    const cplx t11 = T(k, k), t22 = T(k + 1, k + 1), t12 = T(k, k + 1);
    // First column of G spans the eigenvector of t22 in the leading 2x2 block.
    if (t12 == cplx(0.0) && t11 == t22) return;  // nothing to exchange
    Rotation g = make_rotation(t12, t22 - t11);
    apply_left_adjoint(T, k, g, k, n);
    apply_right(T, k, g, 0, k + 2);
    apply_right(Q, k, g, 0, Q.rows());
    T(k + 1, k) = 0.0;
    T(k, k) = t22;
    T(k + 1, k + 1) = t11;
}

SchurPairLp reorder_schur(SchurPairLp pair, const EigOrder& order) {
    const Index n = pair.T.rows();
    const auto& perm = order.permutation;
    if (static_cast<Index>(perm.size()) != n) throw DimensionError("reorder_schur: permutation length mismatch");
    std::vector<char> seen(perm.size(), 0);
    for (Index p : perm) {
        if (p < 0 || p >= n || seen[static_cast<std::size_t>(p)]) throw DimensionError("reorder_schur: not a permutation");
        seen[static_cast<std::size_t>(p)] = 1;
    }
    // where[i]: current position of the eigenvalue that started at i.
    std::vector<Index> where(perm.size()), at(perm.size());
    std::iota(where.begin(), where.end(), Index{0});
    std::iota(at.begin(), at.end(), Index{0});
    bool moved = false;
    for (Index k = 0; k < n; ++k) {
        Index pos = where[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
        for (Index p = pos; p > k; --p) {
            swap_adjacent(pair.Q, pair.T, p - 1);
            std::swap(at[static_cast<std::size_t>(p - 1)], at[static_cast<std::size_t>(p)]);
            where[static_cast<std::size_t>(at[static_cast<std::size_t>(p - 1)])] = p - 1;
            where[static_cast<std::size_t>(at[static_cast<std::size_t>(p)])] = p;
            moved = true;
        }
    }
    if (moved) {
        pair.ortho_residual = orthogonality_residual(pair.Q);
        pair.tri_residual.reset();
    }
    return pair;
}

double orthogonality_residual(const MatrixLp& Q) {
    return (Q.adjoint() * Q - MatrixLp::Identity(Q.cols(), Q.cols())).norm();
}

double triangularity_residual(const MatrixLp& A, const MatrixLp& Q) {
    MatrixLp T = Q.adjoint() * A * Q;
    return stril(T).norm();
}

}  // namespace mpschur
