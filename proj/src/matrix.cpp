#include "mpschur/matrix.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>
#include <vector>

namespace mpschur {

namespace {

std::atomic<int> g_gemm_threads{0};

int resolve_threads(int requested, Index cols) {
    int t = requested > 0 ? requested : default_gemm_threads();
    t = std::max(1, t);
    return static_cast<int>(std::min<Index>(t, std::max<Index>(cols, 1)));
}

// Runs body(j_begin, j_end) over contiguous column ranges.
template <typename Body>
void for_column_ranges(Index cols, int threads, Body body) {
    if (threads <= 1) {
        body(Index{0}, cols);
        return;
    }
    std::vector<std::thread> pool;
    Index chunk = (cols + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        Index b = t * chunk;
        Index e = std::min(cols, b + chunk);
        if (b >= e) break;
        pool.emplace_back([=] { body(b, e); });
    }
    for (auto& th : pool) th.join();
}

struct HpAccum {
    DDReal re, im;
};

inline void hp_panel(const DDComplex* a, const DDComplex* b, Index len, bool conj_a, HpAccum& acc) {
    DDReal re, im;
    for (Index p = 0; p < len; ++p) {
        const DDReal& xr = a[p].re;
        const DDReal xi = conj_a ? -a[p].im : a[p].im;
        const DDReal& yr = b[p].re;
        const DDReal& yi = b[p].im;
        re += xr * yr - xi * yi;
        im += xr * yi + xi * yr;
    }
    acc.re += re;
    acc.im += im;
}

inline void lp_panel(const cplx* a, const cplx* b, Index len, bool conj_a, double& acc_re,
                     double& acc_im) {
    double re = 0.0, im = 0.0;
    for (Index p = 0; p < len; ++p) {
        const double xr = a[p].real();
        const double xi = conj_a ? -a[p].imag() : a[p].imag();
        const double yr = b[p].real();
        const double yi = b[p].imag();
        re += xr * yr - xi * yi;
        im += xr * yi + xi * yr;
    }
    acc_re += re;
    acc_im += im;
}

struct Shape {
    Index m, n, k;
};

template <typename Scalar>
Shape check_shapes(const DenseMatrix<Scalar>& A, const DenseMatrix<Scalar>& B, Trans ta, Trans tb) {
    Index m = ta == Trans::None ? A.rows() : A.cols();
    Index ka = ta == Trans::None ? A.cols() : A.rows();
    Index kb = tb == Trans::None ? B.rows() : B.cols();
    Index n = tb == Trans::None ? B.cols() : B.rows();
    if (ka != kb) throw DimensionError("matmul: inner dimensions do not agree");
    return {m, n, ka};
}

// Lays op(A) out so that column i holds row i of op(A) (unconjugated when
// conj_a is set) and op(B) so that column j is column j of op(B).
template <typename Scalar, typename Kernel>
DenseMatrix<Scalar> gemm(const DenseMatrix<Scalar>& A, const DenseMatrix<Scalar>& B, Trans ta,
                         Trans tb, const GemmOptions& opts, Kernel kernel) {
    const Shape s = check_shapes(A, B, ta, tb);
    DenseMatrix<Scalar> C(s.m, s.n);
    if (s.m == 0 || s.n == 0) return C;

    DenseMatrix<Scalar> a_rows;
    const DenseMatrix<Scalar>* ap = &A;
    bool conj_a = true;
    if (ta == Trans::None) {
        a_rows = A.transpose();
        ap = &a_rows;
        conj_a = false;
    }
    DenseMatrix<Scalar> b_cols;
    const DenseMatrix<Scalar>* bp = &B;
    if (tb == Trans::Conj) {
        b_cols = B.adjoint();
        bp = &b_cols;
    }
    const Index panel = std::max<Index>(opts.panel, 1);
    const int threads = resolve_threads(opts.threads, s.n);

    for_column_ranges(s.n, threads, [&](Index jb, Index je) {
        for (Index j = jb; j < je; ++j) {
            const Scalar* bcol = bp->data() + j * s.k;
            for (Index i = 0; i < s.m; ++i) {
                const Scalar* acol = ap->data() + i * s.k;
                C(i, j) = kernel(acol, bcol, s.k, panel, conj_a);
            }
        }
    });
    return C;
}

}  // namespace

void set_default_gemm_threads(int threads) { g_gemm_threads.store(std::max(0, threads)); }

int default_gemm_threads() {
    int t = g_gemm_threads.load();
    if (t > 0) return t;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

GemmCounters& gemm_counters() {
    thread_local GemmCounters counters;
    return counters;
}

MatrixHp matmul_hp(const MatrixHp& A, const MatrixHp& B, Trans ta, Trans tb, const GemmOptions& opts) {
    auto start = std::chrono::steady_clock::now();
    MatrixHp C = gemm(A, B, ta, tb, opts,
                      [](const DDComplex* a, const DDComplex* b, Index k, Index panel, bool conj_a) {
                          HpAccum acc;
                          for (Index p0 = 0; p0 < k; p0 += panel)
                              hp_panel(a + p0, b + p0, std::min(panel, k - p0), conj_a, acc);
                          return DDComplex(acc.re, acc.im);
                      });
    auto& c = gemm_counters();
    ++c.hp_calls;
    c.hp_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return C;
}

MatrixLp matmul_lp(const MatrixLp& A, const MatrixLp& B, Trans ta, Trans tb, const GemmOptions& opts) {
    auto start = std::chrono::steady_clock::now();
    MatrixLp C = gemm(A, B, ta, tb, opts,
                      [](const cplx* a, const cplx* b, Index k, Index panel, bool conj_a) {
                          double re = 0.0, im = 0.0;
                          for (Index p0 = 0; p0 < k; p0 += panel)
                              lp_panel(a + p0, b + p0, std::min(panel, k - p0), conj_a, re, im);
                          return cplx(re, im);
                      });
    auto& c = gemm_counters();
    ++c.lp_calls;
    c.lp_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return C;
}

DDReal frobenius_norm(const MatrixHp& M) {
    DDReal s;
    for (Index j = 0; j < M.cols(); ++j)
        for (Index i = 0; i < M.rows(); ++i) s += norm(M(i, j));
    return sqrt(s);
}

DDReal frobenius_norm(const MatrixLp& M) {
    DDReal s;
    for (Index j = 0; j < M.cols(); ++j) {
        for (Index i = 0; i < M.rows(); ++i) {
            s += DDReal::from_product(M(i, j).real(), M(i, j).real());
            s += DDReal::from_product(M(i, j).imag(), M(i, j).imag());
        }
    }
    return sqrt(s);
}

double spectral_norm_estimate(const MatrixLp& M) {
    if (M.size() == 0) return 0.0;
    const Index n = M.cols();
    Eigen::VectorXcd v(n);
    for (Index i = 0; i < n; ++i) v(i) = cplx(1.0 + 0.1 * static_cast<double>(i % 7), 0.05 * static_cast<double>(i % 3));
    v.normalize();
    double sigma = 0.0;
    for (int it = 0; it < 200; ++it) {
        Eigen::VectorXcd w = M * v;
        double next = w.norm();
        if (next == 0.0) return 0.0;
        Eigen::VectorXcd z = M.adjoint() * w;
        double zn = z.norm();
        if (zn == 0.0) return next;
        v = z / zn;
        bool done = it > 0 && std::abs(next - sigma) <= 1e-12 * next;
        sigma = next;
        if (done) break;
    }
    return sigma;
}

MatrixHp to_hp(const MatrixLp& M) {
    MatrixHp out(M.rows(), M.cols());
    for (Index j = 0; j < M.cols(); ++j)
        for (Index i = 0; i < M.rows(); ++i) out(i, j) = to_hp(M(i, j));
    return out;
}

MatrixLp to_lp(const MatrixHp& M) {
    MatrixLp out(M.rows(), M.cols());
    for (Index j = 0; j < M.cols(); ++j)
        for (Index i = 0; i < M.rows(); ++i) out(i, j) = to_lp(M(i, j));
    return out;
}

MatrixHp solve_hp(const MatrixHp& A, const MatrixHp& B) {
    if (A.rows() != A.cols() || A.rows() != B.rows()) throw DimensionError("solve_hp: shape mismatch");
    const Index n = A.rows();
    MatrixHp LU = A;
    MatrixHp X = B;
    for (Index k = 0; k < n; ++k) {
        Index piv = k;
        DDReal best = abs(LU(k, k));
        for (Index i = k + 1; i < n; ++i) {
            DDReal a = abs(LU(i, k));
            if (a > best) {
                best = a;
                piv = i;
            }
        }
        if (best.hi == 0.0) throw RankDeficient("solve_hp: matrix is singular");
        if (piv != k) {
            LU.row(k).swap(LU.row(piv));
            X.row(k).swap(X.row(piv));
        }
        for (Index i = k + 1; i < n; ++i) {
            DDComplex f = LU(i, k) / LU(k, k);
            LU(i, k) = f;
            for (Index j = k + 1; j < n; ++j) LU(i, j) -= f * LU(k, j);
            for (Index j = 0; j < X.cols(); ++j) X(i, j) -= f * X(k, j);
        }
    }
    for (Index c = 0; c < X.cols(); ++c) {
        for (Index i = n - 1; i >= 0; --i) {
            DDComplex s = X(i, c);
            for (Index j = i + 1; j < n; ++j) s -= LU(i, j) * X(j, c);
            X(i, c) = s / LU(i, i);
        }
    }
    return X;
}

bool all_finite(const MatrixHp& M) {
    for (Index j = 0; j < M.cols(); ++j)
        for (Index i = 0; i < M.rows(); ++i)
            if (!isfinite(M(i, j))) return false;
    return true;
}

bool all_finite(const MatrixLp& M) { return M.allFinite(); }

}  // namespace mpschur
