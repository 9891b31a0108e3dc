#include "mpschur/orthogonalize.hpp"

#include <cmath>
#include <vector>

namespace mpschur {

namespace {

DDComplex phase_of(const DDComplex& z) {
    DDReal m = abs(z);
    if (m.hi == 0.0) return DDComplex(1.0);
    return {z.re / m, z.im / m};
}

void check_square(const MatrixHp& M, const char* what) {
    if (M.rows() != M.cols()) throw DimensionError(std::string(what) + ": matrix is not square");
}

}  // namespace

MatrixHp qr_retract(const MatrixHp& M) {
    check_square(M, "qr_retract");
    const Index n = M.rows();
    const DDReal scale = frobenius_norm(M);
    MatrixHp R = M;
    std::vector<DenseVector<DDComplex>> reflectors;
    std::vector<DDReal> taus;
    std::vector<DDComplex> diag(static_cast<std::size_t>(n));
    reflectors.reserve(static_cast<std::size_t>(n));

    for (Index k = 0; k < n; ++k) {
        const Index m = n - k;
        DenseVector<DDComplex> v = R.col(k).tail(m);
        DDReal xnorm2;
        for (Index i = 0; i < m; ++i) xnorm2 += norm(v(i));
        DDReal xnorm = sqrt(xnorm2);
        if (xnorm.hi <= static_cast<double>(n) * kUnitRoundoffHp * scale.hi)
            throw RankDeficient("qr_retract: matrix is numerically rank deficient");
        DDComplex ph = phase_of(v(0));
        DDComplex alpha = -(ph * DDComplex(xnorm));
        v(0) -= alpha;
        DDReal vnorm2;
        for (Index i = 0; i < m; ++i) vnorm2 += norm(v(i));
        DDReal tau = DDReal(2.0) / vnorm2;
        for (Index j = k; j < n; ++j) {
            DDComplex w;
            for (Index i = 0; i < m; ++i) w += conj(v(i)) * R(k + i, j);
            w = w * DDComplex(tau);
            for (Index i = 0; i < m; ++i) R(k + i, j) -= v(i) * w;
        }
        diag[static_cast<std::size_t>(k)] = alpha;
        reflectors.push_back(std::move(v));
        taus.push_back(tau);
    }

    MatrixHp Q = identity<DDComplex>(n);
    for (Index k = n - 1; k >= 0; --k) {
        const auto& v = reflectors[static_cast<std::size_t>(k)];
        const DDComplex tau(taus[static_cast<std::size_t>(k)]);
        const Index m = n - k;
        for (Index j = 0; j < n; ++j) {
            DDComplex w;
            for (Index i = 0; i < m; ++i) w += conj(v(i)) * Q(k + i, j);
            w = w * tau;
            for (Index i = 0; i < m; ++i) Q(k + i, j) -= v(i) * w;
        }
    }
    for (Index k = 0; k < n; ++k) {
        DDComplex ph = phase_of(diag[static_cast<std::size_t>(k)]);
        for (Index i = 0; i < n; ++i) Q(i, k) = Q(i, k) * ph;
    }
    return Q;
}

MatrixHp gram_defect(const MatrixHp& Q) {
    MatrixHp Y = matmul_hp(Q, Q, Trans::Conj, Trans::None);
    for (Index i = 0; i < Y.rows(); ++i) Y(i, i) -= DDComplex(1.0);
    return Y;
}

NewtonSchulzResult newton_schulz(const MatrixHp& Qhat) {
    check_square(Qhat, "newton_schulz");
    const double bound = std::sqrt(3.0);
    if (!(spectral_norm_estimate(to_lp(Qhat)) < bound))
        throw NormTooLarge("newton_schulz: ||Qhat||_2 is not below sqrt(3)");
    MatrixHp delta = gram_defect(Qhat);
    NewtonSchulzResult r;
    r.gram_defect = to_lp(frobenius_norm(delta));
    MatrixHp S = -delta;
    for (Index i = 0; i < S.rows(); ++i) S(i, i) += DDComplex(2.0);
    r.Q = matmul_hp(Qhat, S);
    r.Q *= DDComplex(0.5);
    return r;
}

MatrixHp merged_sigma(const MatrixLp& W, const MatrixHp& Y, bool full_sigma) {
    const Index n = W.rows();
    if (W.cols() != n || Y.rows() != n || Y.cols() != n) throw DimensionError("merged_sigma: shape mismatch");
    const MatrixLp Ylp = to_lp(Y);
    const MatrixLp YW = matmul_lp(Ylp, W);
    const MatrixLp W2 = matmul_lp(W, W);
    const MatrixLp W3 = matmul_lp(W2, W);

    MatrixHp sigma = identity<DDComplex>(n) * DDComplex(2.0);
    sigma += to_hp(W) * DDComplex(2.0);
    sigma -= Y;
    sigma -= to_hp(YW);
    sigma += to_hp(W2);
    sigma += to_hp(W3);
    if (full_sigma) {
        const MatrixLp W2Y = matmul_lp(W2, Ylp);
        sigma += to_hp(W2Y);
        sigma += to_hp(matmul_lp(W2Y, W));
    }
    return sigma;
}

MatrixHp merged_update(const MatrixHp& Q, const MatrixLp& W, const MatrixHp& Y, bool full_sigma) {
    if (Q.cols() != W.rows()) throw DimensionError("merged_update: shape mismatch");
    MatrixHp out = matmul_hp(Q, merged_sigma(W, Y, full_sigma));
    out *= DDComplex(0.5);
    return out;
}

MatrixHp apply_correction(const MatrixHp& Q, const MatrixLp& W) {
    if (Q.cols() != W.rows() || W.rows() != W.cols()) throw DimensionError("apply_correction: shape mismatch");
    MatrixHp IW = to_hp(W);
    for (Index i = 0; i < IW.rows(); ++i) IW(i, i) += DDComplex(1.0);
    return matmul_hp(Q, IW);
}

MatrixHp orthogonalize(const MatrixHp& Qhat, OrthoStrategy strategy) {
    return strategy == OrthoStrategy::QrRetraction ? qr_retract(Qhat) : newton_schulz(Qhat).Q;
}

}  // namespace mpschur
