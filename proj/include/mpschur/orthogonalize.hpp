#pragma once

#include "mpschur/matrix.hpp"

namespace mpschur {

enum class OrthoStrategy { QrRetraction, NewtonSchulz };

// Unitary factor of a Householder QR of M, column phases chosen so that the
// triangular factor has a real positive diagonal.  Throws RankDeficient.
MatrixHp qr_retract(const MatrixHp& M);

struct NewtonSchulzResult {
    MatrixHp Q;
    double gram_defect = 0.0;  // ||Qhat^H Qhat - I||_F of the input
};

// Q_new = 1/2 Qhat (3I - Qhat^H Qhat), two hp GEMMs.  Throws NormTooLarge
// unless ||Qhat||_2 < sqrt(3).
NewtonSchulzResult newton_schulz(const MatrixHp& Qhat);
inline MatrixHp newton_schulz_step(const MatrixHp& Qhat) { return newton_schulz(Qhat).Q; }

// Y = Q^H Q - I, one hp GEMM.
MatrixHp gram_defect(const MatrixHp& Q);

// Sigma = 2I + 2W - Y - YW + W^2 + W^3 (+ W^2 Y + W^2 Y W when full_sigma),
// with the products formed in lp and the sum in hp.
MatrixHp merged_sigma(const MatrixLp& W, const MatrixHp& Y, bool full_sigma = false);

// One Newton-Schulz step applied to Q (I + W) for skew-Hermitian W, given
// Y = Q^H Q - I; costs one hp GEMM.
MatrixHp merged_update(const MatrixHp& Q, const MatrixLp& W, const MatrixHp& Y, bool full_sigma = false);

// Q (I + W), one hp GEMM.
MatrixHp apply_correction(const MatrixHp& Q, const MatrixLp& W);

// Orthogonalizes a nearly unitary matrix with the given strategy.
MatrixHp orthogonalize(const MatrixHp& Qhat, OrthoStrategy strategy);

}  // namespace mpschur
