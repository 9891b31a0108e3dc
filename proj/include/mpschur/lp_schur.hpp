#pragma once

// Complex Schur decomposition in working precision and reordering of its
// eigenvalues; this produces the starting point for refinement.

#include <optional>
#include <vector>

#include "mpschur/matrix.hpp"
#include "mpschur/rng.hpp"

namespace mpschur {

// A = Q T Q^H with Q (approximately) unitary and T upper triangular.
// Strictly lower entries of a stored T are exact zeros.
template <typename Scalar>
struct SchurPair {
    DenseMatrix<Scalar> Q;
    DenseMatrix<Scalar> T;
    double ortho_residual = 0.0;        // ||Q^H Q - I||_F
    std::optional<double> tri_residual;  // ||stril(Q^H A Q)||_F, when computed
};

using SchurPairLp = SchurPair<cplx>;
using SchurPairHp = SchurPair<DDComplex>;

// permutation[k] is the current diagonal index of the eigenvalue that is
// to end up at position k.
struct EigOrder {
    std::vector<Index> permutation;
};

struct Hessenberg {
    MatrixLp Q;
    MatrixLp H;
};

// Householder reduction A = Q H Q^H with H upper Hessenberg.
Hessenberg hessenberg_reduce(const MatrixLp& A);

struct QrSchurOptions {
    int sweeps_per_row = 30;       // total budget is sweeps_per_row * n
    int exceptional_every = 10;    // stalled sweeps before an ad hoc shift
    // Diagonal power-of-two scaling before the iteration; the returned Q is
    // re-orthogonalized so the pair is still a Schur form of A.
    bool balance = false;
};

// Complex single-shift implicit QR with Wilkinson shifts.
SchurPairLp qr_schur_lp(const MatrixLp& A, const QrSchurOptions& opts = {});

// Stable sort of Re(exp(-i theta) lambda).
EigOrder order_by_random_line(const DenseVector<cplx>& eigs, double theta);
// Draws theta uniformly from [0, 2 pi) using rng.
EigOrder order_by_random_line(const DenseVector<cplx>& eigs, CounterRng& rng);

// Moves eigenvalues into the requested order with adjacent Givens swaps.
SchurPairLp reorder_schur(SchurPairLp pair, const EigOrder& order);

// Swaps the 1x1 blocks at (k, k) and (k+1, k+1) of T, updating Q.
void swap_adjacent(MatrixLp& Q, MatrixLp& T, Index k);

double orthogonality_residual(const MatrixLp& Q);
double triangularity_residual(const MatrixLp& A, const MatrixLp& Q);

}  // namespace mpschur
