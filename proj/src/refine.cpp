#include "mpschur/refine.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mpschur/trisolve.hpp"

namespace mpschur {

namespace {

using Clock = std::chrono::steady_clock;

enum class Split { Triangular, Diagonal };
enum class Update { Merged, Orthogonalize };

struct Loop {
    Split split;
    Update update;
};

void check_square_finite(const MatrixHp& A, const char* what) {
    if (A.rows() != A.cols()) throw DimensionError(std::string(what) + ": matrix is not square");
    if (!all_finite(A)) throw Error(std::string(what) + ": matrix has non-finite entries");
}

double gram_norm_uncounted(const MatrixHp& Q) {
    GemmCounters saved = gemm_counters();
    double v = to_lp(frobenius_norm(gram_defect(Q)));
    gemm_counters() = saved;
    return v;
}

// Diagonal split: l_ij = -e_ij / (t_ii - t_jj) below the diagonal.
TriEqSolution solve_diagonal(const MatrixLp& d, const MatrixLp& E, const std::optional<double>& clip) {
    const Index n = E.rows();
    TriEqSolution sol;
    sol.L = MatrixLp::Zero(n, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = j + 1; i < n; ++i) {
            cplx den = d(i, i) - d(j, j);
            if (den == cplx(0.0)) throw SeparationError(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            cplx l = -E(i, j) / den;
            if (!std::isfinite(l.real()) || !std::isfinite(l.imag()))
                throw NonFiniteError(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            if (clip && std::abs(l) > *clip) {
                ++sol.clipped_count;
                l = 0.0;
            }
            sol.L(i, j) = l;
        }
    }
    return sol;
}

RefineResult run_loop(const MatrixHp& A, MatrixHp Q, double predicted_y, const RefineConfig& cfg, Loop loop,
                      RefineResult result, Clock::time_point start, const GemmCounters& base) {
    const Index n = A.rows();
    const double nd = static_cast<double>(n);
    const double norm_a = to_lp(frobenius_norm(A));
    const double ortho_floor = nd * kUnitRoundoffHp;
    const double skip_y = 10.0 * nd * kUnitRoundoffHp;
    const double skip_w = std::sqrt(kUnitRoundoffHp);
    RefineReport& rep = result.report;
    rep.tolerance = cfg.tol_factor * nd * kUnitRoundoffHp * norm_a;
    rep.residual_history.clear();

    double prev_e = std::numeric_limits<double>::infinity();
    int increases = 0;
    MatrixHp That;
    for (int pass = 0;; ++pass) {
        That = matmul_hp(matmul_hp(Q, A, Trans::Conj, Trans::None), Q);
        MatrixHp E, T;
        if (loop.split == Split::Triangular) {
            std::tie(E, T) = stril_extract(That);
        } else {
            T = triangle(That, TriangleKind::Diagonal);
            E = That - T;
        }
        ResidualEntry entry;
        entry.off_triangle = to_lp(frobenius_norm(E));
        if (pass > 0 && entry.off_triangle > prev_e)
            ++increases;
        else
            increases = 0;
        prev_e = entry.off_triangle;

        std::optional<RefineStatus> stop;
        if (!std::isfinite(entry.off_triangle)) {
            stop = RefineStatus::NonFinite;
            rep.failed_iteration = pass;
        }
        else if (entry.off_triangle <= rep.tolerance)
            stop = RefineStatus::Converged;
        else if (increases >= 3)
            stop = RefineStatus::Diverged;
        else if (pass >= cfg.max_iters)
            stop = RefineStatus::MaxIters;

        TriEqSolution sol;
        if (!stop) {
            try {
                if (loop.split == Split::Triangular)
                    sol = solve_block(TriEqProblem{to_lp(T), to_lp(E), cfg.clip_threshold}, cfg.n_min);
                else
                    sol = solve_diagonal(to_lp(T), to_lp(E), cfg.clip_threshold);
            } catch (const NonFiniteError&) {
                stop = RefineStatus::NonFinite;
                rep.failed_iteration = pass;
            }
        }
        if (stop) {
            rep.status = *stop;
            entry.ortho = all_finite(Q) ? gram_norm_uncounted(Q) : std::numeric_limits<double>::quiet_NaN();
            rep.residual_history.push_back(entry);
            if (rep.status == RefineStatus::NonFinite && !cfg.clip_threshold)
                rep.hint = "the correction overflowed; retry with clipping enabled (e.g. --clip 1e-5)";
            break;
        }

        rep.clipped_total += sol.clipped_count;
        rep.sylvester_solves += sol.sylvester_solves;
        const MatrixLp W = sol.L - sol.L.adjoint();
        const double norm_w = W.norm();

        if (loop.update == Update::Merged) {
            if (cfg.skip_final_ortho && predicted_y <= skip_y && norm_w <= skip_w) {
                entry.ortho = predicted_y;
                entry.ortho_estimated = true;
                Q = apply_correction(Q, W);
                ++rep.skipped_orthogonalizations;
                predicted_y = predicted_y * (1.0 + norm_w) * (1.0 + norm_w) + norm_w * norm_w + ortho_floor;
            } else {
                const MatrixHp Y = gram_defect(Q);
                const double norm_y = to_lp(frobenius_norm(Y));
                entry.ortho = norm_y;
                Q = merged_update(Q, W, Y, cfg.restore_full_sigma);
                // Defect of Q(I+W), then the Newton-Schulz contraction of it.
                const double delta = norm_y * (1.0 + norm_w) * (1.0 + norm_w) + norm_w * norm_w;
                const double dropped = cfg.restore_full_sigma ? 0.0 : norm_w * norm_w * norm_y * (1.0 + norm_w);
                predicted_y = 0.75 * delta * delta + 0.25 * delta * delta * delta + dropped + ortho_floor;
            }
        } else {
            entry.ortho = to_lp(frobenius_norm(gram_defect(Q)));
            Q = orthogonalize(apply_correction(Q, W), cfg.ortho);
        }
        rep.residual_history.push_back(entry);
        ++rep.iterations;
    }

    const GemmCounters& now = gemm_counters();
    rep.hp_matmul_count = now.hp_calls - base.hp_calls;
    rep.hp_matmul_seconds = now.hp_seconds - base.hp_seconds;

    SchurPairHp& pair = result.pair;
    if (loop.split == Split::Triangular) {
        pair.T = triangle(That, TriangleKind::Upper);
    } else {
        pair.T = triangle(That, TriangleKind::Diagonal);
        for (Index i = 0; i < n; ++i) pair.T(i, i).im = DDReal();
    }
    pair.Q = std::move(Q);
    pair.ortho_residual = rep.residual_history.back().ortho;
    pair.tri_residual = rep.residual_history.back().off_triangle;
    rep.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
    return result;
}

double initial_prediction(double gram, Index n) {
    return 0.75 * gram * gram + 0.25 * gram * gram * gram + static_cast<double>(n) * kUnitRoundoffHp;
}

}  // namespace

void RefineConfig::validate() const {
    if (!(tol_factor > 0.0)) throw std::invalid_argument("tol_factor must be positive");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
    if (n_min < 2) throw std::invalid_argument("n_min must be at least 2");
    if (clip_threshold && !(*clip_threshold > 0.0)) throw std::invalid_argument("clip threshold must be positive");
}

const char* to_string(RefineStatus s) {
    switch (s) {
        case RefineStatus::Converged: return "Converged";
        case RefineStatus::MaxIters: return "MaxIters";
        case RefineStatus::Diverged: return "Diverged";
        case RefineStatus::NonFinite: return "NonFinite";
    }
    return "?";
}

std::optional<RefineStatus> parse_status(const std::string& s) {
    for (auto v : {RefineStatus::Converged, RefineStatus::MaxIters, RefineStatus::Diverged, RefineStatus::NonFinite})
        if (s == to_string(v)) return v;
    return std::nullopt;
}

RefineResult refine_template(const MatrixHp& A, const MatrixHp& Qhat, const RefineConfig& cfg) {
    cfg.validate();
    check_square_finite(A, "refine_template");
    if (Qhat.rows() != A.rows() || Qhat.cols() != A.cols()) throw DimensionError("refine_template: Qhat shape mismatch");
    const auto start = Clock::now();
    const GemmCounters base = gemm_counters();
    RefineResult result;
    result.report.seed = cfg.seed;
    MatrixHp Q = orthogonalize(Qhat, cfg.ortho);
    return run_loop(A, std::move(Q), 0.0, cfg, {Split::Triangular, Update::Orthogonalize}, std::move(result), start,
                    base);
}

RefineResult refine_mixed(const MatrixHp& A, const RefineConfig& cfg) {
    cfg.validate();
    check_square_finite(A, "refine_mixed");
    assert_round_to_nearest();
    const auto start = Clock::now();
    const GemmCounters base = gemm_counters();
    RefineResult result;
    result.report.seed = cfg.seed;

    SchurPairLp lp = qr_schur_lp(to_lp(A));
    CounterRng rng(cfg.seed);
    result.report.theta = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    lp = reorder_schur(std::move(lp), order_by_random_line(lp.T.diagonal(), result.report.theta));
    result.lp_eigenvalues = lp.T.diagonal();

    NewtonSchulzResult ns = newton_schulz(to_hp(lp.Q));
    const Update update = cfg.ortho == OrthoStrategy::NewtonSchulz ? Update::Merged : Update::Orthogonalize;
    return run_loop(A, std::move(ns.Q), initial_prediction(ns.gram_defect, A.rows()), cfg,
                    {Split::Triangular, update}, std::move(result), start, base);
}

RefineResult refine_symmetric(const MatrixHp& A, const RefineConfig& cfg) {
    cfg.validate();
    check_square_finite(A, "refine_symmetric");
    assert_round_to_nearest();
    const double norm_a = to_lp(frobenius_norm(A));
    const double asym = to_lp(frobenius_norm(MatrixHp(A - A.adjoint())));
    if (asym > 10.0 * kUnitRoundoffHp * norm_a) throw NotSymmetric("refine_symmetric: matrix is not Hermitian");
    const auto start = Clock::now();
    const GemmCounters base = gemm_counters();
    RefineResult result;
    result.report.seed = cfg.seed;

    SchurPairLp lp = qr_schur_lp(to_lp(A));
    result.lp_eigenvalues = lp.T.diagonal();
    NewtonSchulzResult ns = newton_schulz(to_hp(lp.Q));
    const Update update = cfg.ortho == OrthoStrategy::NewtonSchulz ? Update::Merged : Update::Orthogonalize;
    return run_loop(A, std::move(ns.Q), initial_prediction(ns.gram_defect, A.rows()), cfg, {Split::Diagonal, update},
                    std::move(result), start, base);
}

PairResiduals verify_pair(const MatrixHp& A, const SchurPairHp& pair) {
    if (A.rows() != pair.Q.rows() || pair.Q.rows() != pair.Q.cols() || pair.T.rows() != A.rows() ||
        pair.T.cols() != A.cols() || A.rows() != A.cols())
        throw DimensionError("verify_pair: shape mismatch");
    PairResiduals r;
    r.ortho = to_lp(frobenius_norm(gram_defect(pair.Q)));
    const MatrixHp That = matmul_hp(matmul_hp(pair.Q, A, Trans::Conj, Trans::None), pair.Q);
    r.tri = to_lp(frobenius_norm(stril(That)));
    r.similarity = to_lp(frobenius_norm(MatrixHp(pair.T - That)));
    return r;
}

}  // namespace mpschur
