#pragma once

// Refinement drivers: the generic template (any nearly unitary starting
// factor), the mixed lp/hp pipeline, and the Hermitian specialization.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mpschur/lp_schur.hpp"
#include "mpschur/orthogonalize.hpp"

namespace mpschur {

struct RefineConfig {
    double tol_factor = 10.0;   // stop when ||E||_F <= tol_factor * n * u_hp * ||A||_F
    int max_iters = 20;
    Index n_min = 4;
    std::optional<double> clip_threshold;  // 1e-5 is the usual choice when enabled
    OrthoStrategy ortho = OrthoStrategy::NewtonSchulz;
    bool skip_final_ortho = true;
    std::uint64_t seed = 0;
    bool restore_full_sigma = false;

    void validate() const;
};

enum class RefineStatus { Converged, MaxIters, Diverged, NonFinite };

const char* to_string(RefineStatus s);
std::optional<RefineStatus> parse_status(const std::string& s);

struct ResidualEntry {
    double off_triangle = 0.0;  // ||E||_F for the current Q
    double ortho = 0.0;         // ||Q^H Q - I||_F for the current Q
    // Set when no GEMM was spent on Q^H Q in that pass and ortho holds the
    // bound that justified skipping the orthogonalization.
    bool ortho_estimated = false;
};

struct RefineReport {
    int iterations = 0;  // completed correction steps
    std::vector<ResidualEntry> residual_history;  // iterations + 1 entries
    std::uint64_t hp_matmul_count = 0;
    std::size_t clipped_total = 0;
    RefineStatus status = RefineStatus::MaxIters;
    double wall_time = 0.0;  // seconds

    std::uint64_t seed = 0;
    double theta = 0.0;  // direction of the ordering line
    int skipped_orthogonalizations = 0;
    std::size_t sylvester_solves = 0;
    double hp_matmul_seconds = 0.0;
    double tolerance = 0.0;
    std::optional<int> failed_iteration;
    std::string hint;
};

struct RefineResult {
    SchurPairHp pair;
    RefineReport report;
    DenseVector<cplx> lp_eigenvalues;  // diag(T) of the (reordered) lp decomposition
};

RefineResult refine_template(const MatrixHp& A, const MatrixHp& Qhat, const RefineConfig& cfg);
RefineResult refine_mixed(const MatrixHp& A, const RefineConfig& cfg);
RefineResult refine_symmetric(const MatrixHp& A, const RefineConfig& cfg);

struct PairResiduals {
    double ortho = 0.0;       // ||Q^H Q - I||_F
    double tri = 0.0;         // ||stril(Q^H A Q)||_F
    double similarity = 0.0;  // ||T - Q^H A Q||_F
};

PairResiduals verify_pair(const MatrixHp& A, const SchurPairHp& pair);

}  // namespace mpschur
