#pragma once

// Test-matrix generators, run records and the command-line entry point.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mpschur/refine.hpp"

namespace mpschur {

enum class MatrixKind { RandnComplex, RandnReal, WilkinsonCompanion, Clustered, FromFile };

const char* to_string(MatrixKind k);
std::optional<MatrixKind> parse_kind(const std::string& s);

struct MatrixSpec {
    MatrixKind kind = MatrixKind::RandnComplex;
    Index n = 0;
    int cluster_count = 0;
    int cluster_size = 0;
    double cluster_radius = 1e-5;
    double cond_x = 1e5;
    std::uint64_t seed = 0;
    std::optional<std::string> path;  // FromFile only

    void validate() const;  // throws std::invalid_argument
};

// Coefficients c_0..c_{n-1} of prod_{i=1..n} (x - i) = x^n + sum c_k x^k,
// exact in 128-bit integers (1 <= n <= 25).
std::vector<__int128> wilkinson_coefficients(int n);

// Companion matrix: ones on the subdiagonal, -c_k in the last column.
MatrixHp gen_wilkinson(int n);

// Independent standard normal entries (real and imaginary parts for the
// complex kind).
MatrixHp gen_randn(Index n, bool complex, std::uint64_t seed);

// A = X D X^{-1}: X = U diag(logspace(0, log10 cond_x, n)) V^T with Haar
// orthogonal U, V; D real diagonal holding cluster_count clusters of
// cluster_size members (center + U(-radius, radius), centers U(-10, 10))
// and the rest U(-10, 10).  Product and solve are done in hp.
MatrixHp gen_clustered(Index n, int cluster_count, int cluster_size, double cluster_radius,
                       double cond_x, std::uint64_t seed);

// The diagonal D used by gen_clustered for the same arguments, in hp.
DenseVector<DDReal> clustered_spectrum(Index n, int cluster_count, int cluster_size,
                                       double cluster_radius, std::uint64_t seed);

MatrixHp make_matrix(const MatrixSpec& spec);

inline constexpr int kReportSchemaVersion = 1;

struct RunRecord {
    MatrixSpec spec;
    RefineConfig config;
    RefineReport report;
    std::optional<PairResiduals> residuals;  // absent when the run failed early
    bool symmetric = false;
    std::string error;  // set when the run raised instead of returning
};

// One JSON object per line; see README for the field list.
std::string to_json_line(const RunRecord& r);
RunRecord parse_json_line(const std::string& line);  // throws std::invalid_argument

// Exit codes of the command-line tool.
inline constexpr int kExitConverged = 0;
inline constexpr int kExitFailed = 2;
inline constexpr int kExitInput = 3;

int exit_code_for(RefineStatus s);

// Runs one pipeline and fills a record; solver failures (separation,
// non-convergence of the lp QR) are recorded in `error` rather than thrown.
RunRecord run_pipeline(const MatrixSpec& spec, const RefineConfig& cfg, bool symmetric);

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_main(int argc, const char* const* argv);

}  // namespace mpschur
