#include "mpschur/harness.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <Eigen/QR>
#include <json.hpp>

#include "mpschur/matrix_market.hpp"

namespace mpschur {

namespace {

using json = nlohmann::json;

// Separate generator streams so that, e.g., X and D never share draws.
constexpr std::uint64_t kStreamRandn = 1;
constexpr std::uint64_t kStreamSpectrum = 2;
constexpr std::uint64_t kStreamHaarU = 3;
constexpr std::uint64_t kStreamHaarV = 4;

DDReal exact_dd(__int128 v) {
    const double hi = static_cast<double>(v);
    const double lo = static_cast<double>(v - static_cast<__int128>(hi));
    DDReal r;
    eft::quick_two_sum(hi, lo, r.hi, r.lo);
    return r;
}

Eigen::MatrixXd haar_orthogonal(Index n, std::uint64_t seed, std::uint64_t stream) {
    CounterRng rng(seed, stream);
    Eigen::MatrixXd G(n, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) G(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd& R = qr.matrixQR();
    for (Index k = 0; k < n; ++k)
        if (R(k, k) < 0.0) Q.col(k) = -Q.col(k);
    return Q;
}

const char* ortho_name(OrthoStrategy s) { return s == OrthoStrategy::NewtonSchulz ? "ns" : "qr"; }

OrthoStrategy parse_ortho(const std::string& s) {
    if (s == "ns") return OrthoStrategy::NewtonSchulz;
    if (s == "qr") return OrthoStrategy::QrRetraction;
    throw std::invalid_argument("unknown orthogonalization '" + s + "'");
}

template <typename T>
T required(const json& j, const char* key) {
    if (!j.contains(key)) throw std::invalid_argument(std::string("report record lacks field '") + key + "'");
    return j.at(key).get<T>();
}

// JSON has no inf/nan; those are written as strings.
json num(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

double unnum(const json& j) {
    if (j.is_number()) return j.get<double>();
    const std::string s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw std::invalid_argument("bad numeric field '" + s + "'");
}

}  // namespace

const char* to_string(MatrixKind k) {
    switch (k) {
        case MatrixKind::RandnComplex: return "randn";
        case MatrixKind::RandnReal: return "randn-real";
        case MatrixKind::WilkinsonCompanion: return "wilkinson";
        case MatrixKind::Clustered: return "clustered";
        case MatrixKind::FromFile: return "file";
    }
    return "?";
}

std::optional<MatrixKind> parse_kind(const std::string& s) {
    for (auto k : {MatrixKind::RandnComplex, MatrixKind::RandnReal, MatrixKind::WilkinsonCompanion,
                   MatrixKind::Clustered, MatrixKind::FromFile})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

void MatrixSpec::validate() const {
    if (kind == MatrixKind::FromFile) {
        if (!path || path->empty()) throw std::invalid_argument("a file path is required for kind 'file'");
        return;
    }
    if (path) throw std::invalid_argument("a file path is only accepted for kind 'file'");
    if (n < 1) throw std::invalid_argument("n must be at least 1");
    if (kind == MatrixKind::WilkinsonCompanion && n > 25)
        throw std::invalid_argument("the Wilkinson companion matrix is limited to n <= 25");
    if (kind == MatrixKind::Clustered) {
        if (cluster_count < 0 || cluster_size < 0) throw std::invalid_argument("cluster counts must be non-negative");
        if (cluster_count > 0 && (cluster_size < 1 || !(cluster_radius > 0.0)))
            throw std::invalid_argument("cluster size and radius must be positive");
        if (static_cast<Index>(cluster_count) * cluster_size > n)
            throw std::invalid_argument("clusters do not fit in a matrix of order n");
        if (!(cond_x >= 1.0) || !std::isfinite(cond_x)) throw std::invalid_argument("cond_x must be at least 1");
    }
}

std::vector<__int128> wilkinson_coefficients(int n) {
    if (n < 1 || n > 25) throw std::invalid_argument("wilkinson_coefficients: n must be in [1, 25]");
    // poly[k] is the coefficient of x^k; start from 1 and multiply by (x - i).
    std::vector<__int128> poly{1};
    for (int i = 1; i <= n; ++i) {
        std::vector<__int128> next(poly.size() + 1, 0);
        for (std::size_t k = 0; k < poly.size(); ++k) {
            next[k + 1] += poly[k];
            next[k] -= static_cast<__int128>(i) * poly[k];
        }
        poly = std::move(next);
    }
    poly.pop_back();  // monic leading term
    return poly;
}

MatrixHp gen_wilkinson(int n) {
    const auto c = wilkinson_coefficients(n);
    MatrixHp C = MatrixHp::Zero(n, n);
    for (Index i = 1; i < n; ++i) C(i, i - 1) = DDComplex(1.0);
    for (Index i = 0; i < n; ++i) C(i, n - 1) = DDComplex(-exact_dd(c[static_cast<std::size_t>(i)]));
    return C;
}

MatrixHp gen_randn(Index n, bool complex, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gen_randn: n must be at least 1");
    CounterRng rng(seed, kStreamRandn);
    MatrixHp A(n, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
            const double re = rng.normal();
            const double im = complex ? rng.normal() : 0.0;
            A(i, j) = DDComplex(DDReal(re), DDReal(im));
        }
    }
    return A;
}

DenseVector<DDReal> clustered_spectrum(Index n, int cluster_count, int cluster_size, double cluster_radius,
                                       std::uint64_t seed) {
    CounterRng rng(seed, kStreamSpectrum);
    DenseVector<DDReal> d(n);
    Index k = 0;
    for (int c = 0; c < cluster_count; ++c) {
        const double center = rng.uniform(-10.0, 10.0);
        // Summed in hp so radii below the binary64 spacing survive.
        for (int m = 0; m < cluster_size; ++m)
            d(k++) = DDReal(center) + DDReal(rng.uniform(-cluster_radius, cluster_radius));
    }
    while (k < n) d(k++) = DDReal(rng.uniform(-10.0, 10.0));
    return d;
}

MatrixHp gen_clustered(Index n, int cluster_count, int cluster_size, double cluster_radius, double cond_x,
                       std::uint64_t seed) {
    MatrixSpec spec;
    spec.kind = MatrixKind::Clustered;
    spec.n = n;
    spec.cluster_count = cluster_count;
    spec.cluster_size = cluster_size;
    spec.cluster_radius = cluster_radius;
    spec.cond_x = cond_x;
    spec.validate();

    const DenseVector<DDReal> d = clustered_spectrum(n, cluster_count, cluster_size, cluster_radius, seed);
    const Eigen::MatrixXd U = haar_orthogonal(n, seed, kStreamHaarU);
    const Eigen::MatrixXd V = haar_orthogonal(n, seed, kStreamHaarV);
    const double top = std::log10(cond_x);
    Eigen::VectorXd s(n);
    for (Index k = 0; k < n; ++k) s(k) = n == 1 ? 1.0 : std::pow(10.0, top * static_cast<double>(k) / static_cast<double>(n - 1));
    const Eigen::MatrixXd X = U * s.asDiagonal() * V.transpose();

    // A = (X D) X^{-1}, computed as the transpose of X^{-T} (X D)^T.
    const MatrixHp Xh = to_hp(MatrixLp(X.cast<cplx>()));
    MatrixHp XD = Xh;
    for (Index j = 0; j < n; ++j) XD.col(j) *= DDComplex(d(j));
    const MatrixHp Xt = Xh.transpose();
    const MatrixHp XDt = XD.transpose();
    return solve_hp(Xt, XDt).transpose();
}

MatrixHp make_matrix(const MatrixSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case MatrixKind::RandnComplex: return gen_randn(spec.n, true, spec.seed);
        case MatrixKind::RandnReal: return gen_randn(spec.n, false, spec.seed);
        case MatrixKind::WilkinsonCompanion: return gen_wilkinson(static_cast<int>(spec.n));
        case MatrixKind::Clustered:
            return gen_clustered(spec.n, spec.cluster_count, spec.cluster_size, spec.cluster_radius, spec.cond_x,
                                 spec.seed);
        case MatrixKind::FromFile: {
            MmMatrix m = read_matrix_market(*spec.path);
            if (m.data.rows() != m.data.cols()) throw DimensionError("matrix in " + *spec.path + " is not square");
            return std::move(m.data);
        }
    }
    throw std::invalid_argument("unknown matrix kind");
}

std::string to_json_line(const RunRecord& r) {
    json spec{{"kind", to_string(r.spec.kind)},
              {"n", r.spec.n},
              {"seed", r.spec.seed},
              {"cluster_count", r.spec.cluster_count},
              {"cluster_size", r.spec.cluster_size},
              {"cluster_radius", num(r.spec.cluster_radius)},
              {"cond_x", num(r.spec.cond_x)},
              {"path", r.spec.path ? json(*r.spec.path) : json(nullptr)}};
    json config{{"tol_factor", num(r.config.tol_factor)},
                {"max_iters", r.config.max_iters},
                {"n_min", r.config.n_min},
                {"clip_threshold", r.config.clip_threshold ? num(*r.config.clip_threshold) : json(nullptr)},
                {"ortho", ortho_name(r.config.ortho)},
                {"skip_final_ortho", r.config.skip_final_ortho},
                {"seed", r.config.seed},
                {"restore_full_sigma", r.config.restore_full_sigma}};
    json history = json::array();
    for (const auto& e : r.report.residual_history)
        history.push_back({{"off_triangle", num(e.off_triangle)}, {"ortho", num(e.ortho)}, {"ortho_estimated", e.ortho_estimated}});
    const RefineReport& p = r.report;
    json report{{"iterations", p.iterations},
                {"residual_history", history},
                {"hp_matmul_count", p.hp_matmul_count},
                {"clipped_total", p.clipped_total},
                {"status", to_string(p.status)},
                {"wall_time", num(p.wall_time)},
                {"seed", p.seed},
                {"theta", num(p.theta)},
                {"skipped_orthogonalizations", p.skipped_orthogonalizations},
                {"sylvester_solves", p.sylvester_solves},
                {"hp_matmul_seconds", num(p.hp_matmul_seconds)},
                {"tolerance", num(p.tolerance)},
                {"failed_iteration", p.failed_iteration ? json(*p.failed_iteration) : json(nullptr)},
                {"hint", p.hint}};
    json residuals = r.residuals ? json{{"ortho", num(r.residuals->ortho)},
                                        {"tri", num(r.residuals->tri)},
                                        {"similarity", num(r.residuals->similarity)}}
                                 : json(nullptr);
    json rec{{"schema_version", kReportSchemaVersion},
             {"spec", spec},
             {"config", config},
             {"symmetric", r.symmetric},
             {"report", report},
             {"residuals", residuals},
             {"error", r.error}};
    return rec.dump();
}

RunRecord parse_json_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("report record is not valid JSON: ") + e.what());
    }
    try {
        if (required<int>(j, "schema_version") != kReportSchemaVersion)
            throw std::invalid_argument("unsupported report schema version");
        RunRecord r;
        const json& s = j.at("spec");
        auto kind = parse_kind(required<std::string>(s, "kind"));
        if (!kind) throw std::invalid_argument("unknown matrix kind in record");
        r.spec.kind = *kind;
        r.spec.n = required<Index>(s, "n");
        r.spec.seed = required<std::uint64_t>(s, "seed");
        r.spec.cluster_count = required<int>(s, "cluster_count");
        r.spec.cluster_size = required<int>(s, "cluster_size");
        r.spec.cluster_radius = unnum(s.at("cluster_radius"));
        r.spec.cond_x = unnum(s.at("cond_x"));
        if (!s.at("path").is_null()) r.spec.path = s.at("path").get<std::string>();

        const json& c = j.at("config");
        r.config.tol_factor = unnum(c.at("tol_factor"));
        r.config.max_iters = required<int>(c, "max_iters");
        r.config.n_min = required<Index>(c, "n_min");
        if (!c.at("clip_threshold").is_null()) r.config.clip_threshold = unnum(c.at("clip_threshold"));
        r.config.ortho = parse_ortho(required<std::string>(c, "ortho"));
        r.config.skip_final_ortho = required<bool>(c, "skip_final_ortho");
        r.config.seed = required<std::uint64_t>(c, "seed");
        r.config.restore_full_sigma = required<bool>(c, "restore_full_sigma");
        r.symmetric = required<bool>(j, "symmetric");

        const json& p = j.at("report");
        RefineReport& q = r.report;
        q.iterations = required<int>(p, "iterations");
        for (const auto& e : p.at("residual_history"))
            q.residual_history.push_back({unnum(e.at("off_triangle")), unnum(e.at("ortho")), e.at("ortho_estimated").get<bool>()});
        q.hp_matmul_count = required<std::uint64_t>(p, "hp_matmul_count");
        q.clipped_total = required<std::size_t>(p, "clipped_total");
        auto status = parse_status(required<std::string>(p, "status"));
        if (!status) throw std::invalid_argument("unknown status in record");
        q.status = *status;
        q.wall_time = unnum(p.at("wall_time"));
        q.seed = required<std::uint64_t>(p, "seed");
        q.theta = unnum(p.at("theta"));
        q.skipped_orthogonalizations = required<int>(p, "skipped_orthogonalizations");
        q.sylvester_solves = required<std::size_t>(p, "sylvester_solves");
        q.hp_matmul_seconds = unnum(p.at("hp_matmul_seconds"));
        q.tolerance = unnum(p.at("tolerance"));
        if (!p.at("failed_iteration").is_null()) q.failed_iteration = p.at("failed_iteration").get<int>();
        q.hint = required<std::string>(p, "hint");

        if (!j.at("residuals").is_null()) {
            const json& v = j.at("residuals");
            r.residuals = PairResiduals{unnum(v.at("ortho")), unnum(v.at("tri")), unnum(v.at("similarity"))};
        }
        r.error = required<std::string>(j, "error");
        return r;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed report record: ") + e.what());
    }
}

int exit_code_for(RefineStatus s) { return s == RefineStatus::Converged ? kExitConverged : kExitFailed; }

RunRecord run_pipeline(const MatrixSpec& spec, const RefineConfig& cfg, bool symmetric) {
    RunRecord rec;
    rec.spec = spec;
    rec.config = cfg;
    rec.symmetric = symmetric;
    rec.report.seed = cfg.seed;
    const MatrixHp A = make_matrix(spec);
    try {
        RefineResult res = symmetric ? refine_symmetric(A, cfg) : refine_mixed(A, cfg);
        rec.report = std::move(res.report);
        if (all_finite(res.pair.Q) && all_finite(res.pair.T)) rec.residuals = verify_pair(A, res.pair);
    } catch (const SeparationError& e) {
        rec.report.status = RefineStatus::Diverged;
        rec.error = e.what();
    } catch (const NoConvergence& e) {
        rec.report.status = RefineStatus::Diverged;
        rec.error = e.what();
    } catch (const NormTooLarge& e) {
        rec.report.status = RefineStatus::Diverged;
        rec.error = e.what();
    }
    return rec;
}

namespace {

struct CliOptions {
    std::string kind = "randn";
    Index n = 0;
    std::uint64_t seed = 0;
    std::string file;
    std::optional<double> clip;
    Index nmin = 4;
    int max_iters = 20;
    bool symmetric = false;
    std::string ortho = "ns";
    std::string out;
    int clusters = 0;
    int cluster_size = 10;
    double radius = 1e-5;
    double cond = 1e5;
    double tol_factor = 10.0;
    bool no_skip = false;
    bool full_sigma = false;
    int threads = 0;
    std::vector<Index> sizes;
};

void add_common(CLI::App* app, CliOptions& o) {
    app->add_option("--kind", o.kind, "randn | randn-real | wilkinson | clustered")
        ->check(CLI::IsMember({"randn", "randn-real", "wilkinson", "clustered"}));
    app->add_option("--seed", o.seed, "seed for the generator and the ordering line");
    app->add_option("--clip", o.clip, "zero correction entries above this modulus");
    app->add_option("--nmin", o.nmin, "block size at which the recursive solver switches to substitution");
    app->add_option("--max-iters", o.max_iters, "iteration limit");
    app->add_flag("--symmetric", o.symmetric, "Hermitian input: diagonal correction path");
    app->add_option("--ortho", o.ortho, "ns | qr")->check(CLI::IsMember({"ns", "qr"}));
    app->add_option("--out", o.out, "append JSON-lines records here");
    app->add_option("--clusters", o.clusters, "clustered: number of clusters");
    app->add_option("--cluster-size", o.cluster_size, "clustered: members per cluster");
    app->add_option("--radius", o.radius, "clustered: cluster radius");
    app->add_option("--cond", o.cond, "clustered: 2-norm condition of the eigenvector matrix");
    app->add_option("--tol-factor", o.tol_factor, "stop when ||E||_F <= f n u_hp ||A||_F");
    app->add_flag("--no-skip", o.no_skip, "never skip the final orthogonalization");
    app->add_flag("--full-sigma", o.full_sigma, "keep the W^2 Y terms in the merged update");
    app->add_option("--threads", o.threads, "GEMM threads (0: hardware concurrency)");
}

RefineConfig config_from(const CliOptions& o) {
    RefineConfig cfg;
    cfg.tol_factor = o.tol_factor;
    cfg.max_iters = o.max_iters;
    cfg.n_min = o.nmin;
    cfg.clip_threshold = o.clip;
    cfg.ortho = parse_ortho(o.ortho);
    cfg.skip_final_ortho = !o.no_skip;
    cfg.seed = o.seed;
    cfg.restore_full_sigma = o.full_sigma;
    cfg.validate();
    return cfg;
}

MatrixSpec spec_from(const CliOptions& o, Index n) {
    MatrixSpec s;
    if (!o.file.empty()) {
        s.kind = MatrixKind::FromFile;
        s.path = o.file;
    } else {
        s.kind = *parse_kind(o.kind);
        s.n = n;
    }
    s.seed = o.seed;
    s.cluster_count = o.clusters;
    s.cluster_size = o.cluster_size;
    s.cluster_radius = o.radius;
    s.cond_x = o.cond;
    s.validate();
    return s;
}

void emit(const RunRecord& rec, const std::string& path, std::ostream& out) {
    const std::string line = to_json_line(rec);
    if (path.empty()) {
        out << line << '\n';
        return;
    }
    std::ofstream f(path, std::ios::app);
    if (!f) throw std::invalid_argument("cannot open report file " + path);
    f << line << '\n';
}

void summarize(const RunRecord& rec, std::ostream& err) {
    const RefineReport& r = rec.report;
    err << "status " << to_string(r.status) << ", iterations " << r.iterations << ", hp GEMMs "
        << r.hp_matmul_count << ", clipped " << r.clipped_total << ", " << std::setprecision(3) << r.wall_time
        << " s\n";
    if (rec.residuals)
        err << "  ||Q^H Q - I||_F = " << rec.residuals->ortho << ", ||stril(Q^H A Q)||_F = " << rec.residuals->tri
            << '\n';
    if (!rec.error.empty()) err << "  error: " << rec.error << '\n';
    if (!r.hint.empty()) err << "  hint: " << r.hint << '\n';
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Schur decomposition in binary64 refined to double-double"};
    app.require_subcommand(1);
    CliOptions o;

    CLI::App* refine = app.add_subcommand("refine", "refine one matrix and write a run record");
    add_common(refine, o);
    refine->add_option("--n", o.n, "matrix order");
    refine->add_option("--file", o.file, "Matrix Market input")->check(CLI::ExistingFile);

    CLI::App* bench = app.add_subcommand("bench", "time the pipeline over several sizes");
    add_common(bench, o);
    bench->add_option("--sizes", o.sizes, "matrix orders")->delimiter(',')->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitInput;
    }

    try {
        const RefineConfig cfg = config_from(o);
        set_default_gemm_threads(o.threads);
        if (refine->parsed()) {
            if (o.file.empty() && o.n < 1) throw std::invalid_argument("--n is required unless --file is given");
            const MatrixSpec spec = spec_from(o, o.n);
            RunRecord rec = run_pipeline(spec, cfg, o.symmetric);
            emit(rec, o.out, out);
            summarize(rec, err);
            return rec.error.empty() ? exit_code_for(rec.report.status) : kExitFailed;
        }
        err << std::setw(6) << "n" << std::setw(8) << "iters" << std::setw(10) << "hp_gemm" << std::setw(12)
            << "wall_s" << std::setw(12) << "hp_frac" << std::setw(12) << "ortho" << std::setw(12) << "tri/|A|"
            << "  status\n";
        int worst = kExitConverged;
        for (Index n : o.sizes) {
            const MatrixSpec spec = spec_from(o, n);
            RunRecord rec = run_pipeline(spec, cfg, o.symmetric);
            emit(rec, o.out, out);
            const RefineReport& r = rec.report;
            const double frac = r.wall_time > 0.0 ? r.hp_matmul_seconds / r.wall_time : 0.0;
            double rel_tri = std::numeric_limits<double>::quiet_NaN();
            double ortho = rel_tri;
            if (rec.residuals) {
                ortho = rec.residuals->ortho;
                const double na = to_lp(frobenius_norm(make_matrix(spec)));
                rel_tri = na > 0.0 ? rec.residuals->tri / na : rec.residuals->tri;
            }
            err << std::setw(6) << n << std::setw(8) << r.iterations << std::setw(10) << r.hp_matmul_count
                << std::setw(12) << std::setprecision(4) << r.wall_time << std::setw(12) << frac << std::setw(12)
                << std::setprecision(2) << ortho << std::setw(12) << rel_tri << "  " << to_string(r.status) << '\n';
            if (!rec.error.empty() || r.status != RefineStatus::Converged) worst = kExitFailed;
        }
        return worst;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
    } catch (const FormatError& e) {
        err << "error: " << e.what() << '\n';
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << '\n';
    } catch (const NotSymmetric& e) {
        err << "error: " << e.what() << '\n';
    }
    return kExitInput;
}

int cli_main(int argc, const char* const* argv) { return cli_main(argc, argv, std::cout, std::cerr); }

}  // namespace mpschur
