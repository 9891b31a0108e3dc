#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "mpschur/harness.hpp"
#include "mpschur/matrix_market.hpp"
#include "oracles.hpp"

using namespace mpschur;
using oracle::Wide;
using oracle::wide;

namespace {

bool bit_equal(const MatrixHp& A, const MatrixHp& B) {
    if (A.rows() != B.rows() || A.cols() != B.cols()) return false;
    for (Index j = 0; j < A.cols(); ++j)
        for (Index i = 0; i < A.rows(); ++i) {
            const DDComplex &a = A(i, j), &b = B(i, j);
            if (a.re.hi != b.re.hi || a.re.lo != b.re.lo || a.im.hi != b.im.hi || a.im.lo != b.im.lo) return false;
        }
    return true;
}

MmMatrix parse(const std::string& text) {
    std::istringstream in(text);
    return read_matrix_market(in);
}

struct Cli {
    int code = 0;
    std::string out, err;
};

Cli run(std::vector<std::string> args) {
    args.insert(args.begin(), "mpschur");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Cli r;
    r.code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("mpschur_test_" + name);
}

}  // namespace

TEST_CASE("Wilkinson companion matrices") {
    const MatrixHp one = gen_wilkinson(1);
    REQUIRE(one.rows() == 1);
    CHECK(one(0, 0).re.hi == 1.0);

    const MatrixHp two = gen_wilkinson(2);
    const Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(to_lp(two), false);
    std::vector<cplx> ev(es.eigenvalues().data(), es.eigenvalues().data() + 2);
    CHECK(oracle::match_distance(ev, {1.0, 2.0}) <= 1e-14);
    CHECK(two(1, 0).re.hi == 1.0);
    CHECK(two(0, 1).re.hi == -2.0);
    CHECK(two(1, 1).re.hi == 3.0);

    const auto c = wilkinson_coefficients(20);
    __int128 factorial = 1;
    for (int i = 1; i <= 20; ++i) factorial *= i;
    CHECK(c[0] == factorial);
    CHECK(factorial == static_cast<__int128>(2432902008176640000LL));
    CHECK(c[19] == -210);
    const MatrixHp w = gen_wilkinson(20);
    CHECK(wide(w(0, 19).re) == -Wide(2432902008176640000LL));
    // The largest coefficient needs more than 53 bits and is still exact.
    Wide largest = 0;
    for (Index i = 0; i < 20; ++i) largest = std::max(largest, abs(wide(w(i, 19).re)));
    CHECK(largest > Wide(0x1p53));
    CHECK_THROWS_AS(wilkinson_coefficients(26), std::invalid_argument);
}

TEST_CASE("random and clustered generators") {
    CHECK(bit_equal(gen_randn(6, true, 3), gen_randn(6, true, 3)));
    CHECK_FALSE(bit_equal(gen_randn(6, true, 3), gen_randn(6, true, 4)));
    const MatrixHp real = gen_randn(6, false, 3);
    for (Index j = 0; j < 6; ++j)
        for (Index i = 0; i < 6; ++i) CHECK(real(i, j).im.hi == 0.0);

    // No clusters: the spectrum is the uniform one.
    const DenseVector<DDReal> d = clustered_spectrum(12, 0, 0, 1e-5, 5);
    const MatrixHp A0 = gen_clustered(12, 0, 0, 1e-5, 10.0, 5);
    const Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(to_lp(A0), false);
    std::vector<cplx> got(es.eigenvalues().data(), es.eigenvalues().data() + 12), want;
    for (Index i = 0; i < 12; ++i) {
        want.push_back(to_lp(d(i)));
        CHECK(std::abs(to_lp(d(i))) <= 10.0);
    }
    CHECK(oracle::match_distance(got, want) <= 1e-10);

    // Cluster members sit within the radius of a common center.
    const DenseVector<DDReal> c = clustered_spectrum(30, 2, 5, 1e-5, 6);
    for (int k = 0; k < 2; ++k)
        for (int m = 0; m < 5; ++m)
            CHECK(std::abs(to_lp(c(5 * k + m) - c(5 * k))) <= 2e-5);

    // cond_x = 1: A is normal (to binary64 accuracy, the level at which
    // the Haar factors are orthogonal) and refinement is quick.
    const MatrixHp N = gen_clustered(40, 2, 5, 1e-3, 1.0, 7);
    const MatrixHp comm = matmul_hp(N, N, Trans::None, Trans::Conj) - matmul_hp(N, N, Trans::Conj, Trans::None);
    CHECK(frobenius_norm(comm).hi <= 1e-14 * std::pow(frobenius_norm(N).hi, 2));
    const RefineResult r = refine_mixed(N, RefineConfig{});
    CHECK(r.report.status == RefineStatus::Converged);
    CHECK(r.report.iterations <= 3);

    MatrixSpec bad{MatrixKind::Clustered, 10, 3, 5, 1e-5, 1e5, 1, {}};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = {MatrixKind::WilkinsonCompanion, 30, 0, 0, 0, 1, 0, {}};
    CHECK_THROWS_AS(make_matrix(bad), std::invalid_argument);
    bad = {MatrixKind::FromFile, 0, 0, 0, 0, 1, 0, {}};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    for (auto k : {MatrixKind::RandnComplex, MatrixKind::RandnReal, MatrixKind::WilkinsonCompanion,
                   MatrixKind::Clustered, MatrixKind::FromFile})
        CHECK(parse_kind(to_string(k)) == k);
}

TEST_CASE("Matrix Market input") {
    const MmMatrix m = parse("%%MatrixMarket matrix coordinate real general\n% comment\n2 2 2\n1 1 1.0\n2 2 2.0\n");
    CHECK(m.header.format == MmFormat::Coordinate);
    CHECK(m.header.rows == 2);
    CHECK(m.header.entries == 2);
    CHECK(m.data(0, 0).re.hi == 1.0);
    CHECK(m.data(1, 1).re.hi == 2.0);
    CHECK(m.data(0, 1).re.hi == 0.0);

    const MmMatrix s = parse("%%MatrixMarket matrix coordinate real symmetric\n3 3 2\n2 1 5\n3 3 1\n");
    CHECK(s.header.symmetry == MmSymmetry::Symmetric);
    CHECK(s.data(0, 1).re.hi == 5.0);
    CHECK(s.data(1, 0).re.hi == 5.0);

    const MmMatrix a = parse("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n");
    CHECK(a.data(1, 0).re.hi == 2.0);
    CHECK(a.data(0, 1).re.hi == 3.0);

    const MmMatrix z = parse("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 0.5 -2\n");
    CHECK(z.data(0, 0).im.hi == -2.0);

    const MmMatrix i = parse("%%MatrixMarket matrix coordinate integer general\n1 1 1\n1 1 7\n");
    CHECK(i.data(0, 0).re.hi == 7.0);

    const char* bad[] = {
        "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 1 2.0\n",   // duplicate
        "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n",            // out of range
        "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n",            // missing entry
        "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1.0\n",          // upper triangle
        "%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 1\n",             // unsupported field
        "%%MatrixMarket vector coordinate real general\n2 2 1\n1 1 1\n",              // wrong object
        "%%MatrixMarket matrix coordinate integer general\n1 1 1\n1 1 1.5\n",         // not an integer
        "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 abc\n",            // bad number
        "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n5\n",             // trailing data
        "matrix coordinate real general\n1 1 1\n1 1 1\n",                             // no banner
    };
    for (const char* text : bad) CHECK_THROWS_AS(parse(text), FormatError);
}

TEST_CASE("Matrix Market round trips") {
    CounterRng rng(1);
    const MatrixHp A = oracle::random_hp(5, 5, rng);
    std::stringstream buf;
    write_matrix_market(buf, A);
    CHECK(bit_equal(read_matrix_market(buf).data, A));

    const MatrixLp L = oracle::random_lp(4, 3, rng).real().cast<cplx>();
    std::stringstream lbuf;
    write_matrix_market(lbuf, L);
    CHECK(lbuf.str().find("complex") == std::string::npos);
    const MmMatrix back = read_matrix_market(lbuf);
    CHECK(back.header.rows == 4);
    CHECK(back.header.cols == 3);
    CHECK(to_lp(back.data) == L);

    const auto path = temp_file("roundtrip.mtx");
    write_matrix_market(path.string(), A);
    CHECK(bit_equal(read_matrix_market(path.string()).data, A));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_matrix_market((std::filesystem::temp_directory_path() / "no_such_file.mtx").string()), FormatError);
}

TEST_CASE("run records") {
    RunRecord rec = run_pipeline({MatrixKind::RandnComplex, 12, 0, 0, 1e-5, 1e5, 3, {}}, RefineConfig{}, false);
    REQUIRE(rec.error.empty());
    CHECK(rec.report.status == RefineStatus::Converged);
    REQUIRE(rec.residuals.has_value());

    const std::string line = to_json_line(rec);
    CHECK(line.find('\n') == std::string::npos);
    const nlohmann::json j = nlohmann::json::parse(line);
    CHECK(j.at("schema_version") == kReportSchemaVersion);
    for (const char* key : {"spec", "config", "symmetric", "report", "residuals", "error"}) CHECK(j.contains(key));
    for (const char* key : {"iterations", "residual_history", "hp_matmul_count", "clipped_total", "status", "wall_time"})
        CHECK(j.at("report").contains(key));
    CHECK(j.at("report").at("residual_history").size() == static_cast<std::size_t>(rec.report.iterations) + 1);

    const RunRecord back = parse_json_line(line);
    CHECK(to_json_line(back) == line);
    CHECK(back.report.status == rec.report.status);
    CHECK(back.report.residual_history.back().off_triangle == rec.report.residual_history.back().off_triangle);

    RunRecord odd = rec;
    odd.report.residual_history.back().ortho = std::numeric_limits<double>::quiet_NaN();
    odd.report.wall_time = std::numeric_limits<double>::infinity();
    odd.config.clip_threshold = 1e-5;
    odd.report.failed_iteration = 2;
    const RunRecord odd_back = parse_json_line(to_json_line(odd));
    CHECK(std::isnan(odd_back.report.residual_history.back().ortho));
    CHECK(std::isinf(odd_back.report.wall_time));
    CHECK(odd_back.config.clip_threshold == 1e-5);
    CHECK(odd_back.report.failed_iteration == 2);

    CHECK_THROWS_AS(parse_json_line("{"), std::invalid_argument);
    CHECK_THROWS_AS(parse_json_line("{\"schema_version\": 99}"), std::invalid_argument);
    CHECK_THROWS_AS(parse_json_line("{\"schema_version\": 1}"), std::invalid_argument);

    CHECK(exit_code_for(RefineStatus::Converged) == kExitConverged);
    CHECK(exit_code_for(RefineStatus::NonFinite) == kExitFailed);
    CHECK(exit_code_for(RefineStatus::MaxIters) == kExitFailed);
}

TEST_CASE("command line: refine") {
    const Cli ok = run({"refine", "--kind", "randn", "--n", "64", "--seed", "7"});
    CHECK(ok.code == 0);
    const RunRecord rec = parse_json_line(ok.out.substr(0, ok.out.find('\n')));
    CHECK(rec.report.status == RefineStatus::Converged);
    CHECK(rec.report.iterations <= 4);
    CHECK(rec.spec.n == 64);
    CHECK(ok.err.find("Converged") != std::string::npos);

    const Cli hard = run({"refine", "--kind", "clustered", "--n", "150", "--clusters", "2", "--cluster-size", "10",
                          "--radius", "1e-5", "--cond", "1e5", "--seed", "2"});
    CHECK(hard.code == 2);

    CHECK(run({"refine", "--kind", "nope", "--n", "4"}).code == 3);
    CHECK(run({"refine", "--n", "4", "--ortho", "svd"}).code == 3);
    CHECK(run({"refine", "--kind", "randn"}).code == 3);
    CHECK(run({"refine", "--n", "4", "--clip", "-1"}).code == 3);
    CHECK(run({"refine", "--n", "4", "--bogus"}).code == 3);
    CHECK(run({}).code == 3);
    CHECK(run({"refine", "--file", "/nonexistent/a.mtx"}).code == 3);

    // Symmetric flag on a non-Hermitian matrix is an input error.
    CHECK(run({"refine", "--kind", "randn", "--n", "5", "--symmetric"}).code == 3);

    const auto mtx = temp_file("cli.mtx");
    {
        std::ofstream f(mtx);
        f << "%%MatrixMarket matrix coordinate real symmetric\n3 3 4\n1 1 2\n2 1 1\n2 2 3\n3 3 -1\n";
    }
    const auto report = temp_file("cli.jsonl");
    std::filesystem::remove(report);
    const Cli file = run({"refine", "--file", mtx.string(), "--symmetric", "--clip", "1e-5", "--out", report.string()});
    CHECK(file.code == 0);
    CHECK(file.out.empty());
    std::ifstream in(report);
    std::string line;
    REQUIRE(std::getline(in, line));
    const RunRecord fr = parse_json_line(line);
    CHECK(fr.spec.kind == MatrixKind::FromFile);
    CHECK(fr.symmetric);
    CHECK(fr.config.clip_threshold == 1e-5);
    std::filesystem::remove(mtx);
    std::filesystem::remove(report);
}

TEST_CASE("command line: bench") {
    const Cli one = run({"bench", "--sizes", "1"});
    CHECK(one.code == 0);
    const RunRecord r1 = parse_json_line(one.out.substr(0, one.out.find('\n')));
    CHECK(r1.report.iterations == 0);
    CHECK(r1.report.status == RefineStatus::Converged);

    const Cli a = run({"bench", "--sizes", "8,16", "--seed", "5"});
    const Cli b = run({"bench", "--sizes", "8,16", "--seed", "5"});
    CHECK(a.code == 0);
    std::istringstream sa(a.out), sb(b.out);
    std::string la, lb;
    int lines = 0;
    while (std::getline(sa, la) && std::getline(sb, lb)) {
        const RunRecord ra = parse_json_line(la), rb = parse_json_line(lb);
        CHECK(ra.report.iterations == rb.report.iterations);
        CHECK(ra.report.hp_matmul_count == rb.report.hp_matmul_count);
        CHECK(ra.report.residual_history.back().off_triangle == rb.report.residual_history.back().off_triangle);
        ++lines;
    }
    CHECK(lines == 2);
    CHECK(a.err.find("hp_frac") != std::string::npos);
    CHECK(run({"bench"}).code == 3);
}
