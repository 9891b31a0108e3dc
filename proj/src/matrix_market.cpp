#include "mpschur/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <vector>

namespace mpschur {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::vector<std::string> tokens(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> out;
    for (std::string t; ss >> t;) out.push_back(t);
    return out;
}

bool blank_or_comment(const std::string& line) {
    auto pos = line.find_first_not_of(" \t\r");
    return pos == std::string::npos || line[pos] == '%';
}

MmHeader parse_banner(const std::string& line) {
    auto t = tokens(line);
    if (t.size() != 5 || t[0] != "%%MatrixMarket" || lower(t[1]) != "matrix")
        throw FormatError("matrix market: malformed header line: " + line);
    MmHeader h;
    const std::string fmt = lower(t[2]), field = lower(t[3]), sym = lower(t[4]);
    if (fmt == "coordinate")
        h.format = MmFormat::Coordinate;
    else if (fmt == "array")
        h.format = MmFormat::Array;
    else
        throw FormatError("matrix market: unsupported format '" + t[2] + "'");
    if (field == "real")
        h.field = MmField::Real;
    else if (field == "complex")
        h.field = MmField::Complex;
    else if (field == "integer")
        h.field = MmField::Integer;
    else
        throw FormatError("matrix market: unsupported field '" + t[3] + "'");
    if (sym == "general")
        h.symmetry = MmSymmetry::General;
    else if (sym == "symmetric")
        h.symmetry = MmSymmetry::Symmetric;
    else
        throw FormatError("matrix market: unsupported symmetry '" + t[4] + "'");
    return h;
}

Index parse_index(const std::string& s, const char* what) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size()) throw FormatError(std::string("matrix market: bad ") + what + " '" + s + "'");
    return static_cast<Index>(v);
}

DDReal parse_value(const std::string& s) {
    try {
        return parse_dd(s);
    } catch (const std::invalid_argument&) {
        throw FormatError("matrix market: bad value '" + s + "'");
    }
}

DDComplex parse_entry(const std::vector<std::string>& t, std::size_t at, MmField field) {
    const std::size_t need = at + (field == MmField::Complex ? 2 : 1);
    if (t.size() != need) throw FormatError("matrix market: wrong number of fields on an entry line");
    if (field == MmField::Integer) parse_index(t[at], "integer value");
    DDComplex z(parse_value(t[at]));
    if (field == MmField::Complex) z.im = parse_value(t[at + 1]);
    return z;
}

bool next_data_line(std::istream& in, std::string& line) {
    while (std::getline(in, line))
        if (!blank_or_comment(line)) return true;
    return false;
}

}  // namespace

MmMatrix read_matrix_market(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("matrix market: empty input");
    MmMatrix m;
    MmHeader& h = m.header;
    h = parse_banner(line);
    if (!next_data_line(in, line)) throw FormatError("matrix market: missing size line");
    auto sz = tokens(line);
    if (sz.size() != (h.format == MmFormat::Coordinate ? 3u : 2u))
        throw FormatError("matrix market: malformed size line: " + line);
    h.rows = parse_index(sz[0], "row count");
    h.cols = parse_index(sz[1], "column count");
    if (h.rows < 0 || h.cols < 0) throw FormatError("matrix market: negative dimension");
    if (h.symmetry == MmSymmetry::Symmetric && h.rows != h.cols)
        throw FormatError("matrix market: symmetric storage needs a square matrix");

    m.data = MatrixHp::Zero(h.rows, h.cols);
    if (h.format == MmFormat::Coordinate) {
        h.entries = parse_index(sz[2], "entry count");
        if (h.entries < 0) throw FormatError("matrix market: negative entry count");
        std::vector<char> seen(static_cast<std::size_t>(h.rows * h.cols), 0);
        for (Index k = 0; k < h.entries; ++k) {
            if (!next_data_line(in, line)) throw FormatError("matrix market: fewer entries than declared");
            auto t = tokens(line);
            if (t.size() < 3) throw FormatError("matrix market: malformed entry line: " + line);
            const Index i = parse_index(t[0], "row index") - 1;
            const Index j = parse_index(t[1], "column index") - 1;
            if (i < 0 || i >= h.rows || j < 0 || j >= h.cols)
                throw FormatError("matrix market: index out of range on line: " + line);
            if (h.symmetry == MmSymmetry::Symmetric && i < j)
                throw FormatError("matrix market: symmetric file lists an upper-triangle entry");
            char& flag = seen[static_cast<std::size_t>(j * h.rows + i)];
            if (flag) throw FormatError("matrix market: duplicate entry on line: " + line);
            flag = 1;
            const DDComplex z = parse_entry(t, 2, h.field);
            m.data(i, j) = z;
            if (h.symmetry == MmSymmetry::Symmetric) m.data(j, i) = z;
        }
    } else {
        for (Index j = 0; j < h.cols; ++j) {
            const Index start = h.symmetry == MmSymmetry::Symmetric ? j : 0;
            for (Index i = start; i < h.rows; ++i) {
                if (!next_data_line(in, line)) throw FormatError("matrix market: fewer entries than declared");
                const DDComplex z = parse_entry(tokens(line), 0, h.field);
                m.data(i, j) = z;
                if (h.symmetry == MmSymmetry::Symmetric) m.data(j, i) = z;
                ++h.entries;
            }
        }
    }
    if (next_data_line(in, line)) throw FormatError("matrix market: trailing data after the declared entries");
    return m;
}

MmMatrix read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("matrix market: cannot open " + path);
    return read_matrix_market(in);
}

void write_matrix_market(std::ostream& out, const MatrixHp& M) {
    bool complex = false;
    for (Index j = 0; j < M.cols() && !complex; ++j)
        for (Index i = 0; i < M.rows(); ++i)
            if (M(i, j).im.hi != 0.0 || M(i, j).im.lo != 0.0) complex = true;
    out << "%%MatrixMarket matrix array " << (complex ? "complex" : "real") << " general\n";
    out << M.rows() << ' ' << M.cols() << '\n';
    for (Index j = 0; j < M.cols(); ++j) {
        for (Index i = 0; i < M.rows(); ++i) {
            out << to_string(M(i, j).re);
            if (complex) out << ' ' << to_string(M(i, j).im);
            out << '\n';
        }
    }
}

void write_matrix_market(std::ostream& out, const MatrixLp& M) {
    const bool complex = (M.imag().array() != 0.0).any();
    out << "%%MatrixMarket matrix array " << (complex ? "complex" : "real") << " general\n";
    out << M.rows() << ' ' << M.cols() << '\n';
    std::ostringstream fmt;
    fmt.precision(16);  // 17 significant digits
    fmt << std::scientific;
    for (Index j = 0; j < M.cols(); ++j) {
        for (Index i = 0; i < M.rows(); ++i) {
            fmt.str("");
            fmt << M(i, j).real();
            if (complex) fmt << ' ' << M(i, j).imag();
            out << fmt.str() << '\n';
        }
    }
}

void write_matrix_market(const std::string& path, const MatrixHp& M) {
    std::ofstream out(path);
    if (!out) throw FormatError("matrix market: cannot write " + path);
    write_matrix_market(out, M);
}

void write_matrix_market(const std::string& path, const MatrixLp& M) {
    std::ofstream out(path);
    if (!out) throw FormatError("matrix market: cannot write " + path);
    write_matrix_market(out, M);
}

}  // namespace mpschur
