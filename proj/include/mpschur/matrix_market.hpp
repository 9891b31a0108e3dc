#pragma once

// Matrix Market exchange format: dense readers and an array-format writer.

#include <istream>
#include <ostream>
#include <string>

#include "mpschur/matrix.hpp"

namespace mpschur {

struct FormatError : Error {
    using Error::Error;
};

enum class MmFormat { Coordinate, Array };
enum class MmField { Real, Complex, Integer };
enum class MmSymmetry { General, Symmetric };

struct MmHeader {
    MmFormat format = MmFormat::Array;
    MmField field = MmField::Real;
    MmSymmetry symmetry = MmSymmetry::General;
    Index rows = 0;
    Index cols = 0;
    Index entries = 0;  // nonzeros listed in a coordinate file, rows*cols for arrays
};

struct MmMatrix {
    MmHeader header;
    MatrixHp data;
};

// Entries are parsed as double-double, so files written at hp precision
// read back bit-identically.
MmMatrix read_matrix_market(std::istream& in);
MmMatrix read_matrix_market(const std::string& path);

// Array format; 36 significant digits for hp, 17 for lp.  Always writes the
// complex field unless every imaginary part is zero.
void write_matrix_market(std::ostream& out, const MatrixHp& M);
void write_matrix_market(std::ostream& out, const MatrixLp& M);
void write_matrix_market(const std::string& path, const MatrixHp& M);
void write_matrix_market(const std::string& path, const MatrixLp& M);

}  // namespace mpschur
