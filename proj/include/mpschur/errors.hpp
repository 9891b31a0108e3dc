#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mpschur {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};

// The QR iteration exhausted its sweep budget.
struct NoConvergence : Error {
    using Error::Error;
};

// Two diagonal entries of a triangular factor coincide, so the triangular
// matrix equation (or a Sylvester block of it) is singular.
struct SeparationError : Error {
    SeparationError(std::size_t i, std::size_t j)
        : Error("diagonal entries " + std::to_string(i) + " and " + std::to_string(j) +
                " of T coincide"),
          row(i),
          col(j) {}
    std::size_t row;
    std::size_t col;
};

struct NonFiniteError : Error {
    NonFiniteError(std::size_t i, std::size_t j)
        : Error("non-finite entry at (" + std::to_string(i) + ", " + std::to_string(j) +
                ") of the triangular equation solution"),
          row(i),
          col(j) {}
    std::size_t row;
    std::size_t col;
};

struct RankDeficient : Error {
    using Error::Error;
};

struct NormTooLarge : Error {
    using Error::Error;
};

struct NotSymmetric : Error {
    using Error::Error;
};

}  // namespace mpschur
