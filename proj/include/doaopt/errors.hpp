#pragma once

#include <stdexcept>
#include <string>

namespace doaopt {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid inputs to library calls (dimension mismatch, bad ranges, ...).
struct InvalidArgument : Error {
    using Error::Error;
};

// Restricted generator matrix could not be factorized, or a solve
// produced non-finite values. Usually means the non-target states are
// not transient (a closed recurrent class outside the target).
struct SingularSystem : Error {
    using Error::Error;
};

// Factorization succeeded but the solution failed the residual check.
struct ResidualFailure : Error {
    using Error::Error;
};

// Time-minimization started outside the feasible region.
struct ConstraintViolated : Error {
    using Error::Error;
};

// Affine discretization path requested for a field without an affine
// decomposition.
struct NotAffine : Error {
    using Error::Error;
};

// Vector field returned NaN/inf at a quadrature node or during simulation.
struct NonFiniteField : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Config file errors carry file and line for precise messages.
struct ConfigError : Error {
    ConfigError(const std::string& file, int line, const std::string& message)
        : Error(file + ":" + std::to_string(line) + ": " + message),
          file(file), line(line) {}
    explicit ConfigError(const std::string& message) : Error(message), line(0) {}
    std::string file;
    int line;
};

}  // namespace doaopt
