#pragma once

#include <iosfwd>
#include <string>

#include "doaopt/optimize.hpp"
#include "doaopt/solve.hpp"

namespace doaopt {

// Text formats. Every writer accepts an optional provenance comment that
// is emitted as a first line starting with '#'; readers skip any number
// of leading '#' lines. Values are printed with %.17g so a write/read
// round trip reproduces doubles bit-exactly.

// GEN format:
//   GEN d n nnz
//   <nnz lines: row col value>   (0-based indices)
//   <n lines:   LEAK col value>
void write_generator(std::ostream& os, const Generator& gen,
                     const std::string& comment = {});
// The header carries no geometry, so reading requires the grid; d and n
// are validated against it.
Generator read_generator(std::istream& is, const Grid& grid);

// FIELD format:
//   FIELD d res_1 ... res_d lo_1 hi_1 ... lo_d hi_d tag
//   <n lines: value>             (row-major; "inf" for +infinity)
void write_field(std::ostream& os, const CellField& field,
                 const std::string& comment = {});
CellField read_field(std::istream& is);

// Optimization trace as CSV with header
//   k,b_1,...,b_r,f,grad_norm,g,projected,deadband,seconds
// g is "nan" in DOA mode; flags are 0/1.
void write_trace(std::ostream& os, const OptTrace& trace,
                 const std::string& comment = {});

// Parameter vector, one %.17g value per line.
void write_parameters(std::ostream& os, const Eigen::VectorXd& b,
                      const std::string& comment = {});
Eigen::VectorXd read_parameters(std::istream& is);

// FNV-1a 64-bit hash, used for config provenance comments.
unsigned long long fnv1a64(const std::string& bytes);

// "# doaopt <version> config=<hex hash>"
std::string provenance_comment(const std::string& config_text);

}  // namespace doaopt
