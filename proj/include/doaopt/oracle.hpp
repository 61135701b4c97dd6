#pragma once

#include <optional>

#include "doaopt/field.hpp"
#include "doaopt/grid.hpp"
#include "doaopt/solve.hpp"

namespace doaopt {

enum class SimStatus {
    Absorbed,  // trajectory entered the target region
    Escaped,   // trajectory left the state-space box (or blew up)
    Timeout,   // t_max reached first
};

// Fixed-step RK4 trajectory integration. Events are detected at step
// granularity on the step endpoint, target entry taking precedence over
// domain exit; the crossing time is then refined by linear interpolation
// along the last step.
struct SimConfig {
    double step = 1e-3;
    double t_max = 100.0;
    Box domain;                          // state-space box X
    Box target;                          // continuous target region
    std::optional<CellSet> target_cells; // alternative: grid-aligned target
    int subsamples = 1;                  // start points per axis within a cell
};

struct SimOutcome {
    SimStatus status = SimStatus::Timeout;
    double tau = 0.0;  // absorption time; +inf unless Absorbed
    bool blew_up = false;
};

SimOutcome simulate_point(const ParamField& field, std::span<const double> b,
                          std::span<const double> x0, const SimConfig& config,
                          const Grid* grid = nullptr);

struct OracleFields {
    CellField indicator;  // fraction of cell start points absorbed
    CellField tau;        // mean absorption time of absorbed starts; +inf if none
};

// Runs the simulation from each cell (center, or a subsample lattice) and
// reduces to per-cell reference fields.
OracleFields oracle_fields(const Grid& grid, const ParamField& field,
                           std::span<const double> b, const SimConfig& config);

}  // namespace doaopt
