#pragma once

#include <algorithm>
#include <optional>

#include "doaopt/sens.hpp"

namespace doaopt {

enum class DiscretizationPath {
    Standard,  // reassemble generator and directions from the field
    Affine,    // precompute a bundle, combine per iterate
};

struct OptConfig {
    double alpha = 0.02;          // parameter-magnitude penalty weight
    double gamma = 3.0;           // step size
    std::vector<double> gamma_schedule;  // per-step sizes; last repeats
    double tol = 1e-8;            // stop when |increment| drops below
    int max_iters = 15;           // gradient steps to take
    int quadrature_points = 2;
    DiscretizationPath path = DiscretizationPath::Standard;
    bool backtracking = false;    // halve gamma until the step improves f
    double coverage_slack = 1e-3; // feasibility margin for minimize_time

    double step_size(int k) const {
        if (gamma_schedule.empty()) return gamma;
        const size_t i = std::min(static_cast<size_t>(k),
                                  gamma_schedule.size() - 1);
        return gamma_schedule[i];
    }
};

// One optimizer iterate. grad_norm is |increment| (the projected gradient
// in time mode); g and projected only apply to time mode.
struct OptRecord {
    int k = 0;
    Eigen::VectorXd b;
    double f = 0.0;
    double grad_norm = 0.0;
    double g = 0.0;  // NaN in DOA mode
    bool projected = false;
    bool deadband = false;
    double seconds = 0.0;
};

struct OptTrace {
    std::vector<OptRecord> records;
    int assemblies = 0;  // from-field generator assemblies, total
    // DOA mode: set when no starting cell outside the target was almost
    // surely absorbed (p < 1 - 1e-6 everywhere off-target).
    bool doa_precondition_warning = false;
};

struct OptResult {
    Eigen::VectorXd b;
    OptTrace trace;
    CellField p;                 // at the final iterate
    std::optional<CellField> t;  // time mode only
};

// Linear-solver failure during an optimization run; keeps the iterates
// recorded up to the failure.
struct OptInterrupted : SingularSystem {
    OptInterrupted(const std::string& message, OptTrace partial)
        : SingularSystem(message), trace(std::move(partial)) {}
    OptTrace trace;
};

// Gradient ascent on f(b) = sum_i m_i p_i(b) - alpha |b|^2. A non-null
// mass_region restricts the volume sum to that subset (feasibility
// bootstrap for minimize_time starts).
OptResult maximize_doa(const Grid& grid, const ParamField& field,
                       const CellSet& target, const OptConfig& config,
                       const Eigen::VectorXd& b0,
                       const CellSet* mass_region = nullptr);

// Projected gradient descent on f(b) = sum_{i in d0} m_i t_i(b) +
// alpha |b|^2 keeping the coverage g(b) = sum_{i in d0} m_i p_i(b) from
// decreasing. Throws ConstraintViolated when
// g(b0) < (1 - coverage_slack) * m(d0).
OptResult minimize_time(const Grid& grid, const ParamField& field,
                        const CellSet& target, const CellSet& d0,
                        const OptConfig& config, const Eigen::VectorXd& b0);

}  // namespace doaopt
