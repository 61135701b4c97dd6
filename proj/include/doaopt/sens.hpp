#pragma once

#include <optional>

#include "doaopt/solve.hpp"

namespace doaopt {

// Derivative machinery around one factorization of Ghat^T. p and t are
// cached on first use; directional derivatives and the adjoint solves
// reuse the factorization, so evaluating an r-dimensional gradient costs
// one extra linear solve plus r sparse matrix-vector products.
class AdjointWorkspace {
public:
    AdjointWorkspace(const Generator& generator, CellSet target);

    const AbsorptionProblem& problem() const { return problem_; }
    const FactorizedRestriction& factorization() const { return fact_; }

    const CellField& probabilities();
    const CellField& times();

    // Directional derivative of the full p field along a generator
    // perturbation delta (n x n); zero on target cells.
    Eigen::VectorXd dp_direction(const Eigen::SparseMatrix<double>& delta);
    // Same for the t field.
    Eigen::VectorXd dt_direction(const Eigen::SparseMatrix<double>& delta);

    // Solves Ghat w = mass restricted to non-target cells and returns the
    // full-length extension with zeros on the target. `mass` is given on
    // all cells; target entries are ignored.
    Eigen::VectorXd adjoint_from_mass(const Eigen::VectorXd& mass);

private:
    void check_direction(const Eigen::SparseMatrix<double>& delta) const;

    AbsorptionProblem problem_;
    FactorizedRestriction fact_;
    std::optional<CellField> p_;
    std::optional<CellField> t_;
};

// One objective/gradient evaluation of the domain-of-attraction volume
// functional f(b) = sum_i m_i p_i(b) - alpha |b|^2.
struct DoaEvaluation {
    double f = 0.0;
    Eigen::VectorXd gradient;
    CellField p;
    bool deadband = false;  // affine path hit a |b_l| <= 1e-12 deadband
    int assemblies = 0;     // from-field generator assemblies performed
};

// bundle == nullptr uses the standard path (one generator assembly plus r
// directional assemblies); otherwise generators are combined from the
// bundle without touching the field. mass_region restricts the volume sum
// to a cell subset (used to bootstrap a feasible start for minimize_time);
// nullptr sums over the whole grid.
DoaEvaluation evaluate_doa_objective(const Grid& grid, const ParamField& field,
                                     std::span<const double> b,
                                     const CellSet& target, double alpha,
                                     const QuadratureRule& quad,
                                     const GeneratorBundle* bundle = nullptr,
                                     const CellSet* mass_region = nullptr);

// One evaluation of the mean-absorption-time functional
// f(b) = sum_{i in d0} m_i t_i(b) + alpha |b|^2 together with the
// coverage g(b) = sum_{i in d0} m_i p_i(b) and its gradient.
struct TimeEvaluation {
    double f = 0.0;
    Eigen::VectorXd gradient;
    double g = 0.0;
    Eigen::VectorXd coverage_gradient;
    CellField t;
    CellField p;
    bool deadband = false;
    int assemblies = 0;
};

TimeEvaluation evaluate_time_objective(const Grid& grid, const ParamField& field,
                                       std::span<const double> b,
                                       const CellSet& target, const CellSet& d0,
                                       double alpha, const QuadratureRule& quad,
                                       const GeneratorBundle* bundle = nullptr);

// Gradient-only wrappers.
Eigen::VectorXd grad_doa_objective(const Grid& grid, const ParamField& field,
                                   std::span<const double> b,
                                   const CellSet& target, double alpha,
                                   const QuadratureRule& quad);

struct TimeGradients {
    Eigen::VectorXd objective;
    Eigen::VectorXd coverage;
};

TimeGradients grad_time_objective(const Grid& grid, const ParamField& field,
                                  std::span<const double> b,
                                  const CellSet& target, const CellSet& d0,
                                  double alpha, const QuadratureRule& quad);

}  // namespace doaopt
