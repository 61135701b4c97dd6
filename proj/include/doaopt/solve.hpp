#pragma once

#include <Eigen/SparseCore>
#include <memory>

#include "doaopt/generator.hpp"
#include "doaopt/grid.hpp"

namespace doaopt {

enum class FieldTag {
    Probability,  // absorption probability p
    Time,         // expected termination time t
    Kruzkov,      // exponentially discounted absorption value h
    CondTime,     // expected absorption time conditioned on absorbing
    Indicator,    // {0, 1}-valued reference field
};

const char* to_string(FieldTag tag);
FieldTag field_tag_from_string(const std::string& name);

// One scalar per grid cell. +inf marks cells where the quantity is
// undefined (never-absorbing cells in CondTime / absorption-time fields).
struct CellField {
    Grid grid;
    FieldTag tag = FieldTag::Probability;
    Eigen::VectorXd values;
};

// Generator with a non-empty absorbing target set. Precomputes the
// restriction to non-target cells: interior index list, the transposed
// restricted matrix A = Ghat^T, and the target inflow rates
// q_i = sum_{j in target} G_{ji} for non-target i.
class AbsorptionProblem {
public:
    AbsorptionProblem(const Generator& generator, CellSet target);

    const Generator& generator() const { return *generator_; }
    const CellSet& target() const { return target_; }
    const std::vector<long>& interior() const { return interior_; }
    long interior_size() const { return static_cast<long>(interior_.size()); }

    // Position of a cell in the interior ordering, or -1 for target cells.
    long restricted_index(long cell) const { return positions_[cell]; }

    const Eigen::SparseMatrix<double>& restricted_transpose() const { return a_; }
    const Eigen::VectorXd& target_inflow() const { return q_; }

    // Scatter a restricted vector into a full-length vector that is
    // `target_value` on target cells.
    Eigen::VectorXd extend(const Eigen::VectorXd& restricted,
                           double target_value) const;
    // Gather a full-length vector onto the interior cells.
    Eigen::VectorXd restrict(const Eigen::VectorXd& full) const;

private:
    const Generator* generator_;
    CellSet target_;
    std::vector<long> interior_;
    std::vector<long> positions_;
    Eigen::SparseMatrix<double> a_;
    Eigen::VectorXd q_;
};

// Sparse LU factorization of A = Ghat^T, reusable for every linear solve
// at a fixed parameter vector (p, t, directional derivatives, and the
// adjoint systems Ghat w = rhs via the transposed solve).
class FactorizedRestriction {
public:
    explicit FactorizedRestriction(const AbsorptionProblem& problem);
    ~FactorizedRestriction();
    FactorizedRestriction(FactorizedRestriction&&) noexcept;
    FactorizedRestriction& operator=(FactorizedRestriction&&) noexcept;

    const AbsorptionProblem& problem() const { return *problem_; }

    // Solves A x = rhs; throws ResidualFailure when the relative residual
    // exceeds 1e-10.
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
    // Solves A^T x = rhs (= Ghat x = rhs).
    Eigen::VectorXd solve_transposed(const Eigen::VectorXd& rhs) const;

private:
    const AbsorptionProblem* problem_;
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// p: Ghat^T p_hat = -q on non-target cells, p = 1 on the target. Values
// are clipped into [0, 1] after the solve.
CellField absorption_probabilities(const FactorizedRestriction& f);
CellField absorption_probabilities(const AbsorptionProblem& problem);

// t: Ghat^T t_hat = -1 on non-target cells, t = 0 on the target.
CellField termination_times(const FactorizedRestriction& f);
CellField termination_times(const AbsorptionProblem& problem);

// a: equals t where p >= 1 - epsilon, +inf on other non-target cells,
// 0 on the target.
CellField absorption_times(const FactorizedRestriction& f, const CellField& p,
                           double epsilon);
CellField absorption_times(const AbsorptionProblem& problem, const CellField& p,
                           double epsilon);

// h: (I - Ghat^T) h_hat = q, h = 1 on the target; -log h approximates the
// absorption time on almost-surely absorbed cells.
CellField kruzkov_values(const AbsorptionProblem& problem);

// a*: u = a* p solves the restriction of Ghat^T u = -p to
// Y* = {p >= floor} minus the target; a* = u / p there, 0 on the target,
// +inf outside Y*. *ill_conditioned reports min p on Y* below 1e-8.
CellField conditioned_times(const AbsorptionProblem& problem, const CellField& p,
                            double floor, bool* ill_conditioned = nullptr);

}  // namespace doaopt
