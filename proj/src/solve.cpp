#include "doaopt/solve.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>

namespace doaopt {

namespace {
constexpr double kResidualTol = 1e-10;
constexpr double kInf = std::numeric_limits<double>::infinity();
}

const char* to_string(FieldTag tag) {
    switch (tag) {
        case FieldTag::Probability: return "PROBABILITY";
        case FieldTag::Time: return "TIME";
        case FieldTag::Kruzkov: return "KRUZKOV";
        case FieldTag::CondTime: return "CONDTIME";
        case FieldTag::Indicator: return "INDICATOR";
    }
    throw InvalidArgument("unknown field tag");
}

FieldTag field_tag_from_string(const std::string& name) {
    if (name == "PROBABILITY") return FieldTag::Probability;
    if (name == "TIME") return FieldTag::Time;
    if (name == "KRUZKOV") return FieldTag::Kruzkov;
    if (name == "CONDTIME") return FieldTag::CondTime;
    if (name == "INDICATOR") return FieldTag::Indicator;
    throw InvalidArgument("unknown field tag: " + name);
}

AbsorptionProblem::AbsorptionProblem(const Generator& generator, CellSet target)
    : generator_(&generator), target_(std::move(target)) {
    const long n = generator.size();
    if (target_.empty()) {
        throw InvalidArgument("target set must not be empty");
    }
    if (!std::is_sorted(target_.cells.begin(), target_.cells.end()) ||
        std::adjacent_find(target_.cells.begin(), target_.cells.end()) !=
            target_.cells.end()) {
        throw InvalidArgument("target set must be sorted and duplicate-free");
    }
    if (target_.cells.front() < 0 || target_.cells.back() >= n) {
        throw InvalidArgument("target set contains out-of-range cells");
    }

    positions_.assign(n, -1);
    interior_.reserve(n - target_.size());
    auto t = target_.cells.begin();
    for (long cell = 0; cell < n; ++cell) {
        if (t != target_.cells.end() && *t == cell) {
            ++t;
            continue;
        }
        positions_[cell] = static_cast<long>(interior_.size());
        interior_.push_back(cell);
    }

    const long m = static_cast<long>(interior_.size());
    q_ = Eigen::VectorXd::Zero(m);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(generator.matrix.nonZeros());
    const auto& g = generator.matrix;
    for (long col = 0; col < n; ++col) {
        const long jc = positions_[col];
        if (jc < 0) continue;  // columns of target cells are dropped
        for (Eigen::SparseMatrix<double>::InnerIterator it(g, col); it; ++it) {
            const long ir = positions_[it.row()];
            if (ir < 0) {
                q_[jc] += it.value();  // inflow into the target
            } else {
                // A = Ghat^T: entry G_{row, col} lands at (col, row).
                trips.emplace_back(static_cast<int>(jc), static_cast<int>(ir),
                                   it.value());
            }
        }
    }
    a_.resize(m, m);
    a_.setFromTriplets(trips.begin(), trips.end());
    a_.makeCompressed();
}

Eigen::VectorXd AbsorptionProblem::extend(const Eigen::VectorXd& restricted,
                                          double target_value) const {
    if (restricted.size() != interior_size()) {
        throw InvalidArgument("restricted vector has wrong length");
    }
    Eigen::VectorXd full =
        Eigen::VectorXd::Constant(generator_->size(), target_value);
    for (long k = 0; k < interior_size(); ++k) full[interior_[k]] = restricted[k];
    return full;
}

Eigen::VectorXd AbsorptionProblem::restrict(const Eigen::VectorXd& full) const {
    if (full.size() != generator_->size()) {
        throw InvalidArgument("full vector has wrong length");
    }
    Eigen::VectorXd out(interior_size());
    for (long k = 0; k < interior_size(); ++k) out[k] = full[interior_[k]];
    return out;
}

struct FactorizedRestriction::Impl {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
};

FactorizedRestriction::FactorizedRestriction(const AbsorptionProblem& problem)
    : problem_(&problem), impl_(std::make_unique<Impl>()) {
    if (problem.interior_size() == 0) return;  // nothing to factor
    impl_->lu.compute(problem.restricted_transpose());
    if (impl_->lu.info() != Eigen::Success) {
        throw SingularSystem(
            "restricted generator could not be factorized; non-target cells "
            "are not transient");
    }
}

FactorizedRestriction::~FactorizedRestriction() = default;
FactorizedRestriction::FactorizedRestriction(FactorizedRestriction&&) noexcept =
    default;
FactorizedRestriction& FactorizedRestriction::operator=(
    FactorizedRestriction&&) noexcept = default;

namespace {

void check_solution(const Eigen::SparseMatrix<double>& a,
                    const Eigen::VectorXd& x, const Eigen::VectorXd& rhs) {
    if (!x.allFinite()) {
        throw SingularSystem("linear solve produced non-finite values");
    }
    const double scale = std::max(rhs.lpNorm<Eigen::Infinity>(),
                                  x.lpNorm<Eigen::Infinity>());
    const double residual = (a * x - rhs).lpNorm<Eigen::Infinity>();
    if (residual > kResidualTol * std::max(scale, 1e-300)) {
        throw ResidualFailure("linear solve residual too large");
    }
}

}  // namespace

Eigen::VectorXd FactorizedRestriction::solve(const Eigen::VectorXd& rhs) const {
    if (rhs.size() != problem_->interior_size()) {
        throw InvalidArgument("rhs has wrong length");
    }
    if (rhs.size() == 0) return rhs;
    Eigen::VectorXd x = impl_->lu.solve(rhs);
    check_solution(problem_->restricted_transpose(), x, rhs);
    return x;
}

Eigen::VectorXd FactorizedRestriction::solve_transposed(
    const Eigen::VectorXd& rhs) const {
    if (rhs.size() != problem_->interior_size()) {
        throw InvalidArgument("rhs has wrong length");
    }
    if (rhs.size() == 0) return rhs;
    Eigen::VectorXd x = impl_->lu.transpose().solve(rhs);
    if (!x.allFinite()) {
        throw SingularSystem("linear solve produced non-finite values");
    }
    const Eigen::VectorXd residual =
        problem_->restricted_transpose().transpose() * x - rhs;
    const double scale = std::max(rhs.lpNorm<Eigen::Infinity>(),
                                  x.lpNorm<Eigen::Infinity>());
    if (residual.lpNorm<Eigen::Infinity>() >
        kResidualTol * std::max(scale, 1e-300)) {
        throw ResidualFailure("transposed linear solve residual too large");
    }
    return x;
}

CellField absorption_probabilities(const FactorizedRestriction& f) {
    const AbsorptionProblem& problem = f.problem();
    const Eigen::VectorXd p_hat = f.solve(-problem.target_inflow());
    CellField field;
    field.grid = problem.generator().grid;
    field.tag = FieldTag::Probability;
    field.values = problem.extend(p_hat, 1.0);
    for (long i = 0; i < field.values.size(); ++i) {
        field.values[i] = std::clamp(field.values[i], 0.0, 1.0);
    }
    return field;
}

CellField absorption_probabilities(const AbsorptionProblem& problem) {
    return absorption_probabilities(FactorizedRestriction(problem));
}

CellField termination_times(const FactorizedRestriction& f) {
    const AbsorptionProblem& problem = f.problem();
    const Eigen::VectorXd rhs =
        Eigen::VectorXd::Constant(problem.interior_size(), -1.0);
    const Eigen::VectorXd t_hat = f.solve(rhs);
    CellField field;
    field.grid = problem.generator().grid;
    field.tag = FieldTag::Time;
    field.values = problem.extend(t_hat, 0.0);
    for (long i = 0; i < field.values.size(); ++i) {
        field.values[i] = std::max(field.values[i], 0.0);
    }
    return field;
}

CellField termination_times(const AbsorptionProblem& problem) {
    return termination_times(FactorizedRestriction(problem));
}

CellField absorption_times(const FactorizedRestriction& f, const CellField& p,
                           double epsilon) {
    const AbsorptionProblem& problem = f.problem();
    if (p.values.size() != problem.generator().size()) {
        throw InvalidArgument("probability field has wrong length");
    }
    if (!(epsilon >= 0.0)) {
        throw InvalidArgument("epsilon must be >= 0");
    }
    CellField field = termination_times(f);
    field.tag = FieldTag::Time;
    for (long cell : problem.interior()) {
        if (!(p.values[cell] >= 1.0 - epsilon)) field.values[cell] = kInf;
    }
    return field;
}

CellField absorption_times(const AbsorptionProblem& problem, const CellField& p,
                           double epsilon) {
    return absorption_times(FactorizedRestriction(problem), p, epsilon);
}

CellField kruzkov_values(const AbsorptionProblem& problem) {
    const long m = problem.interior_size();
    Eigen::SparseMatrix<double> shifted(m, m);
    shifted.setIdentity();
    shifted = (shifted - problem.restricted_transpose()).eval();
    shifted.makeCompressed();

    Eigen::VectorXd h_hat;
    if (m > 0) {
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(shifted);
        if (lu.info() != Eigen::Success) {
            throw SingularSystem("discounted system could not be factorized");
        }
        h_hat = lu.solve(problem.target_inflow());
        if (!h_hat.allFinite()) {
            throw SingularSystem("discounted solve produced non-finite values");
        }
    } else {
        h_hat.resize(0);
    }

    CellField field;
    field.grid = problem.generator().grid;
    field.tag = FieldTag::Kruzkov;
    field.values = problem.extend(h_hat, 1.0);
    for (long i = 0; i < field.values.size(); ++i) {
        field.values[i] = std::clamp(field.values[i], 0.0, 1.0);
    }
    return field;
}

CellField conditioned_times(const AbsorptionProblem& problem, const CellField& p,
                            double floor, bool* ill_conditioned) {
    const Generator& gen = problem.generator();
    if (p.values.size() != gen.size()) {
        throw InvalidArgument("probability field has wrong length");
    }
    if (!(floor > 0.0)) {
        throw InvalidArgument("probability floor must be positive");
    }
    if (ill_conditioned) *ill_conditioned = false;

    // Reliable subset Y* minus the target, in cell order.
    const long n = gen.size();
    std::vector<long> live;
    std::vector<long> positions(n, -1);
    double min_p = kInf;
    for (long cell : problem.interior()) {
        if (p.values[cell] >= floor) {
            positions[cell] = static_cast<long>(live.size());
            live.push_back(cell);
            min_p = std::min(min_p, p.values[cell]);
        }
    }
    if (ill_conditioned && !live.empty() && min_p < 1e-8) *ill_conditioned = true;

    CellField field;
    field.grid = gen.grid;
    field.tag = FieldTag::CondTime;
    field.values = Eigen::VectorXd::Constant(n, kInf);
    for (long cell : problem.target().cells) field.values[cell] = 0.0;
    if (live.empty()) return field;

    const long m = static_cast<long>(live.size());
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd rhs(m);
    for (long k = 0; k < m; ++k) rhs[k] = -p.values[live[k]];
    for (long col = 0; col < n; ++col) {
        const long jc = positions[col];
        if (jc < 0) continue;
        for (Eigen::SparseMatrix<double>::InnerIterator it(gen.matrix, col); it;
             ++it) {
            const long ir = positions[it.row()];
            if (ir >= 0) {
                trips.emplace_back(static_cast<int>(jc), static_cast<int>(ir),
                                   it.value());
            }
        }
    }
    Eigen::SparseMatrix<double> a(m, m);
    a.setFromTriplets(trips.begin(), trips.end());
    a.makeCompressed();

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) {
        throw SingularSystem("conditioned system could not be factorized");
    }
    const Eigen::VectorXd u = lu.solve(rhs);
    if (!u.allFinite()) {
        throw SingularSystem("conditioned solve produced non-finite values");
    }
    for (long k = 0; k < m; ++k) {
        field.values[live[k]] = std::max(u[k] / p.values[live[k]], 0.0);
    }
    return field;
}

}  // namespace doaopt
