#include "doaopt/sens.hpp"

#include <cmath>

namespace doaopt {

AdjointWorkspace::AdjointWorkspace(const Generator& generator, CellSet target)
    : problem_(generator, std::move(target)), fact_(problem_) {}

const CellField& AdjointWorkspace::probabilities() {
    if (!p_) p_ = absorption_probabilities(fact_);
    return *p_;
}

const CellField& AdjointWorkspace::times() {
    if (!t_) t_ = termination_times(fact_);
    return *t_;
}

void AdjointWorkspace::check_direction(
    const Eigen::SparseMatrix<double>& delta) const {
    const long n = problem_.generator().size();
    if (delta.rows() != n || delta.cols() != n) {
        throw InvalidArgument(
            "generator direction does not match the workspace dimension");
    }
}

Eigen::VectorXd AdjointWorkspace::dp_direction(
    const Eigen::SparseMatrix<double>& delta) {
    check_direction(delta);
    // Ghat^T dp = -(delta^T p)|non-target; the target rows of p (== 1)
    // fold the target-inflow derivative into the same product.
    const Eigen::VectorXd rhs =
        -problem_.restrict(delta.transpose() * probabilities().values);
    return problem_.extend(fact_.solve(rhs), 0.0);
}

Eigen::VectorXd AdjointWorkspace::dt_direction(
    const Eigen::SparseMatrix<double>& delta) {
    check_direction(delta);
    const Eigen::VectorXd rhs =
        -problem_.restrict(delta.transpose() * times().values);
    return problem_.extend(fact_.solve(rhs), 0.0);
}

Eigen::VectorXd AdjointWorkspace::adjoint_from_mass(
    const Eigen::VectorXd& mass) {
    if (mass.size() != problem_.generator().size()) {
        throw InvalidArgument("mass vector has wrong length");
    }
    const Eigen::VectorXd w = fact_.solve_transposed(problem_.restrict(mass));
    return problem_.extend(w, 0.0);
}

namespace {

struct GeneratorAt {
    Generator generator;
    int assemblies = 0;
};

GeneratorAt generator_at(const Grid& grid, const ParamField& field,
                         std::span<const double> b, const QuadratureRule& quad,
                         const GeneratorBundle* bundle) {
    GeneratorAt out;
    if (bundle) {
        out.generator = combine_affine(*bundle, b);
    } else {
        out.generator = assemble(grid, field, b, quad);
        out.assemblies = 1;
    }
    return out;
}

Eigen::SparseMatrix<double> direction_at(const Grid& grid,
                                         const ParamField& field,
                                         std::span<const double> b, int l,
                                         const QuadratureRule& quad,
                                         const GeneratorBundle* bundle,
                                         bool* deadband, int* assemblies) {
    if (bundle) {
        bool hit = false;
        Eigen::SparseMatrix<double> delta =
            combine_affine_directional(*bundle, b, l, &hit);
        if (hit && deadband) *deadband = true;
        return delta;
    }
    ++*assemblies;
    return assemble_directional(grid, field, b, l, quad);
}

double squared_norm(std::span<const double> b) {
    double s = 0.0;
    for (double v : b) s += v * v;
    return s;
}

}  // namespace

DoaEvaluation evaluate_doa_objective(const Grid& grid, const ParamField& field,
                                     std::span<const double> b,
                                     const CellSet& target, double alpha,
                                     const QuadratureRule& quad,
                                     const GeneratorBundle* bundle,
                                     const CellSet* mass_region) {
    const int r = field.param_count();
    auto [generator, assemblies] = generator_at(grid, field, b, quad, bundle);
    AdjointWorkspace ws(generator, target);

    DoaEvaluation out;
    out.assemblies = assemblies;
    out.p = ws.probabilities();
    const double mass = grid.cell_volume();
    Eigen::VectorXd masses;
    if (mass_region) {
        masses = Eigen::VectorXd::Zero(generator.size());
        for (long cell : mass_region->cells) masses[cell] = mass;
    } else {
        masses = Eigen::VectorXd::Constant(generator.size(), mass);
    }
    out.f = masses.dot(out.p.values) - alpha * squared_norm(b);

    // One adjoint solve Ghat w = m, then each gradient entry is a sparse
    // product against the corresponding generator direction.
    const Eigen::VectorXd w = ws.adjoint_from_mass(masses);
    out.gradient.resize(r);
    for (int l = 0; l < r; ++l) {
        const Eigen::SparseMatrix<double> delta = direction_at(
            grid, field, b, l, quad, bundle, &out.deadband, &out.assemblies);
        out.gradient[l] = -out.p.values.dot(delta * w) - 2.0 * alpha * b[l];
    }
    return out;
}

TimeEvaluation evaluate_time_objective(const Grid& grid, const ParamField& field,
                                       std::span<const double> b,
                                       const CellSet& target, const CellSet& d0,
                                       double alpha, const QuadratureRule& quad,
                                       const GeneratorBundle* bundle) {
    if (d0.empty()) throw InvalidArgument("d0 set must not be empty");
    const int r = field.param_count();
    auto [generator, assemblies] = generator_at(grid, field, b, quad, bundle);
    AdjointWorkspace ws(generator, target);

    TimeEvaluation out;
    out.assemblies = assemblies;
    out.p = ws.probabilities();
    out.t = ws.times();

    const double mass = grid.cell_volume();
    Eigen::VectorXd d0_mass = Eigen::VectorXd::Zero(generator.size());
    for (long cell : d0.cells) d0_mass[cell] = mass;

    out.f = d0_mass.dot(out.t.values) + alpha * squared_norm(b);
    out.g = d0_mass.dot(out.p.values);

    // Shared adjoint: Ghat w = m restricted to d0. The same w yields both
    // the objective and the coverage gradients.
    const Eigen::VectorXd w = ws.adjoint_from_mass(d0_mass);
    out.gradient.resize(r);
    out.coverage_gradient.resize(r);
    for (int l = 0; l < r; ++l) {
        const Eigen::SparseMatrix<double> delta = direction_at(
            grid, field, b, l, quad, bundle, &out.deadband, &out.assemblies);
        const Eigen::VectorXd dw = delta * w;
        out.gradient[l] = -out.t.values.dot(dw) + 2.0 * alpha * b[l];
        out.coverage_gradient[l] = -out.p.values.dot(dw);
    }
    return out;
}

Eigen::VectorXd grad_doa_objective(const Grid& grid, const ParamField& field,
                                   std::span<const double> b,
                                   const CellSet& target, double alpha,
                                   const QuadratureRule& quad) {
    return evaluate_doa_objective(grid, field, b, target, alpha, quad).gradient;
}

TimeGradients grad_time_objective(const Grid& grid, const ParamField& field,
                                  std::span<const double> b,
                                  const CellSet& target, const CellSet& d0,
                                  double alpha, const QuadratureRule& quad) {
    TimeEvaluation ev =
        evaluate_time_objective(grid, field, b, target, d0, alpha, quad);
    return TimeGradients{std::move(ev.gradient), std::move(ev.coverage_gradient)};
}

}  // namespace doaopt
