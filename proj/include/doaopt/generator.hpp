#pragma once

#include <Eigen/SparseCore>
#include <vector>

#include "doaopt/field.hpp"
#include "doaopt/grid.hpp"

namespace doaopt {

// Tensor Gauss-Legendre rule used on (d-1)-dimensional faces. nodes and
// weights are the 1D data on [-1, 1]; faces tensorize them over the
// non-collapsed axes (d == 1 uses the single face point with weight 1).
struct QuadratureRule {
    int points = 2;
    std::vector<double> nodes;
    std::vector<double> weights;

    static QuadratureRule gauss_legendre(int points);
};

// Upwind finite-volume discretization of the flow. matrix is n x n,
// column-compressed; column j holds the outflow rates of cell j into its
// neighbors plus the diagonal -total outflow / volume. leak[j] is the
// rate of mass lost through the domain boundary from cell j, so every
// column sum equals -leak[j].
struct Generator {
    Grid grid;
    Eigen::SparseMatrix<double> matrix;
    Eigen::VectorXd leak;

    long size() const { return matrix.rows(); }
    long nnz() const { return matrix.nonZeros(); }
};

// Assembles the generator for v(.; b) with face fluxes integrated by the
// given rule. Throws NonFiniteField if the field produces NaN/inf at a
// quadrature node.
Generator assemble(const Grid& grid, const ParamField& field,
                   std::span<const double> b, const QuadratureRule& quad);

// Generator of a fixed velocity field (no parameters).
Generator assemble_velocity(const Grid& grid, const VelocityFn& velocity,
                            const QuadratureRule& quad, bool thread_safe = true);

// Directional derivative dG/db_l at b: same face loop with integrand
// (dv/db_l . n) restricted to the active set {v . n >= 0} (nodes with
// v . n == 0 count as active).
Eigen::SparseMatrix<double> assemble_directional(const Grid& grid,
                                                 const ParamField& field,
                                                 std::span<const double> b,
                                                 int l,
                                                 const QuadratureRule& quad);

// Precomputed generators for an affine-in-b field: base = G(v_base),
// plus[l] = G(v_c(.; e_l)), minus[l] = G(-v_c(.; e_l)). 2r + 1 assemblies.
struct GeneratorBundle {
    Generator base;
    std::vector<Generator> plus;
    std::vector<Generator> minus;

    int param_count() const { return static_cast<int>(plus.size()); }
    int assembly_count() const { return 2 * param_count() + 1; }
};

// Throws NotAffine when the field has no affine decomposition.
GeneratorBundle assemble_bundle(const Grid& grid, const ParamField& field,
                                const QuadratureRule& quad);

// G(b) = base + sum_l |b_l| * (b_l >= 0 ? plus[l] : minus[l]); a conical
// combination, so the result is again a generator.
Generator combine_affine(const GeneratorBundle& bundle,
                         std::span<const double> b);

// dG/db_l along the affine path: sign(b_l) * (b_l > 0 ? plus : minus).
// Inside the deadband |b_l| <= 1e-12 the one-sided choice plus[l] is
// returned and *deadband is set.
Eigen::SparseMatrix<double> combine_affine_directional(
    const GeneratorBundle& bundle, std::span<const double> b, int l,
    bool* deadband = nullptr);

inline constexpr double kAffineDeadband = 1e-12;

}  // namespace doaopt
