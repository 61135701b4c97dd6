#include <cmath>
#include <random>
#include <vector>

#include "doaopt/field.hpp"
#include "doaopt/generator.hpp"
#include "doaopt/solve.hpp"
#include "doctest.h"
#include "support/mjp_ref.hpp"

using namespace doaopt;

namespace {

Generator make_generator(const Grid& grid,
                         const std::vector<Eigen::Triplet<double>>& entries,
                         const std::vector<double>& leak) {
    Generator gen;
    gen.grid = grid;
    gen.matrix.resize(grid.cell_count(), grid.cell_count());
    gen.matrix.setFromTriplets(entries.begin(), entries.end());
    gen.matrix.makeCompressed();
    gen.leak = Eigen::Map<const Eigen::VectorXd>(leak.data(), leak.size());
    return gen;
}

// Two-state chain: cell 0 feeds cell 1 at rate 2, cell 1 leaks at rate 2.
Generator two_cell_chain() {
    const Grid grid = build_grid(Box{{0.0}, {1.0}}, {2});
    return make_generator(grid,
                          {{0, 0, -2.0}, {1, 0, 2.0}, {1, 1, -2.0}},
                          {0.0, 2.0});
}

// Three-state chain: 0 -> 1 at rate 1 with leak 1; 1 -> 2 at rate 2;
// state 2 is the absorbing target.
Generator three_state_chain() {
    const Grid grid = build_grid(Box{{0.0}, {1.0}}, {3});
    return make_generator(
        grid, {{0, 0, -2.0}, {1, 0, 1.0}, {1, 1, -2.0}, {2, 1, 2.0}},
        {1.0, 0.0, 0.0});
}

// Random leaky generator on n states with every state connected toward
// the target so all quantities stay finite.
Generator random_chain(const Grid& grid, std::mt19937& rng) {
    const long n = grid.cell_count();
    std::uniform_real_distribution<double> rate(0.1, 2.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<Eigen::Triplet<double>> entries;
    std::vector<double> leak(n, 0.0);
    for (long j = 0; j + 1 < n; ++j) {
        double total = 0.0;
        const double forward = rate(rng);
        entries.emplace_back(j + 1, j, forward);
        total += forward;
        if (j > 0 && coin(rng) < 0.5) {
            const double back = rate(rng);
            entries.emplace_back(j - 1, j, back);
            total += back;
        }
        if (coin(rng) < 0.5) {
            leak[j] = rate(rng);
            total += leak[j];
        }
        entries.emplace_back(j, j, -total);
    }
    return make_generator(grid, entries, leak);
}

}  // namespace

TEST_CASE("two-cell chain absorption quantities are exact") {
    const Generator gen = two_cell_chain();
    const CellSet target{{1}, "T"};
    const AbsorptionProblem problem(gen, target);

    const CellField p = absorption_probabilities(problem);
    CHECK(p.tag == FieldTag::Probability);
    CHECK(std::abs(p.values[0] - 1.0) <= 1e-12);
    CHECK(p.values[1] == 1.0);

    const CellField t = termination_times(problem);
    CHECK(t.tag == FieldTag::Time);
    CHECK(std::abs(t.values[0] - 0.5) <= 1e-12);
    CHECK(t.values[1] == 0.0);

    const CellField h = kruzkov_values(problem);
    CHECK(h.tag == FieldTag::Kruzkov);
    CHECK(std::abs(h.values[0] - 2.0 / 3.0) <= 1e-12);
    CHECK(h.values[1] == 1.0);
}

TEST_CASE("three-state chain with leak") {
    const Generator gen = three_state_chain();
    const CellSet target{{2}, "T"};
    const AbsorptionProblem problem(gen, target);

    // From state 0 the walk moves on at rate 1 and leaks at rate 1, so it
    // reaches state 1 with probability 1/2 and then always absorbs.
    const CellField p = absorption_probabilities(problem);
    CHECK(std::abs(p.values[0] - 0.5) <= 1e-12);
    CHECK(std::abs(p.values[1] - 1.0) <= 1e-12);

    // Termination times: mean dwell 1/2 everywhere off target; state 0
    // terminates in 1/2 + 1/2 * 1/2 expected time.
    const CellField t = termination_times(problem);
    CHECK(std::abs(t.values[0] - 0.75) <= 1e-12);
    CHECK(std::abs(t.values[1] - 0.5) <= 1e-12);
    CHECK(t.values[2] == 0.0);

    // Conditioned on absorption the leak branch disappears: one dwell at
    // rate 2, then the state-1 time.
    const CellField astar = conditioned_times(problem, p, 1e-9);
    CHECK(astar.tag == FieldTag::CondTime);
    CHECK(std::abs(astar.values[0] - 1.0) <= 1e-12);
    CHECK(std::abs(astar.values[1] - 0.5) <= 1e-12);
    CHECK(astar.values[2] == 0.0);

    // Kruzkov values: (I - Ghat^T) h = q gives h = (2/9, 2/3).
    const CellField h = kruzkov_values(problem);
    CHECK(std::abs(h.values[0] - 2.0 / 9.0) <= 1e-12);
    CHECK(std::abs(h.values[1] - 2.0 / 3.0) <= 1e-12);
    CHECK(h.values[2] == 1.0);
}

TEST_CASE("absorption times are infinite where absorption is uncertain") {
    const Generator gen = three_state_chain();
    const CellSet target{{2}, "T"};
    const AbsorptionProblem problem(gen, target);
    const CellField p = absorption_probabilities(problem);
    const CellField a = absorption_times(problem, p, 1e-6);
    CHECK(a.tag == FieldTag::Time);
    CHECK(std::isinf(a.values[0]));
    CHECK(std::abs(a.values[1] - 0.5) <= 1e-12);
    CHECK(a.values[2] == 0.0);

    // A huge epsilon admits every cell, reproducing the termination times.
    const CellField relaxed = absorption_times(problem, p, 0.75);
    CHECK(std::abs(relaxed.values[0] - 0.75) <= 1e-12);
}

TEST_CASE("conditioned times flag ill-conditioned cells") {
    // Strong leak makes absorption from state 0 nearly impossible.
    const Grid grid = build_grid(Box{{0.0}, {1.0}}, {2});
    const Generator gen = make_generator(
        grid, {{0, 0, -1e9}, {1, 0, 1.0}}, {1e9 - 1.0, 0.0});
    const CellSet target{{1}, "T"};
    const AbsorptionProblem problem(gen, target);
    const CellField p = absorption_probabilities(problem);
    REQUIRE(p.values[0] < 1e-8);

    bool ill = false;
    const CellField astar = conditioned_times(problem, p, 1e-12, &ill);
    CHECK(ill);
    CHECK(std::isfinite(astar.values[0]));

    // With a floor above p the cell leaves Y* and is reported as infinite.
    ill = false;
    const CellField outside = conditioned_times(problem, p, 1e-6, &ill);
    CHECK_FALSE(ill);
    CHECK(std::isinf(outside.values[0]));
}

TEST_CASE("problem restriction bookkeeping") {
    const Generator gen = three_state_chain();
    const CellSet target{{1}, "T"};
    const AbsorptionProblem problem(gen, target);
    CHECK(problem.interior_size() == 2);
    CHECK(problem.interior() == std::vector<long>{0, 2});
    CHECK(problem.restricted_index(0) == 0);
    CHECK(problem.restricted_index(1) == -1);
    CHECK(problem.restricted_index(2) == 1);

    // q_i collects the rates from interior cell i into the target.
    CHECK(problem.target_inflow()[0] == doctest::Approx(1.0));
    CHECK(problem.target_inflow()[1] == doctest::Approx(0.0));

    Eigen::VectorXd restricted(2);
    restricted << 5.0, 7.0;
    const Eigen::VectorXd full = problem.extend(restricted, -1.0);
    CHECK(full[0] == 5.0);
    CHECK(full[1] == -1.0);
    CHECK(full[2] == 7.0);
    const Eigen::VectorXd back = problem.restrict(full);
    CHECK(back[0] == 5.0);
    CHECK(back[1] == 7.0);
}

TEST_CASE("empty and out-of-range targets are rejected, full targets are trivial") {
    const Generator gen = two_cell_chain();
    CHECK_THROWS_AS(AbsorptionProblem(gen, CellSet{{}, "T"}), InvalidArgument);
    CHECK_THROWS_AS(AbsorptionProblem(gen, CellSet{{5}, "T"}), InvalidArgument);

    // When every cell is a target the interior is empty and the absorption
    // quantities are immediate: p is one and t is zero everywhere.
    const AbsorptionProblem full(gen, CellSet{{0, 1}, "T"});
    CHECK(full.interior_size() == 0);
    const CellField p = absorption_probabilities(full);
    const CellField t = termination_times(full);
    for (double v : p.values) CHECK(v == 1.0);
    for (double v : t.values) CHECK(v == 0.0);
}

TEST_CASE("non-transient interiors raise a solver error") {
    // No rates at all: the restricted system is singular.
    const Grid grid = build_grid(Box{{0.0}, {1.0}}, {2});
    const Generator gen = make_generator(grid, {}, {0.0, 0.0});
    const AbsorptionProblem problem(gen, CellSet{{1}, "T"});
    CHECK_THROWS_AS(absorption_probabilities(problem), SingularSystem);
}

TEST_CASE("factorization solves forward and transposed systems") {
    std::mt19937 rng(31);
    const Grid grid = build_grid(Box{{0.0}, {1.0}}, {8});
    const Generator gen = random_chain(grid, rng);
    const CellSet target{{7}, "T"};
    const AbsorptionProblem problem(gen, target);
    const FactorizedRestriction fact(problem);

    const long m = problem.interior_size();
    Eigen::VectorXd rhs(m);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (long i = 0; i < m; ++i) rhs[i] = u(rng);

    const Eigen::VectorXd x = fact.solve(rhs);
    CHECK((problem.restricted_transpose() * x - rhs).norm() <= 1e-10 * rhs.norm());

    const Eigen::VectorXd y = fact.solve_transposed(rhs);
    CHECK((problem.restricted_transpose().transpose() * y - rhs).norm() <=
          1e-10 * rhs.norm());
}

TEST_CASE("probabilities are clipped into the unit interval") {
    std::mt19937 rng(67);
    for (int instance = 0; instance < 8; ++instance) {
        const Grid grid = build_grid(Box{{0.0}, {1.0}}, {6});
        const Generator gen = random_chain(grid, rng);
        const AbsorptionProblem problem(gen, CellSet{{5}, "T"});
        const CellField p = absorption_probabilities(problem);
        for (long i = 0; i < p.values.size(); ++i) {
            CHECK(p.values[i] >= 0.0);
            CHECK(p.values[i] <= 1.0);
        }
    }
}

TEST_CASE("linear solves agree with Monte-Carlo simulation") {
    std::mt19937 rng(90210);
    for (int instance = 0; instance < 6; ++instance) {
        const int n = 5 + static_cast<int>(rng() % 6);
        const Grid grid = build_grid(Box{{0.0}, {1.0}}, {n});
        const Generator gen = random_chain(grid, rng);
        const CellSet target{{n - 1}, "T"};
        const AbsorptionProblem problem(gen, target);
        const CellField p = absorption_probabilities(problem);
        const CellField t = termination_times(problem);

        const auto chain = mjp_ref::make_chain(gen.matrix, gen.leak,
                                               target.cells);
        const long start = static_cast<long>(rng() % (n - 1));
        const auto est = mjp_ref::estimate(chain, start, 100000, rng);
        CHECK(std::abs(est.p - p.values[start]) <= 3.0 * est.p_se + 1e-9);
        CHECK(std::abs(est.t - t.values[start]) <= 3.0 * est.t_se + 1e-9);
    }
}
