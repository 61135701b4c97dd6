#include <cmath>
#include <vector>

#include "doaopt/oracle.hpp"
#include "doctest.h"

using namespace doaopt;

namespace {

// v(x; b) = b_0 * x componentwise; b_0 = -1 contracts toward the origin.
ParamField radial_field(int dim) {
    FieldFn eval = [](std::span<const double> x, std::span<const double> b,
                      std::span<double> out) {
        for (size_t k = 0; k < out.size(); ++k) out[k] = b[0] * x[k];
    };
    FieldPartialFn partial = [](std::span<const double> x,
                                std::span<const double>, int,
                                std::span<double> out) {
        for (size_t k = 0; k < out.size(); ++k) out[k] = x[k];
    };
    return ParamField(dim, 1, std::move(eval), std::move(partial));
}

ParamField rotation_field() {
    FieldFn eval = [](std::span<const double> x, std::span<const double> b,
                      std::span<double> out) {
        out[0] = -b[0] * x[1];
        out[1] = b[0] * x[0];
    };
    FieldPartialFn partial = [](std::span<const double> x,
                                std::span<const double>, int,
                                std::span<double> out) {
        out[0] = -x[1];
        out[1] = x[0];
    };
    return ParamField(2, 1, std::move(eval), std::move(partial));
}

ParamField cubic_field() {
    FieldFn eval = [](std::span<const double> x, std::span<const double> b,
                      std::span<double> out) {
        out[0] = b[0] * x[0] * x[0] * x[0];
    };
    FieldPartialFn partial = [](std::span<const double> x,
                                std::span<const double>, int,
                                std::span<double> out) {
        out[0] = x[0] * x[0] * x[0];
    };
    return ParamField(1, 1, std::move(eval), std::move(partial));
}

// v(x; b) = b_0 (x - 0.4): starts above 0.4 drift right, below drift left.
ParamField split_field() {
    FieldFn eval = [](std::span<const double> x, std::span<const double> b,
                      std::span<double> out) {
        out[0] = b[0] * (x[0] - 0.4);
    };
    FieldPartialFn partial = [](std::span<const double> x,
                                std::span<const double>, int,
                                std::span<double> out) {
        out[0] = x[0] - 0.4;
    };
    return ParamField(1, 1, std::move(eval), std::move(partial));
}

const std::vector<double> kOne{1.0};
const std::vector<double> kMinusOne{-1.0};

}  // namespace

TEST_CASE("contraction reaches the target at the analytic crossing time") {
    const ParamField field = radial_field(2);
    SimConfig config;
    config.domain = Box{{-1.0, -1.0}, {1.0, 1.0}};
    config.target = Box{{-0.1, -0.1}, {0.1, 0.1}};
    config.step = 1e-3;
    config.t_max = 100.0;

    // x(t) = x0 e^{-t} enters max|x_i| <= 0.1 when the largest component
    // arrives: tau = log(0.8 / 0.1).
    const std::vector<double> x0{0.8, 0.3};
    const SimOutcome out = simulate_point(field, kMinusOne, x0, config);
    CHECK(out.status == SimStatus::Absorbed);
    CHECK_FALSE(out.blew_up);
    CHECK(std::abs(out.tau - std::log(8.0)) <= 1e-6);

    const std::vector<double> x1d{0.9};
    SimConfig c1 = config;
    c1.domain = Box{{-1.0}, {1.0}};
    c1.target = Box{{-0.1}, {0.1}};
    const SimOutcome out1 =
        simulate_point(radial_field(1), kMinusOne, x1d, c1);
    CHECK(std::abs(out1.tau - std::log(9.0)) <= 1e-6);
}

TEST_CASE("expansion escapes through the domain boundary") {
    const ParamField field = radial_field(1);
    SimConfig config;
    config.domain = Box{{-1.0}, {1.0}};
    config.target = Box{{-0.01}, {0.01}};
    const std::vector<double> x0{0.5};
    const SimOutcome out = simulate_point(field, kOne, x0, config);
    CHECK(out.status == SimStatus::Escaped);
    CHECK(std::isinf(out.tau));
    CHECK_FALSE(out.blew_up);
}

TEST_CASE("orbits that never resolve time out") {
    const ParamField field = rotation_field();
    SimConfig config;
    config.domain = Box{{-1.0, -1.0}, {1.0, 1.0}};
    config.target = Box{{-0.1, -0.1}, {0.1, 0.1}};
    config.t_max = 5.0;
    const std::vector<double> x0{0.5, 0.0};
    const SimOutcome out = simulate_point(field, kOne, x0, config);
    CHECK(out.status == SimStatus::Timeout);
    CHECK(std::isinf(out.tau));
}

TEST_CASE("finite-time blow-ups count as escapes and are flagged") {
    const ParamField field = cubic_field();
    SimConfig config;
    config.domain = Box{{-1e200}, {1e200}};
    config.target = Box{{-1.0}, {1.0}};
    const std::vector<double> x0{1e150};
    const SimOutcome out = simulate_point(field, kOne, x0, config);
    CHECK(out.status == SimStatus::Escaped);
    CHECK(out.blew_up);
    CHECK(std::isinf(out.tau));
}

TEST_CASE("target entry wins over domain exit on the same step") {
    const ParamField field = make_uniform_1d();
    SimConfig config;
    config.domain = Box{{-1.0}, {1.0}};
    config.target = Box{{0.99}, {1.5}};
    config.step = 0.01;
    const std::vector<double> b{10.0};
    // One step carries 0.95 -> 1.05: outside the domain but inside the
    // target, which is checked first; the crossing interpolates to 0.99.
    const std::vector<double> x0{0.95};
    const SimOutcome out = simulate_point(field, b, x0, config);
    CHECK(out.status == SimStatus::Absorbed);
    CHECK(std::abs(out.tau - 0.004) <= 1e-12);
}

TEST_CASE("starts inside the target absorb immediately") {
    const ParamField field = radial_field(1);
    SimConfig config;
    config.domain = Box{{-1.0}, {1.0}};
    config.target = Box{{-0.1}, {0.1}};
    const std::vector<double> x0{0.05};
    const SimOutcome out = simulate_point(field, kOne, x0, config);
    CHECK(out.status == SimStatus::Absorbed);
    CHECK(out.tau == 0.0);
}

TEST_CASE("grid-aligned targets resolve through the cell set") {
    const Grid grid = build_grid(Box{{0.0}, {1.0}}, {4});
    const ParamField field = make_uniform_1d();
    SimConfig config;
    config.domain = grid.box();
    config.target_cells = CellSet{{3}, "T"};
    config.step = 1e-3;
    const std::vector<double> b{1.0};
    const std::vector<double> x0{0.5};
    const SimOutcome out = simulate_point(field, b, x0, config, &grid);
    CHECK(out.status == SimStatus::Absorbed);
    // The last cell starts at x = 0.75, so the crossing takes 0.25.
    CHECK(std::abs(out.tau - 0.25) <= 1e-9);

    CHECK_THROWS_AS(simulate_point(field, b, x0, config), InvalidArgument);
}

TEST_CASE("simulation configuration is validated") {
    const ParamField field = radial_field(1);
    SimConfig config;
    config.domain = Box{{-1.0}, {1.0}};
    config.target = Box{{-0.1}, {0.1}};
    const std::vector<double> x0{0.5};

    SimConfig bad = config;
    bad.step = 0.0;
    CHECK_THROWS_AS(simulate_point(field, kOne, x0, bad), InvalidArgument);
    bad = config;
    bad.t_max = -1.0;
    CHECK_THROWS_AS(simulate_point(field, kOne, x0, bad), InvalidArgument);
    bad = config;
    bad.subsamples = 0;
    CHECK_THROWS_AS(simulate_point(field, kOne, x0, bad), InvalidArgument);
    bad = config;
    bad.domain = Box{{-1.0, -1.0}, {1.0, 1.0}};
    CHECK_THROWS_AS(simulate_point(field, kOne, x0, bad), InvalidArgument);
    bad = config;
    bad.target = Box{{0.1}, {-0.1}};
    CHECK_THROWS_AS(simulate_point(field, kOne, x0, bad), InvalidArgument);
    const std::vector<double> wrong_dim{0.5, 0.5};
    CHECK_THROWS_AS(simulate_point(field, kOne, wrong_dim, config),
                    InvalidArgument);
}

TEST_CASE("oracle fields reduce per-cell subsample lattices") {
    const Grid grid = build_grid(Box{{0.0}, {1.0}}, {4});
    const ParamField field = make_uniform_1d();
    SimConfig config;
    config.domain = grid.box();
    config.target_cells = CellSet{{3}, "T"};
    config.subsamples = 2;
    const std::vector<double> b{1.0};

    const OracleFields fields = oracle_fields(grid, field, b, config);
    CHECK(fields.indicator.tag == FieldTag::Indicator);
    CHECK(fields.tau.tag == FieldTag::Time);

    // Cell 0 starts at 0.0625 and 0.1875; both reach x = 0.75 at unit
    // speed, so the mean crossing time is 0.625.
    CHECK(fields.indicator.values[0] == 1.0);
    CHECK(std::abs(fields.tau.values[0] - 0.625) <= 1e-9);
    CHECK(std::abs(fields.tau.values[2] - 0.125) <= 1e-9);
    // Starts inside the target cell absorb at time zero.
    CHECK(fields.indicator.values[3] == 1.0);
    CHECK(fields.tau.values[3] == 0.0);
}

TEST_CASE("oracle indicator averages mixed outcomes and tau skips escapes") {
    const Grid grid = build_grid(Box{{0.0}, {1.0}}, {4});
    const ParamField field = split_field();
    SimConfig config;
    config.domain = grid.box();
    config.target_cells = CellSet{{3}, "T"};
    config.subsamples = 2;

    // Cell 1 starts at 0.3125 (drifts left, escapes at 0) and 0.4375
    // (drifts right, absorbs): the indicator averages to 1/2 and tau only
    // counts the absorbed start, x(t) = 0.4 + 0.0375 e^t hitting 0.75 at
    // log(28/3).
    const OracleFields fields = oracle_fields(grid, field, kOne, config);
    CHECK(fields.indicator.values[1] == 0.5);
    CHECK(std::abs(fields.tau.values[1] - std::log(28.0 / 3.0)) <= 1e-5);
    // Cell 0 never absorbs: indicator 0 and undefined mean time.
    CHECK(fields.indicator.values[0] == 0.0);
    CHECK(std::isinf(fields.tau.values[0]));
}
