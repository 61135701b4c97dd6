#include <random>

#include "doaopt/grid.hpp"
#include "doctest.h"

using namespace doaopt;

TEST_CASE("build_grid basic arithmetic") {
    const Grid grid = build_grid(Box{{0.0}, {1.0}}, {2});
    CHECK(grid.dim() == 1);
    CHECK(grid.cell_count() == 2);
    CHECK(grid.width(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(grid.cell_volume() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("build_grid planar partitions") {
    const Grid g64 = build_grid(Box{{-1.0, -1.0}, {1.0, 1.0}}, {64, 64});
    CHECK(g64.cell_count() == 4096);
    CHECK(g64.cell_volume() == doctest::Approx(0.0009765625).epsilon(1e-15));

    const Grid g256 = build_grid(Box{{-1.0, -1.0}, {1.0, 1.0}}, {256, 256});
    CHECK(g256.cell_count() == 65536);
}

TEST_CASE("build_grid rejects bad input") {
    CHECK_THROWS_AS(build_grid(Box{{0.0}, {0.0}}, {2}), InvalidArgument);
    CHECK_THROWS_AS(build_grid(Box{{1.0}, {0.0}}, {2}), InvalidArgument);
    CHECK_THROWS_AS(build_grid(Box{{0.0}, {1.0}}, {0}), InvalidArgument);
    CHECK_THROWS_AS(build_grid(Box{{0.0}, {1.0}}, {2, 2}), InvalidArgument);
}

TEST_CASE("row-major indexing with the last axis fastest") {
    const Grid grid = build_grid(Box{{0.0, 0.0}, {1.0, 1.0}}, {3, 4});
    const int multi[2] = {2, 1};
    CHECK(grid.flat_index(multi) == 2 * 4 + 1);

    int out[2] = {-1, -1};
    grid.multi_index(9, out);
    CHECK(out[0] == 2);
    CHECK(out[1] == 1);
}

TEST_CASE("flat and multi index round trip") {
    const Grid grid = build_grid(Box{{-1.0, 0.0, 2.0}, {1.0, 3.0, 4.0}}, {4, 3, 5});
    std::mt19937 rng(1234);
    std::uniform_int_distribution<long> pick(0, grid.cell_count() - 1);
    for (int trial = 0; trial < 50; ++trial) {
        const long cell = pick(rng);
        int multi[3];
        grid.multi_index(cell, multi);
        for (int k = 0; k < 3; ++k) {
            CHECK(multi[k] >= 0);
            CHECK(multi[k] < grid.resolution()[k]);
        }
        CHECK(grid.flat_index(multi) == cell);
    }
}

TEST_CASE("cell geometry") {
    const Grid grid = build_grid(Box{{0.0, -2.0}, {1.0, 2.0}}, {4, 8});
    const int multi[2] = {1, 3};
    const long c = grid.flat_index(multi);
    const Box cb = grid.cell_box(c);
    CHECK(cb.lo[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(cb.hi[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(cb.lo[1] == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(cb.hi[1] == doctest::Approx(0.0).epsilon(1e-15));
    const auto center = grid.cell_center(c);
    CHECK(center[0] == doctest::Approx(0.375).epsilon(1e-15));
    CHECK(center[1] == doctest::Approx(-0.25).epsilon(1e-15));
}

TEST_CASE("total cell volume matches the box volume") {
    const Grid grid = build_grid(Box{{-1.0, -1.0, 0.0}, {1.0, 2.0, 0.7}}, {7, 5, 3});
    const double total = grid.cell_volume() * grid.cell_count();
    CHECK(total == doctest::Approx(grid.box().volume()).epsilon(1e-12));
}

TEST_CASE("neighbor lookup and boundary marker") {
    const Grid grid = build_grid(Box{{0.0, 0.0}, {1.0, 1.0}}, {3, 3});
    const int mid[2] = {1, 1};
    const long c = grid.flat_index(mid);
    CHECK(grid.neighbor(c, 0, +1) == c + 3);
    CHECK(grid.neighbor(c, 0, -1) == c - 3);
    CHECK(grid.neighbor(c, 1, +1) == c + 1);
    CHECK(grid.neighbor(c, 1, -1) == c - 1);

    const int corner[2] = {0, 0};
    const long cc = grid.flat_index(corner);
    CHECK(grid.neighbor(cc, 0, -1) == kBoundary);
    CHECK(grid.neighbor(cc, 1, -1) == kBoundary);
    CHECK(grid.neighbor(cc, 0, +1) != kBoundary);
}

TEST_CASE("face enumeration") {
    const Grid grid = build_grid(Box{{0.0, 0.0}, {2.0, 1.0}}, {2, 2});
    const auto faces = enumerate_faces(grid);
    CHECK(faces.size() == static_cast<size_t>(grid.cell_count() * 4));

    long boundary_faces = 0;
    for (size_t i = 0; i < faces.size(); ++i) {
        const Face& face = faces[i];
        if (i > 0) CHECK(face.owner >= faces[i - 1].owner);
        CHECK((face.orientation == 1 || face.orientation == -1));
        if (face.neighbor == kBoundary) ++boundary_faces;
        else CHECK(grid.neighbor(face.owner, face.axis, face.orientation) ==
                   face.neighbor);
        // Face measure is the product of widths over the other axes.
        const double expect = face.axis == 0 ? grid.width(1) : grid.width(0);
        CHECK(face.measure == doctest::Approx(expect).epsilon(1e-15));
        CHECK(face.geometry.lo[face.axis] == face.geometry.hi[face.axis]);
    }
    CHECK(boundary_faces == 8);
}

TEST_CASE("face enumeration in one dimension has unit measure") {
    const Grid grid = build_grid(Box{{0.0}, {1.0}}, {3});
    const auto faces = enumerate_faces(grid);
    CHECK(faces.size() == 6);
    for (const Face& face : faces) CHECK(face.measure == 1.0);
}

TEST_CASE("box selection rules on the planar benchmark target") {
    const Grid g64 = build_grid(Box{{-1.0, -1.0}, {1.0, 1.0}}, {64, 64});
    const Box target{{-0.05, -0.05}, {0.05, 0.05}};
    CHECK(select_cells(g64, target, SelectRule::Contained).size() == 4);
    CHECK(select_cells(g64, target, SelectRule::CenterIn).size() == 16);
    CHECK(select_cells(g64, target, SelectRule::Intersects).size() == 16);

    const Grid g128 = build_grid(Box{{-1.0, -1.0}, {1.0, 1.0}}, {128, 128});
    CHECK(select_cells(g128, target, SelectRule::Contained).size() == 36);
    CHECK(select_cells(g128, target, SelectRule::CenterIn).size() == 36);
    CHECK(select_cells(g128, target, SelectRule::Intersects).size() == 64);

    const Box small{{-0.03, -0.03}, {0.03, 0.03}};
    CHECK(select_cells(g64, small, SelectRule::CenterIn).size() == 4);
    CHECK(select_cells(g128, small, SelectRule::CenterIn).size() == 16);
}

TEST_CASE("selected sets are sorted and duplicate free") {
    const Grid grid = build_grid(Box{{-1.0, -1.0}, {1.0, 1.0}}, {16, 16});
    const CellSet set =
        select_cells(grid, Box{{-0.4, -0.4}, {0.4, 0.4}}, SelectRule::Intersects);
    REQUIRE(set.size() > 0);
    for (long i = 1; i < set.size(); ++i) CHECK(set.cells[i] > set.cells[i - 1]);
    CHECK(set.contains(set.cells.front()));
    CHECK_FALSE(set.contains(-1));
}

TEST_CASE("disk selection rules") {
    const Grid g64 = build_grid(Box{{-1.0, -1.0}, {1.0, 1.0}}, {64, 64});
    const std::vector<double> center{0.0, 0.0};
    CHECK(select_cells_disk(g64, center, 0.3, SelectRule::Contained).size() == 256);
    CHECK(select_cells_disk(g64, center, 0.3, SelectRule::CenterIn).size() == 284);
    CHECK(select_cells_disk(g64, center, 0.3, SelectRule::Intersects).size() == 332);

    // Contained cells lie inside the center-in set, which lies inside the
    // intersecting set.
    const CellSet inner = select_cells_disk(g64, center, 0.3, SelectRule::Contained);
    const CellSet mid = select_cells_disk(g64, center, 0.3, SelectRule::CenterIn);
    const CellSet outer = select_cells_disk(g64, center, 0.3, SelectRule::Intersects);
    for (long cell : inner.cells) CHECK(mid.contains(cell));
    for (long cell : mid.cells) CHECK(outer.contains(cell));
}

TEST_CASE("selection accepts regions larger than the grid box") {
    const Grid grid = build_grid(Box{{0.0}, {1.0}}, {4});
    const CellSet all =
        select_cells(grid, Box{{-5.0}, {5.0}}, SelectRule::Contained);
    CHECK(all.size() == 4);
    // A region that overlaps the box but captures no cell yields an empty
    // set; a region disjoint from the box violates the precondition.
    const CellSet none =
        select_cells(grid, Box{{0.05}, {0.20}}, SelectRule::Contained);
    CHECK(none.empty());
    CHECK_THROWS_AS(select_cells(grid, Box{{2.0}, {3.0}}, SelectRule::Intersects),
                    InvalidArgument);
}

TEST_CASE("selection labels are preserved") {
    const Grid grid = build_grid(Box{{0.0}, {1.0}}, {4});
    const CellSet set =
        select_cells(grid, Box{{0.0}, {1.0}}, SelectRule::CenterIn, "target");
    CHECK(set.label == "target");
}
