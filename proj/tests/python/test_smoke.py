import math

import pytest

import doaopt as dp


def chain_grid():
    return dp.Grid(dp.Box(lo=[0.0], hi=[1.0]), [4])


def test_version_and_metadata():
    assert dp.__version__ == "0.1.0"
    grid = chain_grid()
    assert grid.dim == 1
    assert grid.cell_count == 4
    assert grid.cell_volume == pytest.approx(0.25)
    assert grid.neighbor(3, 0, 1) == dp.BOUNDARY


def test_uniform_chain_assembles_exact_rates():
    grid = chain_grid()
    gen = dp.assemble(grid, dp.uniform_1d(), [2.0])
    assert gen.size == 4
    assert gen.nnz == 7
    rows, cols, vals = gen.matrix_triplets()
    entries = {(r, c): v for r, c, v in zip(rows, cols, vals)}
    for j in range(4):
        assert entries[(j, j)] == -8.0
    for j in range(3):
        assert entries[(j + 1, j)] == 8.0
    assert list(gen.leak) == [0.0, 0.0, 0.0, 8.0]


def test_custom_python_field_matches_builtin():
    grid = chain_grid()
    field = dp.custom_field(
        1, 1, lambda x, b: [b[0]], lambda x, b, l: [1.0]
    )
    assert not field.thread_safe
    assert field([0.3], [2.0]) == [2.0]
    gen = dp.assemble(grid, field, [2.0])
    baseline = dp.assemble(grid, dp.uniform_1d(), [2.0])
    assert gen.matrix_triplets() == baseline.matrix_triplets()
    assert list(gen.leak) == list(baseline.leak)


def test_absorption_solves_on_a_16x16_grid():
    grid = dp.Grid(dp.Box([-1.0, -1.0], [1.0, 1.0]), [16, 16])
    field = dp.system_e()
    target = dp.select_cells(
        grid,
        dp.Box([-0.15, -0.15], [0.15, 0.15]),
        dp.SelectRule.CENTER_IN,
        "target",
    )
    assert len(target) == 4
    gen = dp.assemble(grid, field, [1.0, 1.0, 0.0, 1.0])
    problem = dp.AbsorptionProblem(gen, target)
    p = dp.absorption_probabilities(problem)
    t = dp.termination_times(problem)
    assert p.tag == dp.FieldTag.PROBABILITY
    assert t.tag == dp.FieldTag.TIME
    assert p.values.min() >= 0.0
    assert p.values.max() <= 1.0
    for cell in target.cells:
        assert p.values[cell] == 1.0
        assert t.values[cell] == 0.0
    assert all(math.isfinite(v) for v in t.values)

    ev = dp.evaluate_doa_objective(grid, field, [1.0, 1.0, 0.0, 1.0], target)
    coverage = grid.cell_volume * p.values.sum()
    assert ev.f == pytest.approx(coverage - 0.02 * 3.0, abs=1e-10)
    assert ev.assemblies == 5
    assert len(ev.gradient) == 4


def test_optimize_smoke():
    grid = chain_grid()
    target = dp.CellSet([3], "target")
    cfg = dp.OptConfig()
    cfg.alpha = 0.02
    cfg.gamma = 3.0
    cfg.max_iters = 3
    cfg.tol = 1e-12
    res = dp.maximize_doa(grid, dp.uniform_1d(), target, cfg, [2.0])
    assert [r.k for r in res.trace.records] == [0, 1, 2, 3]
    assert res.b[0] == pytest.approx(2.0 * 0.88**3, abs=1e-9)
    assert res.trace.assemblies == 8
    assert math.isnan(res.trace.records[0].g)
    assert res.t is None

    d0 = dp.CellSet([0, 1], "d0")
    tcfg = dp.OptConfig()
    tcfg.alpha = 0.02
    tcfg.gamma = 0.05
    tcfg.max_iters = 1
    res_t = dp.minimize_time(grid, dp.uniform_1d(), target, d0, tcfg, [2.0])
    assert res_t.t is not None
    assert res_t.trace.records[0].g == pytest.approx(0.5, abs=1e-12)


def test_io_roundtrip(tmp_path):
    grid = chain_grid()
    gen = dp.assemble(grid, dp.uniform_1d(), [2.0])
    gen_path = str(tmp_path / "chain.gen")
    dp.save_generator(gen_path, gen, "smoke")
    back = dp.load_generator(gen_path, grid)
    assert back.matrix_triplets() == gen.matrix_triplets()
    assert list(back.leak) == list(gen.leak)

    problem = dp.AbsorptionProblem(gen, dp.CellSet([3], "target"))
    p = dp.absorption_probabilities(problem)
    field_path = str(tmp_path / "p.field")
    dp.save_field(field_path, p)
    p2 = dp.load_field(field_path)
    assert p2.tag == dp.FieldTag.PROBABILITY
    assert list(p2.values) == list(p.values)
    assert p2.grid == grid

    b_path = str(tmp_path / "b.txt")
    dp.save_parameters(b_path, [0.5, -0.25])
    assert list(dp.load_parameters(b_path)) == [0.5, -0.25]

    assert dp.provenance_comment("") == "# doaopt 0.1.0 config=cbf29ce484222325"


def test_simulate_point():
    cfg = dp.SimConfig()
    cfg.step = 1e-3
    cfg.t_max = 10.0
    cfg.domain = dp.Box([0.0], [1.0])
    cfg.target = dp.Box([0.5], [1.0])
    out = dp.simulate_point(dp.uniform_1d(), [1.0], [0.25], cfg)
    assert out.status == dp.SimStatus.ABSORBED
    assert out.tau == pytest.approx(0.25, abs=1e-9)
    assert not out.blew_up


def test_errors_map_to_value_error():
    grid = chain_grid()
    gen = dp.assemble(grid, dp.uniform_1d(), [2.0])
    with pytest.raises(ValueError):
        dp.AbsorptionProblem(gen, dp.CellSet([], "empty"))
    with pytest.raises(ValueError):
        dp.Grid(dp.Box([1.0], [0.0]), [4])
    with pytest.raises(ValueError):
        dp.QuadratureRule.gauss_legendre(9)
    with pytest.raises(ValueError):
        dp.assemble(grid, dp.uniform_1d(), [2.0, 3.0])
