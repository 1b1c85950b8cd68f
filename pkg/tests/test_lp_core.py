import numpy as np
import pytest

from errors import SchemaError
from lp_core import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    LpBuilder,
    LpProblem,
    PsdBlock,
    read_lp_text,
    solve_lp,
    solve_with_psd_cuts,
    write_lp_text,
)
from numerics import min_eigenvalue


def test_max_problem_values_and_duals():
    p = LpProblem.create("max", [3.0, 2.0], [[1.0, 1.0], [1.0, 3.0]], ["<=", "<="], [4.0, 6.0])
    sol = solve_lp(p)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(12.0)
    assert sol.x == pytest.approx([4.0, 0.0])
    assert sol.duals == pytest.approx([3.0, 0.0], abs=1e-9)
    assert np.all(p.c - p.A.T @ sol.duals <= 1e-9)


def test_min_problem_with_ge_rows():
    p = LpProblem.create("min", [1.0, 1.0], [[1.0, 2.0], [2.0, 1.0]], [">=", ">="], [2.0, 2.0])
    sol = solve_lp(p)
    assert sol.objective == pytest.approx(4.0 / 3.0)
    assert sol.x == pytest.approx([2.0 / 3.0, 2.0 / 3.0])
    # d objective / d rhs
    assert sol.duals == pytest.approx([1.0 / 3.0, 1.0 / 3.0])


def test_infeasible_has_farkas_vector():
    p = LpProblem.create("min", [1.0], [[1.0], [1.0]], ["<=", ">="], [1.0, 2.0])
    sol = solve_lp(p)
    assert sol.status == INFEASIBLE
    assert sol.farkas is not None


def test_unbounded_has_ray():
    p = LpProblem.create("max", [1.0, 0.0], [[1.0, -1.0]], ["<="], [1.0])
    sol = solve_lp(p)
    assert sol.status == UNBOUNDED
    assert sol.ray is not None
    assert p.c @ sol.ray > 0


def test_free_variable_equality():
    builder = LpBuilder("min")
    x = builder.add_variable("x", -np.inf, np.inf, 1.0)
    builder.add_row({x: 1.0}, "=", -3.0, "fix")
    sol = solve_lp(builder.build())
    assert sol.objective == pytest.approx(-3.0)


def test_builder_rejects_duplicate_variable():
    builder = LpBuilder()
    builder.add_variable("x")
    with pytest.raises(SchemaError):
        builder.add_variable("x")


def test_problem_validation():
    with pytest.raises(SchemaError):
        LpProblem.create("maximize", [1.0])
    with pytest.raises(SchemaError):
        LpProblem.create("min", [1.0], lower=[2.0], upper=[1.0])


def test_residuals():
    p = LpProblem.create("min", [1.0, 1.0], [[1.0, 1.0], [1.0, 0.0]], ["<=", "="], [1.0, 0.5])
    r = p.residuals(np.array([1.0, 1.0]))
    assert r == pytest.approx([1.0, 0.5])


def test_lp_text_round_trip():
    p = LpProblem.create(
        "max",
        [1.0, -2.5],
        [[1.0, 1.0], [0.5, -1.0]],
        ["<=", ">="],
        [4.0, -1.0],
        lower=[-np.inf, 0.0],
        upper=[5.0, np.inf],
    )
    q = read_lp_text(write_lp_text(p))
    assert q.sense == p.sense
    assert np.array_equal(q.c, p.c)
    assert np.array_equal(q.A, p.A)
    assert q.row_senses == p.row_senses
    assert np.array_equal(q.lower, p.lower)
    assert np.array_equal(q.upper, p.upper)
    assert write_lp_text(q) == write_lp_text(p)


def test_lp_text_comments_and_errors():
    text = "min  # objective\n1 1\n1 1 >= 2  # cover\nend\n"
    p = read_lp_text(text)
    assert solve_lp(p).objective == pytest.approx(2.0)
    with pytest.raises(SchemaError):
        read_lp_text("min\n1 1\n1 >= 2\nend\n")
    with pytest.raises(SchemaError):
        read_lp_text("minimize\n1\nend\n")


def _trace_problem():
    builder = LpBuilder("min")
    r11 = builder.add_variable("R11", -np.inf, np.inf, 1.0)
    r12 = builder.add_variable("R12", -np.inf, np.inf, 0.0)
    r22 = builder.add_variable("R22", -np.inf, np.inf, 1.0)
    builder.add_row({r12: 1.0}, "=", 1.0)
    builder.add_row({r11: 1.0}, ">=", 0.0)
    builder.add_row({r22: 1.0}, ">=", 0.0)
    return builder.build(), PsdBlock.from_upper(2, {(0, 0): r11, (0, 1): r12, (1, 1): r22})


def test_psd_cuts_reach_trace_optimum():
    problem, block = _trace_problem()
    sol = solve_with_psd_cuts(problem, [block])
    assert sol.objective == pytest.approx(2.0, abs=1e-5)
    lam, _ = min_eigenvalue(block.realize(sol.x))
    assert lam >= -1e-6
    assert sol.cuts > 0
    assert all(b >= a - 1e-9 for a, b in zip(sol.history, sol.history[1:]))


def test_psd_block_requires_symmetric_columns():
    with pytest.raises(SchemaError):
        PsdBlock(2, {(0, 0): 0, (0, 1): 1, (1, 0): 2, (1, 1): 3})


def _dual(p):
    """Dual of min c'x, Ax >= b, x >= 0 (or of max c'x, Ax <= b, x >= 0)."""
    if p.sense == "min":
        return LpProblem.create("max", p.b, p.A.T, ["<="] * p.num_vars, p.c)
    return LpProblem.create("min", p.b, p.A.T, [">="] * p.num_vars, p.c)


@pytest.mark.parametrize("seed", range(5))
def test_dual_of_dual_recovers_optimum(seed):
    rng = np.random.default_rng(seed)
    rows, cols = int(rng.integers(2, 5)), int(rng.integers(2, 5))
    p = LpProblem.create(
        "min",
        rng.uniform(0.5, 2.0, cols),
        rng.uniform(0.1, 1.0, (rows, cols)),
        [">="] * rows,
        rng.uniform(0.5, 2.0, rows),
    )
    primal = solve_lp(p)
    dual = solve_lp(_dual(p))
    again = solve_lp(_dual(_dual(p)))
    assert primal.status == dual.status == again.status == OPTIMAL
    assert dual.objective == pytest.approx(primal.objective, abs=1e-8)
    assert again.objective == pytest.approx(primal.objective, abs=1e-8)
