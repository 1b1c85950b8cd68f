import json

import numpy as np
import pytest

from cu_sets import EllipsoidalCuProcess, MatrixCuProcess
from errors import HorizonTooLarge, ModeUnsupportedForDimension, SchemaError
from instances import load_instance
from ro_counterpart import (
    Affine,
    AroEllipsoidalInstance,
    AroPolyhedralInstance,
    ConstraintSystem,
    SignVector,
    aro_ellipsoidal_rows,
    aro_polyhedral_system,
    center_cu_lhs,
    center_cu_system,
    center_system_point,
    enumerate_sign_vectors,
    matrix_cu_lhs,
    matrix_worst_case_oracle,
    nested_worst_case_oracle,
    polyhedral_cu_dual_system,
    polyhedral_cu_feasible,
    polyhedral_dual_bound,
    polyhedral_worst_case,
    worst_case_lp,
)


@pytest.fixture
def center_instance(fixture_path):
    return load_instance(fixture_path("ellipsoidal_center.json"))


@pytest.fixture
def poly_instance(fixture_path):
    return load_instance(fixture_path("polyhedral_rhs.json"))


def test_center_lhs_hand_computed(center_instance):
    lhs, trace = center_cu_lhs(center_instance.decision, center_instance.process)
    assert lhs == pytest.approx(1.669, abs=1e-12)
    assert trace.y[2] == pytest.approx([0.7])
    assert trace.y[1] == pytest.approx([-0.57])
    assert trace.R[2] == pytest.approx(1.12)
    assert lhs <= center_instance.budget


def test_center_lhs_matches_exact_recursion(center_instance):
    lhs, _ = center_cu_lhs(center_instance.decision, center_instance.process)
    oracle = nested_worst_case_oracle(center_instance.decision, center_instance.process, "exact1d")
    assert oracle == pytest.approx(lhs, abs=1e-10)


def test_monte_carlo_is_a_lower_bound(center_instance):
    lhs, _ = center_cu_lhs(center_instance.decision, center_instance.process)
    sampled = nested_worst_case_oracle(center_instance.decision, center_instance.process, "monte_carlo", 2000, seed=5)
    assert sampled <= lhs + 1e-9


def test_single_period_is_classical_ellipsoid():
    L = np.array([[1.0, 0.0], [0.5, 2.0]])
    proc = EllipsoidalCuProcess([1.0, -1.0], [0.7], (L,), (), (), ())
    x = [np.array([2.0, 1.0])]
    lhs, _ = center_cu_lhs(x, proc)
    assert lhs == pytest.approx(1.0 + 0.7 * np.linalg.norm(L.T @ x[0]))


def test_exact1d_needs_one_dimension():
    proc = EllipsoidalCuProcess([0.0, 0.0], [1.0], (np.eye(2),), (), (), ())
    with pytest.raises(ModeUnsupportedForDimension):
        nested_worst_case_oracle([[1.0, 1.0]], proc, "exact1d")


def test_center_system_tight_at_lhs(center_instance):
    proc = center_instance.process
    lhs, _ = center_cu_lhs(center_instance.decision, proc)
    system = center_cu_system(proc, lhs)
    values = center_system_point(center_instance.decision, proc)
    assert len(system.soc) == proc.periods
    assert max(system.residuals(values).values()) <= 1e-9
    assert not center_cu_system(proc, lhs - 0.01).is_feasible(values)


def test_constraint_system_json_round_trip(center_instance):
    system = center_cu_system(center_instance.process, 2.0)
    text = system.to_json()
    again = ConstraintSystem.from_dict(json.loads(text))
    assert again.to_json() == text


def test_constraint_system_rejects_unknown_variable():
    system = ConstraintSystem()
    system.add_variable("a", ">=0")
    with pytest.raises(SchemaError):
        system.add_linear("r", {"b": 1.0}, "<=", 1.0)
    with pytest.raises(SchemaError):
        system.add_variable("c", "positive")
    with pytest.raises(SchemaError):
        system.add_soc("cone", Affine({"z": 1.0}), [])


@pytest.mark.parametrize("alpha", [0.0, 0.3, 2.5])
def test_counterparts_are_homogeneous_in_x(alpha, fixture_path):
    rng = np.random.default_rng(17)
    m, T = 2, 3
    proc = EllipsoidalCuProcess(
        rng.normal(size=m),
        [0.8, 1.2, 0.5],
        tuple(np.tril(rng.normal(size=(m, m))) for _ in range(T)),
        tuple(rng.normal(size=(m, m)) for _ in range(T - 1)),
        tuple(rng.normal(size=(m, m)) for _ in range(T - 1)),
        tuple(np.zeros(m) for _ in range(T - 1)),
    )
    x = [rng.normal(size=m) for _ in range(T)]
    base, _ = center_cu_lhs(x, proc)
    scaled, _ = center_cu_lhs([alpha * v for v in x], proc)
    assert scaled == pytest.approx(alpha * base, abs=1e-10)

    matrix = load_instance(fixture_path("ellipsoidal_matrix.json"))
    plan = matrix.require_decision()
    base, _ = matrix_cu_lhs(plan, matrix.process)
    scaled, _ = matrix_cu_lhs([alpha * v for v in plan], matrix.process)
    assert scaled == pytest.approx(alpha * base, abs=1e-10)

    poly = load_instance(fixture_path("polyhedral_rhs.json"))
    plan = poly.require_decision()
    base, _ = polyhedral_worst_case(plan, poly.process)
    scaled, _ = polyhedral_worst_case([alpha * v for v in plan], poly.process)
    assert scaled == pytest.approx(alpha * base, abs=1e-8)


def test_sign_vectors():
    signs = enumerate_sign_vectors(3)
    assert len(signs) == 8
    assert signs[0].entries == (-1, -1, -1)
    assert signs[0].get(2, 2) == 1
    assert list(SignVector(3, (1, -1, 1)).to_dict()) == ["1,2", "1,3", "2,3"]
    with pytest.raises(HorizonTooLarge):
        enumerate_sign_vectors(6)


def test_matrix_lhs_fixed_covariance():
    sigma1 = np.array([[0.5, 0.1], [0.1, 0.3]])
    proc = MatrixCuProcess(
        ([0.1, 0.2], [0.0, -0.1], [0.3, 0.3]),
        [1.0, 0.5, 2.0],
        sigma1,
        [1.0, 1.0],
        [0.0, 0.0],
        (np.zeros((2, 2)), np.zeros((2, 2))),
    )
    x = [np.array([1.0, -1.0]), np.array([0.5, 0.5]), np.array([0.0, 2.0])]
    lhs, _ = matrix_cu_lhs(x, proc)
    expected = sum(proc.means[t] @ x[t] + proc.radii[t] * np.sqrt(x[t] @ sigma1 @ x[t]) for t in range(3))
    assert lhs == pytest.approx(expected, rel=1e-10)


def test_matrix_lhs_bounds_sampled_paths(fixture_path):
    inst = load_instance(fixture_path("ellipsoidal_matrix.json"))
    lhs, signs = matrix_cu_lhs(inst.decision, inst.process)
    sampled = matrix_worst_case_oracle(inst.decision, inst.process, samples=5000, seed=3)
    assert sampled <= lhs + 1e-9
    assert signs.periods == 2


def test_polyhedral_dual_equals_primal(poly_instance):
    bound, duals = polyhedral_dual_bound(poly_instance.decision, poly_instance.process)
    primal, path = polyhedral_worst_case(poly_instance.decision, poly_instance.process)
    assert bound == pytest.approx(2.3)
    assert primal == pytest.approx(2.3)
    assert path[0] == pytest.approx([1.0])
    assert path[1] == pytest.approx([1.3])
    assert all(v <= 1e-9 for v in duals.values())


def test_polyhedral_feasibility_follows_budget(poly_instance):
    x, proc = poly_instance.decision, poly_instance.process
    assert polyhedral_cu_feasible(x, proc, 2.5)
    assert polyhedral_cu_feasible(x, proc, 2.3 + 1e-7)
    assert not polyhedral_cu_feasible(x, proc, 2.2)


def test_polyhedral_golden_system(poly_instance, fixture_path):
    system = polyhedral_cu_dual_system(poly_instance.decision, poly_instance.process, poly_instance.budget)
    assert system.to_json() == fixture_path("polyhedral_rhs.reformulate.json").read_text()


def test_worst_case_lp_layout(poly_instance):
    p = worst_case_lp(poly_instance.decision, poly_instance.process)
    assert p.sense == "max"
    assert p.var_names == ("d[1][1]", "d[2][1]")
    assert p.num_rows == 4
    assert np.all(np.isinf(p.lower))


def _aro(x1):
    box_G = [[1.0], [-1.0]]
    box_g = [0.0, -1.0]
    return AroPolyhedralInstance(
        A21=[[1.0]],
        A22=[[1.0]],
        B2=[[1.0]],
        G1=box_G,
        g1=box_g,
        G2=box_G,
        g2=box_g,
        Delta=[[0.0], [0.0]],
        X2=[[0.0]],
        x1=[x1],
    )


def test_aro_polyhedral_feasibility():
    # worst case of d_2 over [0, 1] is 1
    assert aro_polyhedral_system(_aro(1.5)).solve_feasibility().status == "optimal"
    assert aro_polyhedral_system(_aro(0.5)).solve_feasibility().status == "infeasible"


def test_aro_polyhedral_certain_row_is_constant():
    inst = _aro(-1.0)
    inst.B2 = np.zeros((1, 1))
    system = aro_polyhedral_system(inst)
    assert system.variables == []
    assert system.linear[0].rhs == -1.0


def test_aro_ellipsoidal_rows():
    inst = AroEllipsoidalInstance(
        A21=[[1.0]], A22=[[0.0]], B2=[[1.0]], X2=[[0.0]], x1=[0.0],
        mu1=[0.0], L1=[[1.0]], L2=[[1.0]], r1=1.0, r2=1.0,
        A2=[[0.0]], F2=[[0.5]], c2=[0.0],
    )
    # d_2 = 0.5 d_1 + u_2 with |d_1|, |u_2| <= 1
    assert aro_ellipsoidal_rows(inst) == pytest.approx([1.5])
