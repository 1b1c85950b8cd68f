"""
Oracle-equivalence checks for the CU robust toolkit.

Each suite compares a counterpart against an independent oracle on the
bundled fixtures and on seeded random instances:
- theorem1: center-dependent recursion vs the 1-d endpoint recursion,
  Monte Carlo nested maxima and the SOC system; covariance-dependent
  bound vs sampled paths and vs the fixed-covariance value
- duality: polyhedral dual bound vs the primal worst case; simplex vs
  vertex enumeration with complementary slackness; the PSD cut loop on a
  problem with a known optimum
- aro: adjustable polyhedral system vs vertex enumeration; ellipsoidal
  row residuals vs the 1-d endpoint oracle
- dro: nested primal <= exact dual <= conservative dual, and the composed
  joint distribution reproducing the nested value

The report is a JSON document with the largest gap per check; a check
passes when every gap is within its tolerance and no instance errored.

Usage:
    python verify.py                   # all suites
    python verify.py --suite duality
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import BASE_SEED, FEASIBILITY_TOL, VERIFY_SUITES
from cu_sets import EllipsoidalCuProcess, MatrixCuProcess, MomentAmbiguityProcess, PolyhedralCuProcess
from dro_counterpart import (
    StageCost,
    conservative_dual_value,
    exact_dual_value,
    joint_expectation,
    nested_dro_value,
)
from errors import CuError, SchemaError
from experiment_engine import run_grid
from instances import load_instance
from lp_core import LpBuilder, LpProblem, PsdBlock, solve_lp, solve_with_psd_cuts
from numerics import keyed_rng
from ro_counterpart import (
    AroEllipsoidalInstance,
    AroPolyhedralInstance,
    aro_ellipsoidal_rows,
    aro_polyhedral_system,
    center_cu_lhs,
    center_cu_system,
    center_system_point,
    matrix_cu_lhs,
    matrix_worst_case_oracle,
    nested_worst_case_oracle,
    polyhedral_dual_bound,
    polyhedral_worst_case,
)

logger = logging.getLogger(__name__)

FIXTURE_DIR = Path(__file__).resolve().parent / "fixtures"

# stream keys per suite, so suites run alone draw the same instances as in "all"
_SUITE_KEYS = {"theorem1": 11, "duality": 12, "aro": 13, "dro": 14}


@dataclass
class VerifySettings:
    """Instance counts per check; the defaults are the full acceptance sizes."""
    exact_instances: int = 500
    monte_carlo_instances: int = 100
    monte_carlo_samples: int = 100_000
    matrix_instances: int = 200
    matrix_samples: int = 20_000
    duality_instances: int = 200
    lp_instances: int = 500
    aro_instances: int = 100
    dro_instances: int = 100

    def validate(self) -> None:
        for key, value in asdict(self).items():
            if not isinstance(value, int) or value < 0:
                raise SchemaError(f"verify.{key} must be a nonnegative integer", {"value": value})

    @classmethod
    def from_dict(cls, doc: Optional[Dict[str, Any]]) -> "VerifySettings":
        doc = dict(doc or {})
        unknown = set(doc) - set(asdict(cls()))
        if unknown:
            raise SchemaError(f"unknown verify settings {sorted(unknown)}")
        settings = cls(**doc)
        settings.validate()
        return settings


@dataclass
class CheckResult:
    """Largest gap of one check over its instances."""
    name: str
    tolerance: float
    instances: int = 0
    max_gap: Optional[float] = None
    violations: int = 0
    errors: List[str] = field(default_factory=list)

    def record(self, gap: float) -> None:
        self.instances += 1
        gap = float(gap)
        if self.max_gap is None or gap > self.max_gap:
            self.max_gap = gap
        if not gap <= self.tolerance:
            self.violations += 1

    def record_error(self, label: str, error: Exception) -> None:
        self.instances += 1
        self.errors.append(f"{label}: {error}")

    @property
    def passed(self) -> bool:
        return self.violations == 0 and not self.errors

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "instances": self.instances,
            "max_gap": self.max_gap,
            "tolerance": self.tolerance,
            "violations": self.violations,
            "errors": len(self.errors),
            "first_error": self.errors[0] if self.errors else None,
            "passed": self.passed,
        }


def _relative(a: float, b: float) -> float:
    return abs(a - b) / (1.0 + abs(a))


def _run_family(
    checks: Dict[str, CheckResult],
    count: int,
    seed: int,
    key: Tuple[int, ...],
    worker: Callable[[np.random.Generator], Dict[str, float]],
    threads: int,
) -> None:
    """Run worker on `count` seeded instances and fold the returned gaps into checks."""
    def work(index: int, _item) -> Tuple[Optional[Dict[str, float]], Optional[Exception]]:
        try:
            return worker(keyed_rng(seed, *key, index)), None
        except CuError as e:
            return None, e

    for index, (gaps, error) in enumerate(run_grid(list(range(count)), work, threads)):
        if error is not None:
            for name in checks:
                checks[name].record_error(f"instance {index}", error)
            continue
        for name, gap in gaps.items():
            checks[name].record(gap)


def _fixture_path(name: str) -> Path:
    return FIXTURE_DIR / name


def _fixture(name: str):
    path = _fixture_path(name)
    if not path.exists():
        raise SchemaError(f"bundled fixture {name} is missing", {"path": str(path)})
    return load_instance(path)


# ---------------------------------------------------------------------------
# Vertex enumeration
# ---------------------------------------------------------------------------

def vertices(H: np.ndarray, h: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Vertices of {z : H z >= h} by solving every square subsystem."""
    H = np.asarray(H, dtype=float)
    h = np.asarray(h, dtype=float)
    n = H.shape[1]
    found: List[np.ndarray] = []
    for rows in itertools.combinations(range(H.shape[0]), n):
        M = H[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        z = np.linalg.solve(M, h[list(rows)])
        if np.all(H @ z >= h - tol * (1.0 + np.abs(h))):
            found.append(z)
    if not found:
        return np.zeros((0, n))
    return np.array(found)


def vertex_max(c, H: np.ndarray, h: np.ndarray) -> float:
    """max c'z over a bounded nonempty polytope {z : H z >= h}."""
    V = vertices(H, h)
    if V.shape[0] == 0:
        raise SchemaError("polytope has no vertex")
    return float(np.max(V @ np.asarray(c, dtype=float)))


# ---------------------------------------------------------------------------
# theorem1
# ---------------------------------------------------------------------------

def random_center_process(rng: np.random.Generator, m: int, T: int) -> EllipsoidalCuProcess:
    L = [np.tril(rng.uniform(-1.0, 1.0, (m, m)), -1) + np.diag(rng.uniform(0.1, 2.0, m)) for _ in range(T)]
    return EllipsoidalCuProcess(
        rng.normal(size=m),
        rng.uniform(0.0, 2.0, T),
        tuple(L),
        tuple(rng.uniform(-1.5, 1.5, (m, m)) for _ in range(T - 1)),
        tuple(rng.uniform(-1.5, 1.5, (m, m)) for _ in range(T - 1)),
        tuple(rng.normal(size=m) for _ in range(T - 1)),
    )


def _system_gap(x, proc: EllipsoidalCuProcess, lhs: float) -> float:
    """Largest residual of the SOC system at the tight point with budget = lhs."""
    system = center_cu_system(proc, lhs)
    values = center_system_point(x, proc)
    return max(system.residuals(values).values()) / (1.0 + abs(lhs))


def _fixed_covariance_value(x, proc: MatrixCuProcess) -> float:
    """sum_t mu_t'x_t + r_t sqrt(x_t' Sigma_1 x_t), the counterpart when Sigma never moves."""
    return float(sum(
        proc.means[t] @ x[t] + proc.radii[t] * np.sqrt(max(float(x[t] @ proc.sigma1 @ x[t]), 0.0))
        for t in range(proc.periods)
    ))


def suite_theorem1(settings: VerifySettings, seed: int, threads: int = 1) -> List[CheckResult]:
    key = _SUITE_KEYS["theorem1"]
    exact = {"exact1d": CheckResult("center_lhs_vs_exact1d", 1e-10)}
    mc = {
        "monte_carlo": CheckResult("monte_carlo_below_center_lhs", 1e-9),
        "system": CheckResult("soc_system_tight_at_lhs", 1e-9),
    }
    matrix = {"matrix": CheckResult("matrix_lhs_above_sampled_paths", 1e-9)}
    fixed = {"fixed": CheckResult("matrix_lhs_fixed_covariance", 1e-10)}

    try:
        inst = _fixture("ellipsoidal_center.json")
        lhs, _ = center_cu_lhs(inst.require_decision(), inst.process)
        exact["exact1d"].record(_relative(lhs, nested_worst_case_oracle(inst.decision, inst.process, "exact1d")))
        mc["system"].record(_system_gap(inst.decision, inst.process, lhs))
    except CuError as e:
        exact["exact1d"].record_error("fixture", e)

    def exact_case(rng: np.random.Generator) -> Dict[str, float]:
        T = int(rng.integers(1, 5))
        proc = random_center_process(rng, 1, T)
        x = [rng.normal(size=1) for _ in range(T)]
        lhs, _ = center_cu_lhs(x, proc)
        return {"exact1d": _relative(lhs, nested_worst_case_oracle(x, proc, "exact1d"))}

    def mc_case(rng: np.random.Generator) -> Dict[str, float]:
        m = int(rng.integers(1, 4))
        T = int(rng.integers(1, 5))
        proc = random_center_process(rng, m, T)
        x = [rng.normal(size=m) for _ in range(T)]
        lhs, _ = center_cu_lhs(x, proc)
        sampled = nested_worst_case_oracle(
            x, proc, "monte_carlo", samples=settings.monte_carlo_samples, seed=int(rng.integers(0, 2**31))
        )
        return {"monte_carlo": sampled - lhs, "system": _system_gap(x, proc, lhs)}

    def matrix_case(rng: np.random.Generator) -> Dict[str, float]:
        T = int(rng.integers(2, 4))
        proc = MatrixCuProcess(
            tuple(rng.normal(size=1) for _ in range(T)),
            rng.uniform(0.0, 1.5, T),
            [[rng.uniform(0.1, 1.0)]],
            rng.uniform(0.0, 1.0, T - 1),
            rng.uniform(0.0, 1.0, T - 1),
            tuple([[rng.uniform(0.0, 0.5)]] for _ in range(T - 1)),
        )
        x = [rng.normal(size=1) for _ in range(T)]
        lhs, _ = matrix_cu_lhs(x, proc)
        sampled = matrix_worst_case_oracle(x, proc, settings.matrix_samples, int(rng.integers(0, 2**31)))
        return {"matrix": sampled - lhs}

    def fixed_case(rng: np.random.Generator) -> Dict[str, float]:
        m = int(rng.integers(1, 4))
        T = int(rng.integers(2, 4))
        B = rng.normal(size=(m, m))
        proc = MatrixCuProcess(
            tuple(rng.normal(size=m) for _ in range(T)),
            rng.uniform(0.0, 1.5, T),
            B @ B.T + 0.1 * np.eye(m),
            np.ones(T - 1),
            np.zeros(T - 1),
            tuple(np.zeros((m, m)) for _ in range(T - 1)),
        )
        x = [rng.normal(size=m) for _ in range(T)]
        lhs, _ = matrix_cu_lhs(x, proc)
        return {"fixed": _relative(lhs, _fixed_covariance_value(x, proc))}

    _run_family(exact, settings.exact_instances, seed, (key, 1), exact_case, threads)
    _run_family(mc, settings.monte_carlo_instances, seed, (key, 2), mc_case, threads)
    _run_family(matrix, settings.matrix_instances, seed, (key, 3), matrix_case, threads)
    _run_family(fixed, settings.matrix_instances, seed, (key, 4), fixed_case, threads)
    return [*exact.values(), *mc.values(), *matrix.values(), *fixed.values()]


# ---------------------------------------------------------------------------
# duality
# ---------------------------------------------------------------------------

def random_box_polyhedron(rng: np.random.Generator, m: int, T: int, extra_rows: int = 1) -> PolyhedralCuProcess:
    """
    Stages lo + D d_prev <= d <= hi + D d_prev plus random cuts a'd >= a'mid - s (+ a'D d_prev).

    Every stage is bounded, and nonempty for any previous point since the
    shifted box midpoint satisfies each cut.
    """
    G, g, Delta = [], [], []
    for t in range(T):
        lo = rng.uniform(-2.0, 0.0, m)
        hi = lo + rng.uniform(0.5, 2.0, m)
        D = np.zeros((m, m)) if t == 0 else rng.uniform(-0.8, 0.8, (m, m))
        rows = [np.eye(m), -np.eye(m)]
        rhs = [lo, -hi]
        shifts = [D, -D]
        for _ in range(extra_rows):
            a = rng.normal(size=m)
            rows.append(a[None, :])
            rhs.append(np.array([a @ (0.5 * (lo + hi)) - rng.uniform(0.05, 0.5)]))
            shifts.append((a @ D)[None, :])
        G.append(np.vstack(rows))
        g.append(np.concatenate(rhs))
        Delta.append(np.vstack(shifts))
    return PolyhedralCuProcess(tuple(G), tuple(g), tuple(Delta))


def random_lp(rng: np.random.Generator) -> LpProblem:
    """max c'x, A x <= b, x >= 0 with positive A (bounded) and positive b (feasible)."""
    rows = int(rng.integers(1, 7))
    cols = int(rng.integers(1, 7))
    return LpProblem.create(
        "max",
        rng.normal(size=cols),
        rng.uniform(0.1, 1.0, (rows, cols)),
        ["<="] * rows,
        rng.uniform(1.0, 5.0, rows),
    )


def lp_slackness(p: LpProblem, x: np.ndarray, y: np.ndarray) -> float:
    """Largest |y_i * slack_i| and |x_j * reduced cost_j| of a <=-form max LP."""
    row_gap = np.abs(y * (p.b - p.A @ x))
    col_gap = np.abs(x * (p.c - p.A.T @ y))
    return float(max(np.max(row_gap, initial=0.0), np.max(col_gap, initial=0.0)))


def psd_trace_problem() -> Tuple[LpProblem, PsdBlock]:
    """min R11 + R22 s.t. R12 = 1 with R PSD; the optimum is 2 at R = [[1, 1], [1, 1]]."""
    builder = LpBuilder("min")
    r11 = builder.add_variable("R11", -np.inf, np.inf, 1.0)
    r12 = builder.add_variable("R12", -np.inf, np.inf, 0.0)
    r22 = builder.add_variable("R22", -np.inf, np.inf, 1.0)
    builder.add_row({r12: 1.0}, "=", 1.0, "offdiag")
    # diagonal bounds keep every relaxation bounded before the first cut
    builder.add_row({r11: 1.0}, ">=", 0.0, "r11_nonneg")
    builder.add_row({r22: 1.0}, ">=", 0.0, "r22_nonneg")
    return builder.build(), PsdBlock.from_upper(2, {(0, 0): r11, (0, 1): r12, (1, 1): r22})


def suite_duality(settings: VerifySettings, seed: int, threads: int = 1) -> List[CheckResult]:
    key = _SUITE_KEYS["duality"]
    poly = {"dual": CheckResult("polyhedral_dual_vs_primal", 1e-7)}
    lp = {
        "vertex": CheckResult("simplex_vs_vertex_enumeration", 1e-8),
        "slackness": CheckResult("complementary_slackness", 1e-7),
    }
    psd = CheckResult("psd_cut_trace_optimum", 1e-5)

    try:
        inst = _fixture("polyhedral_rhs.json")
        bound, _ = polyhedral_dual_bound(inst.require_decision(), inst.process)
        primal, _ = polyhedral_worst_case(inst.decision, inst.process)
        poly["dual"].record(_relative(primal, bound))
    except CuError as e:
        poly["dual"].record_error("fixture", e)

    def poly_case(rng: np.random.Generator) -> Dict[str, float]:
        m = int(rng.integers(1, 5))
        T = int(rng.integers(1, 4))
        proc = random_box_polyhedron(rng, m, T)
        x = [rng.normal(size=m) for _ in range(T)]
        bound, _ = polyhedral_dual_bound(x, proc)
        primal, _ = polyhedral_worst_case(x, proc)
        return {"dual": _relative(primal, bound)}

    def lp_case(rng: np.random.Generator) -> Dict[str, float]:
        p = random_lp(rng)
        sol = solve_lp(p)
        if not sol.is_optimal:
            raise SchemaError(f"bounded feasible LP reported {sol.status}")
        n = p.num_vars
        H = np.vstack([-p.A, np.eye(n)])
        h = np.concatenate([-p.b, np.zeros(n)])
        return {
            "vertex": _relative(sol.objective, vertex_max(p.c, H, h)),
            "slackness": lp_slackness(p, sol.x, sol.duals),
        }

    _run_family(poly, settings.duality_instances, seed, (key, 1), poly_case, threads)
    _run_family(lp, settings.lp_instances, seed, (key, 2), lp_case, threads)

    try:
        problem, block = psd_trace_problem()
        sol = solve_with_psd_cuts(problem, [block])
        psd.record(abs(sol.objective - 2.0))
    except CuError as e:
        psd.record_error("psd", e)
    return [*poly.values(), *lp.values(), psd]


# ---------------------------------------------------------------------------
# aro
# ---------------------------------------------------------------------------

def _box(rng: np.random.Generator, m: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    lo = rng.uniform(-1.0, 0.0, m)
    hi = lo + rng.uniform(0.5, 1.5, m)
    return np.vstack([np.eye(m), -np.eye(m)]), np.concatenate([lo, -hi]), lo, hi


def aro_worst_rows(inst: AroPolyhedralInstance) -> np.ndarray:
    """max over the joint polytope of B_{2,i}'d_2 - [A_22 X_2]_i'd_1, per row, by vertex enumeration."""
    k1, m1 = inst.G1.shape
    k2, m2 = inst.G2.shape
    H = np.block([[inst.G1, np.zeros((k1, m2))], [-inst.Delta, inst.G2]])
    h = np.concatenate([inst.g1, inst.g2])
    V = vertices(H, h)
    if V.shape[0] == 0:
        raise SchemaError("joint polytope has no vertex")
    a = inst.adjustable_terms
    return np.array([float(np.max(V @ np.concatenate([-a[i], inst.B2[i]]))) for i in range(a.shape[0])])


def random_aro_polyhedral(rng: np.random.Generator) -> AroPolyhedralInstance:
    m1 = int(rng.integers(1, 4))
    m2 = int(rng.integers(1, 4))
    rows = int(rng.integers(1, 4))
    n2 = int(rng.integers(1, 3))
    G1, g1, _, _ = _box(rng, m1)
    G2, g2, _, _ = _box(rng, m2)
    D = rng.uniform(-0.5, 0.5, (m2, m1))
    inst = AroPolyhedralInstance(
        A21=np.eye(rows),
        A22=rng.normal(size=(rows, n2)),
        B2=rng.normal(size=(rows, m2)),
        G1=G1, g1=g1, G2=G2, g2=g2,
        Delta=np.vstack([D, -D]),
        X2=rng.normal(size=(n2, m1)),
        x1=np.zeros(rows),
    )
    shift = rng.uniform(-0.5, 0.5, rows)
    shift = np.where(np.abs(shift) < 1e-3, np.copysign(1e-3, shift), shift)
    inst.x1 = aro_worst_rows(inst) + shift
    return inst


def aro_ellipsoidal_oracle(inst: AroEllipsoidalInstance) -> List[float]:
    """Row residuals for m = 1 by evaluating the four endpoint pairs (u_1, u_2) = (+-r_1, +-r_2)."""
    a = inst.A22 @ inst.X2
    out = []
    for i in range(inst.A21.shape[0]):
        best = -np.inf
        for u1, u2 in itertools.product((-inst.r1, inst.r1), (-inst.r2, inst.r2)):
            d1 = inst.mu1 + inst.L1 @ np.array([u1])
            d2 = inst.A2 @ inst.mu1 + inst.F2 @ d1 + inst.c2 + inst.L2 @ np.array([u2])
            best = max(best, float(inst.B2[i] @ d2 - a[i] @ d1 - inst.A21[i] @ inst.x1))
        out.append(best)
    return out


def random_aro_ellipsoidal(rng: np.random.Generator) -> AroEllipsoidalInstance:
    rows = int(rng.integers(1, 4))
    return AroEllipsoidalInstance(
        A21=rng.normal(size=(rows, 2)),
        A22=rng.normal(size=(rows, 1)),
        B2=rng.normal(size=(rows, 1)),
        X2=rng.normal(size=(1, 1)),
        x1=rng.normal(size=2),
        mu1=rng.normal(size=1),
        L1=[[rng.uniform(0.1, 1.5)]],
        L2=[[rng.uniform(0.1, 1.5)]],
        r1=float(rng.uniform(0.0, 2.0)),
        r2=float(rng.uniform(0.0, 2.0)),
        A2=[[rng.uniform(-1.0, 1.0)]],
        F2=[[rng.uniform(-1.0, 1.0)]],
        c2=rng.normal(size=1),
    )


def suite_aro(settings: VerifySettings, seed: int, threads: int = 1) -> List[CheckResult]:
    key = _SUITE_KEYS["aro"]
    poly = {"feasibility": CheckResult("polyhedral_aro_feasibility_mismatch", 0.0)}
    ell = {"rows": CheckResult("ellipsoidal_aro_rows_vs_endpoints", 1e-9)}

    def poly_case(rng: np.random.Generator) -> Dict[str, float]:
        inst = random_aro_polyhedral(rng)
        worst = aro_worst_rows(inst)
        oracle = bool(np.all(worst <= inst.A21 @ inst.x1 + FEASIBILITY_TOL))
        system = aro_polyhedral_system(inst)
        counterpart = system.solve_feasibility().status == "optimal"
        return {"feasibility": float(oracle != counterpart)}

    def ell_case(rng: np.random.Generator) -> Dict[str, float]:
        inst = random_aro_ellipsoidal(rng)
        rows = aro_ellipsoidal_rows(inst)
        oracle = aro_ellipsoidal_oracle(inst)
        return {"rows": max(_relative(a, b) for a, b in zip(oracle, rows))}

    _run_family(poly, settings.aro_instances, seed, (key, 1), poly_case, threads)
    _run_family(ell, settings.aro_instances, seed, (key, 2), ell_case, threads)
    return [*poly.values(), *ell.values()]


# ---------------------------------------------------------------------------
# dro
# ---------------------------------------------------------------------------

def _random_cost(rng: np.random.Generator) -> StageCost:
    if rng.random() < 0.5:
        return StageCost("linear")
    slopes = tuple(sorted(rng.uniform(0.2, 2.0, 2), reverse=True))
    return StageCost("piecewise_min", slopes=slopes, intercepts=(0.0, float(rng.uniform(0.0, 0.5))))


def random_moment_process(rng: np.random.Generator) -> MomentAmbiguityProcess:
    """
    Two-stage, one-dimensional process whose every stage set is feasible.

    Stage 1 admits the uniform distribution (mean mu_1, second moment at
    most Sigma_1); stage 2 includes every conditional center in its support,
    so the point mass there is admissible.
    """
    n1 = int(rng.integers(2, 5))
    s1 = np.unique(np.round(rng.uniform(-1.0, 1.0, n1), 6))
    while s1.shape[0] < 2:
        s1 = np.unique(np.round(rng.uniform(-1.0, 1.0, n1), 6))
    mu1 = float(s1.mean())
    var = float(np.mean((s1 - mu1) ** 2))
    a = float(rng.uniform(-0.5, 0.5))
    b = float(rng.uniform(-0.2, 0.2))
    centers = a * s1 + b
    extra = rng.uniform(-1.0, 1.0, int(rng.integers(1, 3)))
    s2 = np.unique(np.concatenate([centers, extra]))
    if s2.shape[0] < 2:
        s2 = np.concatenate([s2, s2 + 1.0])
    return MomentAmbiguityProcess(
        supports=(s1[:, None], s2[:, None]),
        A=(None, [[a]]),
        b=(None, [b]),
        mu1=[mu1],
        delta=([rng.uniform(0.01, 0.2)], [rng.uniform(0.01, 0.2)]),
        sigma=([[var * rng.uniform(1.0, 2.0) + 1e-3]], [[rng.uniform(0.05, 0.5)]]),
        anchor_mode="conditional",
    )


def _dro_gaps(x, proc: MomentAmbiguityProcess, costs: Sequence[StageCost]) -> Dict[str, float]:
    nested = nested_dro_value(x, proc, costs)
    exact = exact_dual_value(x, proc, costs)
    conservative = conservative_dual_value(x, proc, costs)
    joint = joint_expectation(x, proc, costs, nested.conditionals)
    return {
        "nested_le_exact": nested.value - exact,
        "exact_le_conservative": exact - conservative,
        "joint": abs(joint - nested.value),
    }


def suite_dro(settings: VerifySettings, seed: int, threads: int = 1) -> List[CheckResult]:
    key = _SUITE_KEYS["dro"]
    checks = {
        "nested_le_exact": CheckResult("nested_primal_below_exact_dual", 1e-4),
        "exact_le_conservative": CheckResult("exact_dual_below_conservative_dual", 1e-7),
        "joint": CheckResult("composed_joint_matches_nested", 1e-8),
    }

    try:
        inst = _fixture("moment.json")
        for name, gap in _dro_gaps(inst.require_decision(), inst.process, inst.costs).items():
            checks[name].record(gap)
    except CuError as e:
        for check in checks.values():
            check.record_error("fixture", e)

    def case(rng: np.random.Generator) -> Dict[str, float]:
        proc = random_moment_process(rng)
        x = [rng.uniform(-1.0, 1.0, 1) for _ in range(2)]
        return _dro_gaps(x, proc, [_random_cost(rng), _random_cost(rng)])

    _run_family(checks, settings.dro_instances, seed, (key, 1), case, threads)
    return list(checks.values())


SUITES: Dict[str, Callable[[VerifySettings, int, int], List[CheckResult]]] = {
    "theorem1": suite_theorem1,
    "duality": suite_duality,
    "aro": suite_aro,
    "dro": suite_dro,
}


def run_verify(
    suite: str = "all",
    seed: int = BASE_SEED,
    threads: int = 1,
    settings: Optional[VerifySettings] = None,
) -> Dict[str, Any]:
    """
    Run one suite (or all) and build the gap report.

    Raises:
        SchemaError for an unknown suite name
    """
    if suite not in VERIFY_SUITES:
        raise SchemaError(f"unknown verify suite {suite!r}", {"suites": VERIFY_SUITES})
    settings = settings or VerifySettings()
    names = list(SUITES) if suite == "all" else [suite]
    report: Dict[str, Any] = {"seed": seed, "suites": {}}
    for name in names:
        checks = SUITES[name](settings, seed, threads)
        passed = all(c.passed for c in checks)
        logger.info(f"[verify] {name}: {'PASS' if passed else 'FAIL'} ({len(checks)} checks)")
        report["suites"][name] = {"passed": passed, "checks": [c.to_dict() for c in checks]}
    report["passed"] = all(s["passed"] for s in report["suites"].values())
    return report


def report_to_json(report: Dict[str, Any]) -> str:
    return json.dumps(report, indent=2) + "\n"


def print_report(report: Dict[str, Any]) -> None:
    """Console table of every check."""
    print("\n" + "=" * 90)
    print(f"VERIFY REPORT (seed {report['seed']})")
    print("=" * 90)
    print(f"{'Suite':<10} {'Check':<40} {'N':>6} {'Max gap':>12} {'Tol':>10}  Status")
    print("-" * 90)
    for name, suite in report["suites"].items():
        for check in suite["checks"]:
            gap = "n/a" if check["max_gap"] is None else f"{check['max_gap']:.3e}"
            status = "PASS" if check["passed"] else "FAIL"
            print(f"{name:<10} {check['name']:<40} {check['instances']:>6} {gap:>12} {check['tolerance']:>10.1e}  {status}")
    print("-" * 90)
    print(f"Overall: {'PASS' if report['passed'] else 'FAIL'}")
    print("=" * 90 + "\n")


if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description="CU robust oracle-equivalence checks")
    parser.add_argument("--suite", default="all", choices=VERIFY_SUITES)
    parser.add_argument("--seed", type=int, default=BASE_SEED)
    args = parser.parse_args()
    print_report(run_verify(args.suite, args.seed))
