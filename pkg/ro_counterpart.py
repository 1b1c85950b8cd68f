"""
Robust counterparts for connected-uncertainty constraints.

Given a here-and-now plan x_1..x_T and a budget B, the robust constraint
    sum_t d_t' x_t <= B   for every path d_t in U_t(d_{t-1})
is replaced by a deterministic counterpart:
- center-dependent ellipsoids: closed-form recursion (center_cu_lhs) or an
  explicit SOC system in x (center_cu_system)
- covariance-dependent ellipsoids: conservative bound maximized over sign
  vectors (matrix_cu_lhs)
- RHS-dependent polyhedra: LP dual system (polyhedral_cu_dual_system)
- two-period adjustable versions with affine rules x_2 = X_2 d_1
  (aro_polyhedral_system, aro_ellipsoidal_rows)

Each counterpart has an independent worst-case oracle used for checking.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import FEASIBILITY_TOL, MAX_SIGN_HORIZON
from cu_sets import EllipsoidalCuProcess, MatrixCuProcess, PolyhedralCuProcess
from errors import (
    DimensionMismatch,
    HorizonTooLarge,
    LpInfeasible,
    LpUnbounded,
    ModeUnsupportedForDimension,
    SchemaError,
)
from lp_core import LpBuilder, LpProblem, LpSolution, solve_lp
from numerics import as_matrix, as_vector, cholesky, keyed_rng

logger = logging.getLogger(__name__)


def _plan(x: Sequence, periods: int, dim: int) -> List[np.ndarray]:
    if len(x) != periods:
        raise DimensionMismatch(f"plan needs {periods} vectors, got {len(x)}")
    return [as_vector(v, dim, name=f"x[{t}]") for t, v in enumerate(x)]


# ---------------------------------------------------------------------------
# Constraint systems
# ---------------------------------------------------------------------------

@dataclass
class Affine:
    """constant + sum coeffs[name] * var[name]"""
    coeffs: Dict[str, float] = field(default_factory=dict)
    constant: float = 0.0

    def value(self, values: Dict[str, float]) -> float:
        return self.constant + sum(v * values[k] for k, v in self.coeffs.items())

    def to_dict(self) -> Dict:
        return {"coeffs": dict(self.coeffs), "constant": self.constant}


@dataclass
class LinearRow:
    name: str
    coeffs: Dict[str, float]
    sense: str
    rhs: float

    def residual(self, values: Dict[str, float]) -> float:
        lhs = sum(v * values[k] for k, v in self.coeffs.items())
        if self.sense == "<=":
            return lhs - self.rhs
        if self.sense == ">=":
            return self.rhs - lhs
        return abs(lhs - self.rhs)

    def to_dict(self) -> Dict:
        return {"name": self.name, "coeffs": dict(self.coeffs), "sense": self.sense, "rhs": self.rhs}


@dataclass
class SocRow:
    """||body|| <= head"""
    name: str
    head: Affine
    body: List[Affine]

    def residual(self, values: Dict[str, float]) -> float:
        norm = float(np.linalg.norm([a.value(values) for a in self.body])) if self.body else 0.0
        return norm - self.head.value(values)

    def to_dict(self) -> Dict:
        return {"name": self.name, "head": self.head.to_dict(), "body": [a.to_dict() for a in self.body]}


SIGN_BOUNDS = {
    "free": (-np.inf, np.inf),
    "<=0": (-np.inf, 0.0),
    ">=0": (0.0, np.inf),
}


class ConstraintSystem:
    """
    Named variables with linear rows, second-order-cone rows and sign constraints.

    The JSON form keeps declaration order everywhere and omits zero
    coefficients, so emitting the same system twice is byte-identical.
    """

    def __init__(self):
        self.variables: List[str] = []
        self.signs: Dict[str, str] = {}
        self.linear: List[LinearRow] = []
        self.soc: List[SocRow] = []

    def add_variable(self, name: str, sign: str = "free") -> str:
        if sign not in SIGN_BOUNDS:
            raise SchemaError(f"unknown sign constraint {sign!r}")
        if name in self.signs:
            raise SchemaError(f"duplicate variable {name}")
        self.variables.append(name)
        self.signs[name] = sign
        return name

    def _clean(self, coeffs: Dict[str, float]) -> Dict[str, float]:
        out: Dict[str, float] = {}
        for k, v in coeffs.items():
            if k not in self.signs:
                raise SchemaError(f"row references undeclared variable {k}")
            if v != 0.0:
                out[k] = float(v)
        return out

    def add_linear(self, name: str, coeffs: Dict[str, float], sense: str, rhs: float) -> LinearRow:
        if sense not in ("<=", ">=", "="):
            raise SchemaError(f"unknown sense {sense!r}")
        row = LinearRow(name, self._clean(coeffs), sense, float(rhs))
        self.linear.append(row)
        return row

    def add_soc(self, name: str, head: Affine, body: Sequence[Affine]) -> SocRow:
        head = Affine(self._clean(head.coeffs), float(head.constant))
        body = [Affine(self._clean(a.coeffs), float(a.constant)) for a in body]
        row = SocRow(name, head, body)
        self.soc.append(row)
        return row

    def residuals(self, values: Dict[str, float]) -> Dict[str, float]:
        """Violation per row and per sign constraint (<= 0 means satisfied)."""
        out: Dict[str, float] = {}
        for row in self.linear:
            out[row.name] = row.residual(values)
        for row in self.soc:
            out[row.name] = row.residual(values)
        for name, sign in self.signs.items():
            if sign == "<=0":
                out[f"sign:{name}"] = values[name]
            elif sign == ">=0":
                out[f"sign:{name}"] = -values[name]
        return out

    def is_feasible(self, values: Dict[str, float], tol: float = FEASIBILITY_TOL) -> bool:
        return all(r <= tol for r in self.residuals(values).values())

    def to_lp_problem(self, objective: Optional[Dict[str, float]] = None, sense: str = "min") -> LpProblem:
        """Linear part as an LP; systems with cone rows cannot be converted."""
        if self.soc:
            raise SchemaError("system has second-order-cone rows; no LP form")
        builder = LpBuilder(sense)
        for name in self.variables:
            lo, hi = SIGN_BOUNDS[self.signs[name]]
            builder.add_variable(name, lo, hi, (objective or {}).get(name, 0.0))
        for row in self.linear:
            builder.add_row({builder.index(k): v for k, v in row.coeffs.items()}, row.sense, row.rhs, row.name)
        return builder.build()

    def solve_feasibility(self) -> LpSolution:
        """Phase-1 style check: minimize 0 over the system."""
        return solve_lp(self.to_lp_problem())

    def values_from(self, x: np.ndarray) -> Dict[str, float]:
        return {name: float(x[i]) for i, name in enumerate(self.variables)}

    def to_dict(self) -> Dict:
        return {
            "variables": list(self.variables),
            "linear": [r.to_dict() for r in self.linear],
            "soc": [r.to_dict() for r in self.soc],
            "signs": dict(self.signs),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc: Dict) -> "ConstraintSystem":
        try:
            system = cls()
            signs = doc.get("signs", {})
            for name in doc["variables"]:
                system.add_variable(name, signs.get(name, "free"))
            for row in doc["linear"]:
                system.add_linear(row.get("name", ""), row["coeffs"], row["sense"], row["rhs"])
            for row in doc.get("soc", []):
                head = Affine(row["head"]["coeffs"], row["head"].get("constant", 0.0))
                body = [Affine(a["coeffs"], a.get("constant", 0.0)) for a in row["body"]]
                system.add_soc(row.get("name", ""), head, body)
        except (KeyError, TypeError) as e:
            raise SchemaError(f"malformed constraint system: {e}")
        return system


# ---------------------------------------------------------------------------
# Center-dependent ellipsoids
# ---------------------------------------------------------------------------

@dataclass
class CenterCuRecursion:
    """Backward recursion y_k, C_k, R_k of the center-dependent counterpart."""
    y: List[np.ndarray]
    C: np.ndarray
    R: np.ndarray

    def to_dict(self) -> Dict:
        return {"y": [v.tolist() for v in self.y], "C": self.C.tolist(), "R": self.R.tolist()}


def center_cu_lhs(x: Sequence, proc: EllipsoidalCuProcess) -> Tuple[float, CenterCuRecursion]:
    """
    Left-hand side mu_1'y_1 + C_1 + R_1 of the center-dependent counterpart.

    Recursion from T down to 1:
        y_T = x_T,  C_T = 0,  R_T = r_T ||L_T' x_T||
        y_k = x_k + (F_k + A_k)' y_{k+1}
        C_k = c_k' y_{k+1} + C_{k+1}
        R_k = r_k ||L_k' (x_k + F_k' y_{k+1})|| + R_{k+1}

    The plan is feasible for budget B iff lhs <= B + 1e-9.
    """
    T = proc.periods
    xs = _plan(x, T, proc.dim)
    y: List[Optional[np.ndarray]] = [None] * T
    C = np.zeros(T)
    R = np.zeros(T)
    y[T - 1] = xs[T - 1].copy()
    R[T - 1] = proc.radii[T - 1] * np.linalg.norm(proc.chol[T - 1].T @ xs[T - 1])
    for k in range(T - 2, -1, -1):
        nxt = y[k + 1]
        y[k] = xs[k] + (proc.F[k] + proc.A[k]).T @ nxt
        C[k] = proc.c[k] @ nxt + C[k + 1]
        R[k] = proc.radii[k] * np.linalg.norm(proc.chol[k].T @ (xs[k] + proc.F[k].T @ nxt)) + R[k + 1]
    lhs = float(proc.mu1 @ y[0] + C[0] + R[0])
    return lhs, CenterCuRecursion(list(y), C, R)


def center_cu_system(proc: EllipsoidalCuProcess, budget: float) -> ConstraintSystem:
    """
    The center-dependent counterpart as an SOC system in the plan x.

    Variables x[t][j] (free) and epigraph variables s[k] >= 0;
        mu_1'y_1(x) + C_1(x) + sum_k s[k] <= B
        ||r_k L_k'(x_k + F_k' y_{k+1}(x))|| <= s[k]
    """
    T, m = proc.periods, proc.dim
    system = ConstraintSystem()
    xnames = [[system.add_variable(f"x[{t + 1}][{j + 1}]") for j in range(m)] for t in range(T)]
    snames = [system.add_variable(f"s[{k + 1}]", ">=0") for k in range(T)]

    # Y[k][t]: y_k = sum_{t >= k} Y[k][t] x_t
    Y: List[Dict[int, np.ndarray]] = [dict() for _ in range(T)]
    Y[T - 1][T - 1] = np.eye(m)
    for k in range(T - 2, -1, -1):
        Y[k][k] = np.eye(m)
        step = (proc.F[k] + proc.A[k]).T
        for t, M in Y[k + 1].items():
            Y[k][t] = step @ M

    def linear_in_x(weights: Dict[int, np.ndarray]) -> Dict[str, float]:
        """weights[t] is a row vector (or matrix row) acting on x_t."""
        out: Dict[str, float] = {}
        for t in sorted(weights):
            for j in range(m):
                out[xnames[t][j]] = out.get(xnames[t][j], 0.0) + float(weights[t][j])
        return out

    budget_w: Dict[int, np.ndarray] = {t: proc.mu1 @ M for t, M in Y[0].items()}
    for k in range(T - 1):
        for t, M in Y[k + 1].items():
            budget_w[t] = budget_w.get(t, np.zeros(m)) + proc.c[k] @ M
    coeffs = linear_in_x(budget_w)
    for s in snames:
        coeffs[s] = 1.0
    system.add_linear("budget", coeffs, "<=", budget)

    for k in range(T):
        # z_k = x_k + F_k' y_{k+1} as a map on x
        z: Dict[int, np.ndarray] = {k: np.eye(m)}
        if k < T - 1:
            for t, M in Y[k + 1].items():
                z[t] = z.get(t, np.zeros((m, m))) + proc.F[k].T @ M
        scaled = {t: proc.radii[k] * proc.chol[k].T @ M for t, M in z.items()}
        body = [Affine(linear_in_x({t: M[i] for t, M in scaled.items()})) for i in range(m)]
        system.add_soc(f"norm[{k + 1}]", Affine({snames[k]: 1.0}), body)
    return system


def center_system_point(x: Sequence, proc: EllipsoidalCuProcess) -> Dict[str, float]:
    """Values for center_cu_system with every epigraph variable tight."""
    T, m = proc.periods, proc.dim
    xs = _plan(x, T, m)
    _, trace = center_cu_lhs(xs, proc)
    values = {f"x[{t + 1}][{j + 1}]": float(xs[t][j]) for t in range(T) for j in range(m)}
    for k in range(T):
        values[f"s[{k + 1}]"] = float(trace.R[k] - (trace.R[k + 1] if k + 1 < T else 0.0))
    return values


def _exact1d(xs: List[np.ndarray], proc: EllipsoidalCuProcess) -> float:
    T = proc.periods

    def value(t: int, mu: float) -> float:
        half = proc.radii[t] * abs(proc.chol[t][0, 0])
        if t == T - 1:
            return mu * xs[t][0] + half * abs(xs[t][0])
        best = -np.inf
        for d in (mu - half, mu + half):
            nxt = proc.A[t][0, 0] * mu + proc.F[t][0, 0] * d + proc.c[t][0]
            best = max(best, d * xs[t][0] + value(t + 1, nxt))
        return best

    return float(value(0, float(proc.mu1[0])))


def _sphere(rng: np.random.Generator, n: int, m: int, radius: float) -> np.ndarray:
    u = rng.standard_normal((n, m))
    norms = np.linalg.norm(u, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return radius * u / norms


def _monte_carlo(xs: List[np.ndarray], proc: EllipsoidalCuProcess, samples: int, seed: int) -> float:
    T, m = proc.periods, proc.dim
    mu = np.tile(proc.mu1, (samples, 1))
    total = np.zeros(samples)
    for t in range(T):
        d = mu + _sphere(keyed_rng(seed, t + 1), samples, m, proc.radii[t]) @ proc.chol[t].T
        total += d @ xs[t]
        if t < T - 1:
            mu = mu @ proc.A[t].T + d @ proc.F[t].T + proc.c[t]
    return float(np.max(total))


def nested_worst_case_oracle(
    x: Sequence,
    proc: EllipsoidalCuProcess,
    mode: str = "exact1d",
    samples: int = 100_000,
    seed: int = 0,
) -> float:
    """
    Nested worst case of sum_t d_t'x_t over the connected ellipsoids.

    Args:
        mode: "exact1d" (m = 1 only) maximizes each stage over the interval
            endpoints, which is exact since every stage value is convex in
            d_t; "monte_carlo" samples u_t on the radius-r_t spheres and
            returns the best sampled path, a lower bound
        samples: Monte Carlo path count
        seed: Monte Carlo stream key

    Raises:
        ModeUnsupportedForDimension
    """
    xs = _plan(x, proc.periods, proc.dim)
    if mode == "exact1d":
        if proc.dim != 1:
            raise ModeUnsupportedForDimension("exact1d requires dimension 1", {"dim": proc.dim})
        return _exact1d(xs, proc)
    if mode == "monte_carlo":
        return _monte_carlo(xs, proc, samples, seed)
    raise ModeUnsupportedForDimension(f"unknown oracle mode {mode!r}")


# ---------------------------------------------------------------------------
# Covariance-dependent ellipsoids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SignVector:
    """Signs n_{k,t} for 1 <= k < t <= T in lexicographic (k, t) order."""
    periods: int
    entries: Tuple[int, ...]

    def __post_init__(self):
        expected = self.periods * (self.periods - 1) // 2
        if len(self.entries) != expected:
            raise DimensionMismatch(f"sign vector needs {expected} entries, got {len(self.entries)}")

    def get(self, k: int, t: int) -> int:
        """n_{k,t} with 1-based periods; n_{t,t} = 1."""
        if k == t:
            return 1
        return self.entries[_pair_index(self.periods, k, t)]

    def to_dict(self) -> Dict:
        return {f"{k},{t}": self.get(k, t) for k, t in _pairs(self.periods)}


def _pairs(T: int) -> List[Tuple[int, int]]:
    return [(k, t) for k in range(1, T + 1) for t in range(k + 1, T + 1)]


def _pair_index(T: int, k: int, t: int) -> int:
    # pairs before row k, then offset within row k
    before = sum(T - j for j in range(1, k))
    return before + (t - k - 1)


def enumerate_sign_vectors(T: int) -> List[SignVector]:
    """
    All 2^{T(T-1)/2} sign vectors in lexicographic order (-1 before +1).

    Raises:
        HorizonTooLarge for T > 5
    """
    if T < 1:
        raise DimensionMismatch("horizon must be at least 1")
    if T > MAX_SIGN_HORIZON:
        raise HorizonTooLarge(f"sign enumeration capped at T = {MAX_SIGN_HORIZON}", {"periods": T})
    count = T * (T - 1) // 2
    return [SignVector(T, tuple(signs)) for signs in itertools.product((-1, 1), repeat=count)]


def _growth(a: np.ndarray, k: int, t: int) -> float:
    """A_{k,t} = prod_{j=k}^{t-1} a_j (1-based), A_{t,t} = 1."""
    return float(np.prod(a[k - 1:t - 1])) if t > k else 1.0


def _matrix_lhs_for(xs: List[np.ndarray], proc: MatrixCuProcess, L1: np.ndarray, n: SignVector) -> float:
    T = proc.periods
    y: List[Optional[np.ndarray]] = [None] * (T + 1)
    y[T] = xs[T - 1]
    for k in range(T - 1, 0, -1):
        acc = xs[k - 1].copy()
        for t in range(k + 1, T + 1):
            scale = proc.radii[t - 1] * np.sqrt(_growth(proc.a, k + 1, t) * proc.f[k - 1])
            acc = acc + n.get(k, t) * scale * y[t]
        y[k] = acc

    R = 0.0
    for k in range(1, T):
        Ck = proc.C[k - 1]
        for t in range(k + 1, T + 1):
            quad = max(float(y[t] @ Ck @ y[t]), 0.0)
            R += proc.radii[t - 1] * np.sqrt(_growth(proc.a, k + 1, t) * quad)

    total = sum(float(proc.means[t] @ xs[t]) for t in range(T))
    for t in range(1, T + 1):
        total += proc.radii[t - 1] * np.sqrt(_growth(proc.a, 1, t)) * float(np.linalg.norm(L1.T @ y[t]))
    return total + R


def matrix_cu_lhs(x: Sequence, proc: MatrixCuProcess) -> Tuple[float, SignVector]:
    """
    Conservative counterpart left-hand side for covariance-dependent ellipsoids.

    Evaluated for every sign vector; the constraint must hold for all of
    them, so the maximum and its (lexicographically first) maximizer are
    returned.

    Raises:
        HorizonTooLarge, DimensionMismatch
    """
    xs = _plan(x, proc.periods, proc.dim)
    signs = enumerate_sign_vectors(proc.periods)
    L1 = cholesky(proc.sigma1)
    best, arg = -np.inf, signs[0]
    for n in signs:
        value = _matrix_lhs_for(xs, proc, L1, n)
        if value > best:
            best, arg = value, n
    return float(best), arg


def _psd_factor(S: np.ndarray) -> np.ndarray:
    """Batched factor F with F F' = S for stacked PSD matrices."""
    w, V = np.linalg.eigh(S)
    return V * np.sqrt(np.clip(w, 0.0, None))[..., None, :]


def matrix_worst_case_oracle(x: Sequence, proc: MatrixCuProcess, samples: int = 100_000, seed: int = 0) -> float:
    """Best sampled path of the covariance-updated ellipsoids; a lower bound on the nested worst case."""
    T, m = proc.periods, proc.dim
    xs = _plan(x, T, m)
    sigma = np.broadcast_to(proc.sigma1, (samples, m, m)).copy()
    total = np.zeros(samples)
    for t in range(T):
        u = _sphere(keyed_rng(seed, t + 1), samples, m, proc.radii[t])
        d = proc.means[t] + np.einsum("nij,nj->ni", _psd_factor(sigma), u)
        total += d @ xs[t]
        if t < T - 1:
            dev = d - proc.means[t]
            sigma = proc.a[t] * sigma + proc.f[t] * np.einsum("ni,nj->nij", dev, dev) + proc.C[t]
    return float(np.max(total))


# ---------------------------------------------------------------------------
# RHS-dependent polyhedra
# ---------------------------------------------------------------------------

def _q(t: int, i: int) -> str:
    return f"q[{t}][{i}]"


def _dual_system_rows(xs: List[np.ndarray], proc: PolyhedralCuProcess) -> ConstraintSystem:
    T, m = proc.periods, proc.dim
    system = ConstraintSystem()
    for t in range(1, T + 1):
        for i in range(1, proc.G[t - 1].shape[0] + 1):
            system.add_variable(_q(t, i), "<=0")
    for t in range(1, T + 1):
        Gt = proc.G[t - 1]
        for j in range(m):
            coeffs: Dict[str, float] = {}
            for i in range(Gt.shape[0]):
                coeffs[_q(t, i + 1)] = float(Gt[i, j])
            if t < T:
                D = proc.Delta[t]
                for i in range(D.shape[0]):
                    coeffs[_q(t + 1, i + 1)] = -float(D[i, j])
            system.add_linear(f"balance[{t}][{j + 1}]", coeffs, "=", float(xs[t - 1][j]))
    return system


def _dual_objective(proc: PolyhedralCuProcess) -> Dict[str, float]:
    out: Dict[str, float] = {}
    for t in range(1, proc.periods + 1):
        for i, gi in enumerate(proc.g[t - 1]):
            out[_q(t, i + 1)] = float(gi)
    return out


def polyhedral_cu_dual_system(x: Sequence, proc: PolyhedralCuProcess, budget: float) -> ConstraintSystem:
    """
    Dual counterpart for RHS-dependent polyhedra, in variables q_1..q_T <= 0:
        G_t' q_t - Delta_{t+1}' q_{t+1} = x_t     (Delta_{T+1} = 0)
        sum_t q_t' g_t <= B
    """
    xs = _plan(x, proc.periods, proc.dim)
    system = _dual_system_rows(xs, proc)
    system.add_linear("budget", _dual_objective(proc), "<=", budget)
    return system


def polyhedral_cu_feasible(x: Sequence, proc: PolyhedralCuProcess, budget: float) -> bool:
    """Phase-1 feasibility of the dual counterpart."""
    return polyhedral_cu_dual_system(x, proc, budget).solve_feasibility().status == "optimal"


def polyhedral_dual_bound(x: Sequence, proc: PolyhedralCuProcess) -> Tuple[float, Dict[str, float]]:
    """min sum_t q_t'g_t over the dual system without the budget row."""
    xs = _plan(x, proc.periods, proc.dim)
    system = _dual_system_rows(xs, proc)
    sol = solve_lp(system.to_lp_problem(_dual_objective(proc), "min"))
    if sol.status == "infeasible":
        raise LpUnbounded("dual infeasible: the worst case is unbounded")
    if sol.status == "unbounded":
        raise LpInfeasible("dual unbounded: the uncertainty set is empty")
    return sol.objective, system.values_from(sol.x)


def worst_case_lp(x: Sequence, proc: PolyhedralCuProcess) -> LpProblem:
    """max sum_t x_t'd_t over the joint polyhedron, variables d[t][j] free."""
    T, m = proc.periods, proc.dim
    xs = _plan(x, T, m)
    builder = LpBuilder("max")
    cols = [[builder.add_variable(f"d[{t + 1}][{j + 1}]", -np.inf, np.inf, xs[t][j]) for j in range(m)]
            for t in range(T)]
    for t in range(T):
        Gt, gt = proc.G[t], proc.g[t]
        for i in range(Gt.shape[0]):
            coeffs: Dict[int, float] = {}
            for j in range(m):
                if Gt[i, j] != 0.0:
                    coeffs[cols[t][j]] = float(Gt[i, j])
                if t > 0 and proc.Delta[t][i, j] != 0.0:
                    coeffs[cols[t - 1][j]] = -float(proc.Delta[t][i, j])
            builder.add_row(coeffs, ">=", float(gt[i]), f"stage[{t + 1}][{i + 1}]")
    return builder.build()


def polyhedral_worst_case(x: Sequence, proc: PolyhedralCuProcess) -> Tuple[float, List[np.ndarray]]:
    """
    Worst case of sum_t d_t'x_t over the joint polyhedron, and a maximizing path.

    Raises:
        LpUnbounded, LpInfeasible
    """
    T, m = proc.periods, proc.dim
    sol = solve_lp(worst_case_lp(x, proc))
    if sol.status == "unbounded":
        raise LpUnbounded("worst case is unbounded; the set invariant is violated")
    if sol.status == "infeasible":
        raise LpInfeasible("joint polyhedron is empty")
    path = [sol.x[t * m:(t + 1) * m].copy() for t in range(T)]
    return sol.objective, path


# ---------------------------------------------------------------------------
# Two-period adjustable counterparts, x_2(d_1) = X_2 d_1
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class AroPolyhedralInstance:
    """
    Rows i of A_21 x_1 + A_22 x_2(d_1) >= B_2 d_2 over
    G_1 d_1 >= g_1, G_2 d_2 >= g_2 + Delta d_1; optionally A_11 x_1 >= B_1 d_1.
    """
    A21: np.ndarray
    A22: np.ndarray
    B2: np.ndarray
    G1: np.ndarray
    g1: np.ndarray
    G2: np.ndarray
    g2: np.ndarray
    Delta: np.ndarray
    X2: np.ndarray
    x1: np.ndarray
    A11: Optional[np.ndarray] = None
    B1: Optional[np.ndarray] = None

    def __post_init__(self):
        self.x1 = as_vector(self.x1, name="x1")
        n1 = self.x1.shape[0]
        self.G1 = as_matrix(self.G1, name="G1")
        k1, m1 = self.G1.shape
        self.g1 = as_vector(self.g1, k1, name="g1")
        self.G2 = as_matrix(self.G2, name="G2")
        k2, m2 = self.G2.shape
        self.g2 = as_vector(self.g2, k2, name="g2")
        self.Delta = as_matrix(self.Delta, k2, m1, name="Delta")
        self.A21 = as_matrix(self.A21, cols=n1, name="A21")
        rows = self.A21.shape[0]
        self.A22 = as_matrix(self.A22, rows=rows, name="A22")
        self.X2 = as_matrix(self.X2, self.A22.shape[1], m1, name="X2")
        self.B2 = as_matrix(self.B2, rows, m2, name="B2")
        if (self.A11 is None) != (self.B1 is None):
            raise DimensionMismatch("A11 and B1 must be given together")
        if self.A11 is not None:
            self.A11 = as_matrix(self.A11, cols=n1, name="A11")
            self.B1 = as_matrix(self.B1, self.A11.shape[0], m1, name="B1")

    @property
    def adjustable_terms(self) -> np.ndarray:
        """Rows [A_22 X_2]_i acting on d_1."""
        return self.A22 @ self.X2


def aro_polyhedral_system(inst: AroPolyhedralInstance, rows: Optional[Sequence[int]] = None) -> ConstraintSystem:
    """
    Dual system of the two-period polyhedral ARO constraints.

    For each uncertain row i (0-based in `rows`, default all), dual vectors
    P[i] (k_1 entries) and Q[i] (k_2 entries), both <= 0:
        G_1'P_i - Delta'Q_i = -[A_22 X_2]_i
        G_2'Q_i = B_{2,i}
        P_i'g_1 + Q_i'g_2 <= A_{21,i}'x_1
    Rows without uncertainty become constant rows 0 <= A_{21,i}'x_1.
    """
    k1, m1 = inst.G1.shape
    k2, m2 = inst.G2.shape
    a = inst.adjustable_terms
    rhs = inst.A21 @ inst.x1
    system = ConstraintSystem()
    selected = list(range(inst.A21.shape[0])) if rows is None else list(rows)

    for i in selected:
        label = i + 1
        if not np.any(a[i]) and not np.any(inst.B2[i]):
            system.add_linear(f"row[{label}]", {}, "<=", float(rhs[i]))
            continue
        P = [system.add_variable(f"P[{label}][{r + 1}]", "<=0") for r in range(k1)]
        Q = [system.add_variable(f"Q[{label}][{r + 1}]", "<=0") for r in range(k2)]
        for j in range(m1):
            coeffs = {P[r]: float(inst.G1[r, j]) for r in range(k1)}
            coeffs.update({Q[r]: -float(inst.Delta[r, j]) for r in range(k2)})
            system.add_linear(f"stage1[{label}][{j + 1}]", coeffs, "=", -float(a[i, j]))
        for j in range(m2):
            coeffs = {Q[r]: float(inst.G2[r, j]) for r in range(k2)}
            system.add_linear(f"stage2[{label}][{j + 1}]", coeffs, "=", float(inst.B2[i, j]))
        coeffs = {P[r]: float(inst.g1[r]) for r in range(k1)}
        coeffs.update({Q[r]: float(inst.g2[r]) for r in range(k2)})
        system.add_linear(f"row[{label}]", coeffs, "<=", float(rhs[i]))

    if inst.A11 is not None:
        first = inst.A11 @ inst.x1
        for i in range(inst.A11.shape[0]):
            label = i + 1
            if not np.any(inst.B1[i]):
                system.add_linear(f"first_row[{label}]", {}, "<=", float(first[i]))
                continue
            p = [system.add_variable(f"p[{label}][{r + 1}]", "<=0") for r in range(k1)]
            for j in range(m1):
                coeffs = {p[r]: float(inst.G1[r, j]) for r in range(k1)}
                system.add_linear(f"first[{label}][{j + 1}]", coeffs, "=", float(inst.B1[i, j]))
            coeffs = {p[r]: float(inst.g1[r]) for r in range(k1)}
            system.add_linear(f"first_row[{label}]", coeffs, "<=", float(first[i]))
    return system


@dataclass(eq=False)
class AroEllipsoidalInstance:
    """
    Rows of A_21 x_1 + A_22 X_2 d_1 >= B_2 d_2 over
    d_1 = mu_1 + L_1 u_1, d_2 = A_2 mu_1 + F_2 d_1 + c_2 + L_2 u_2, ||u_t|| <= r_t.
    """
    A21: np.ndarray
    A22: np.ndarray
    B2: np.ndarray
    X2: np.ndarray
    x1: np.ndarray
    mu1: np.ndarray
    L1: np.ndarray
    L2: np.ndarray
    r1: float
    r2: float
    A2: np.ndarray
    F2: np.ndarray
    c2: np.ndarray

    def __post_init__(self):
        self.x1 = as_vector(self.x1, name="x1")
        self.mu1 = as_vector(self.mu1, name="mu1")
        m = self.mu1.shape[0]
        self.A21 = as_matrix(self.A21, cols=self.x1.shape[0], name="A21")
        rows = self.A21.shape[0]
        self.A22 = as_matrix(self.A22, rows=rows, name="A22")
        self.X2 = as_matrix(self.X2, self.A22.shape[1], m, name="X2")
        self.B2 = as_matrix(self.B2, rows, m, name="B2")
        self.L1 = as_matrix(self.L1, m, m, name="L1")
        self.L2 = as_matrix(self.L2, m, m, name="L2")
        self.A2 = as_matrix(self.A2, m, m, name="A2")
        self.F2 = as_matrix(self.F2, m, m, name="F2")
        self.c2 = as_vector(self.c2, m, name="c2")


def aro_ellipsoidal_rows(inst: AroEllipsoidalInstance) -> List[float]:
    """
    Residual per row (worst case of B_{2,i}'d_2 - [A_22 X_2]_i'd_1 minus A_{21,i}'x_1):
        B_{2,i}'(A_2 mu_1 + F_2 mu_1 + c_2) - [A_22 X_2]_i' mu_1
        + r_2 ||L_2' B_{2,i}|| + r_1 ||L_1'(F_2' B_{2,i} - [A_22 X_2]_i)||
        - A_{21,i}' x_1
    Feasible iff every residual is <= 1e-9.
    """
    a = inst.A22 @ inst.X2
    center2 = inst.A2 @ inst.mu1 + inst.F2 @ inst.mu1 + inst.c2
    out = []
    for i in range(inst.A21.shape[0]):
        b = inst.B2[i]
        value = (
            b @ center2
            - a[i] @ inst.mu1
            + inst.r2 * np.linalg.norm(inst.L2.T @ b)
            + inst.r1 * np.linalg.norm(inst.L1.T @ (inst.F2.T @ b - a[i]))
            - inst.A21[i] @ inst.x1
        )
        out.append(float(value))
    return out
