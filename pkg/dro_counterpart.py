"""
Finite-support moment problems for the CU robust toolkit.

Each stage set holds every distribution on a finite support Xi_t with
    mu - delta <= E[d] <= mu + delta,   E[(d - mu0)(d - mu0)'] <= Sigma
where mu may depend on the previous realization. This module provides:
- moment_sup_lp: worst-case expectation over one stage set, with duals
- nested_dro_value: the stagewise backward recursion and its conditionals
- exact_dual_value: one LP whose duals are indexed by the previous point
- conservative_dual_value: the same with one dual copy per stage
- dro_report: all three plus gaps and cut counts
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import (
    CUT_DUPLICATE_COSINE,
    MAX_CUT_ITERATIONS,
    MOMENT_STRICT_SLACK,
    PSD_TOL,
)
from cu_sets import MomentAmbiguityProcess
from errors import CutLimitExceeded, InfeasibleMomentSet, InvalidProcess, LpInfeasible, SchemaError
from lp_core import LpBuilder, LpProblem, PsdBlock, solve_lp, solve_with_psd_cuts
from numerics import as_matrix, as_vector, min_eigenvalue

logger = logging.getLogger(__name__)

SUP = "sup"
INF = "inf"


@dataclass
class DiscreteDistribution:
    """Masses on support indices of one period."""
    support: Tuple[int, ...]
    masses: np.ndarray

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float)
        if len(self.support) != self.masses.shape[0]:
            raise SchemaError("one mass per support index required")
        if np.any(self.masses < -1e-12):
            raise InvalidProcess("negative probability mass")
        if abs(float(self.masses.sum()) - 1.0) > 1e-9:
            raise InvalidProcess(f"masses sum to {self.masses.sum():.12f}")

    def expectation(self, values: np.ndarray) -> float:
        return float(self.masses @ np.asarray(values, dtype=float)[list(self.support)])

    def to_dict(self) -> Dict:
        return {"support": list(self.support), "masses": [float(v) for v in self.masses]}


@dataclass(eq=False)
class StageMomentSet:
    """One stage slice: support points, conditional center, slack, anchor and covariance cap."""
    points: np.ndarray
    center: np.ndarray
    delta: np.ndarray
    anchor: np.ndarray
    sigma: np.ndarray
    validate: bool = field(default=False, repr=False)

    def __post_init__(self):
        self.center = as_vector(self.center, name="center")
        m = self.center.shape[0]
        self.points = as_matrix(np.asarray(self.points, dtype=float).reshape(-1, m), cols=m, name="points")
        self.delta = as_vector(self.delta, m, name="delta")
        self.anchor = as_vector(self.anchor, m, name="anchor")
        self.sigma = as_matrix(self.sigma, m, m, name="sigma")
        if self.validate:
            moment_sup_lp(np.zeros(self.size), self)

    @property
    def dim(self) -> int:
        return int(self.center.shape[0])

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    def deviations(self) -> np.ndarray:
        return self.points - self.anchor

    def moment_residuals(self, masses: np.ndarray) -> Dict[str, float]:
        """Violation of the mean box and of the covariance cap (lambda_min of Sigma - S)."""
        mean = masses @ self.points
        dev = self.deviations()
        S = (dev * masses[:, None]).T @ dev
        lam, _ = min_eigenvalue(0.5 * ((self.sigma - S) + (self.sigma - S).T))
        return {
            "mass": abs(float(masses.sum()) - 1.0),
            "mean_hi": float(np.max(mean - self.center - self.delta)),
            "mean_lo": float(np.max(self.center - self.delta - mean)),
            "covariance": max(0.0, -lam),
        }


@dataclass(frozen=True)
class StageCost:
    """
    Stage cost h_t(x_t, d) evaluated on support points.

    kinds:
        linear         scale * d'x
        absolute       scale * |d'x|
        piecewise_min  min_k (slopes[k] * d'x + intercepts[k])
        function       fn(x, d) per point
    """
    kind: str = "linear"
    scale: float = 1.0
    slopes: Tuple[float, ...] = ()
    intercepts: Tuple[float, ...] = ()
    fn: Optional[Callable[[np.ndarray, np.ndarray], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("linear", "absolute", "piecewise_min", "function"):
            raise SchemaError(f"unknown stage cost kind {self.kind!r}")
        if self.kind == "piecewise_min" and (not self.slopes or len(self.slopes) != len(self.intercepts)):
            raise SchemaError("piecewise_min needs matching slopes and intercepts")
        if self.kind == "function" and self.fn is None:
            raise SchemaError("function cost needs fn")

    def values(self, x, points: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if self.kind == "function":
            return np.array([float(self.fn(x, p)) for p in points])
        r = points @ x
        if self.kind == "linear":
            out = self.scale * r
        elif self.kind == "absolute":
            out = self.scale * np.abs(r)
        else:
            a = np.asarray(self.slopes, dtype=float)
            b = np.asarray(self.intercepts, dtype=float)
            out = np.min(np.outer(r, a) + b, axis=1)
        if not np.all(np.isfinite(out)):
            raise InvalidProcess("stage cost is not finite on the support")
        return out

    def to_dict(self) -> Dict:
        if self.kind == "piecewise_min":
            return {"kind": self.kind, "slopes": list(self.slopes), "intercepts": list(self.intercepts)}
        if self.kind == "function":
            raise SchemaError("function costs are not serializable")
        return {"kind": self.kind, "scale": self.scale}

    @classmethod
    def from_dict(cls, doc: Dict) -> "StageCost":
        kind = doc.get("kind", "linear")
        return cls(
            kind=kind,
            scale=float(doc.get("scale", 1.0)),
            slopes=tuple(float(v) for v in doc.get("slopes", ())),
            intercepts=tuple(float(v) for v in doc.get("intercepts", ())),
        )


@dataclass
class MomentResult:
    """
    Optimum of one stage moment problem.

    p, qu, ql and R are the multipliers of the sup problem over the
    sign-adjusted cost (for direction inf that cost is -f).
    """
    value: float
    distribution: DiscreteDistribution
    p: float
    qu: np.ndarray
    ql: np.ndarray
    R: np.ndarray
    dual_value: float
    cuts: int
    direction: str = SUP


def stage_moment_set(proc: MomentAmbiguityProcess, t: int, j: Optional[int] = None) -> StageMomentSet:
    """Stage-t slice conditioned on d_{t-1} = supports[t-2][j] (j ignored for t = 1)."""
    return StageMomentSet(
        proc.supports[t - 1],
        proc.center(t, j),
        proc.delta[t - 1],
        proc.anchor(t, j),
        proc.sigma[t - 1],
    )


def _seed_directions(m: int) -> List[np.ndarray]:
    dirs = list(np.eye(m))
    for a in range(m):
        for b in range(a + 1, m):
            for s in (1.0, -1.0):
                v = np.zeros(m)
                v[a], v[b] = 1.0, s
                dirs.append(v / np.sqrt(2.0))
    return dirs


def _is_duplicate(v: np.ndarray, existing: Sequence[np.ndarray]) -> bool:
    return any(float(v @ w) ** 2 > CUT_DUPLICATE_COSINE for w in existing)


def _moment_builder(f: np.ndarray, stage: StageMomentSet, directions: Sequence[np.ndarray]) -> LpBuilder:
    builder = LpBuilder("max")
    n, m = stage.size, stage.dim
    for i in range(n):
        builder.add_variable(f"w[{i}]", 0.0, np.inf, f[i])
    builder.add_row({i: 1.0 for i in range(n)}, "=", 1.0, "mass")
    for a in range(m):
        coeffs = {i: float(stage.points[i, a]) for i in range(n) if stage.points[i, a] != 0.0}
        builder.add_row(coeffs, "<=", float(stage.center[a] + stage.delta[a]), f"mean_hi[{a}]")
        builder.add_row(coeffs, ">=", float(stage.center[a] - stage.delta[a]), f"mean_lo[{a}]")
    dev = stage.deviations()
    for k, v in enumerate(directions):
        proj = (dev @ v) ** 2
        builder.add_row({i: float(proj[i]) for i in range(n)}, "<=", float(v @ stage.sigma @ v), f"cov[{k}]")
    return builder


def stage_moment_lp(values, stage: StageMomentSet) -> LpProblem:
    """First-round primal LP of one stage set (seed covariance directions only)."""
    f = np.asarray(values, dtype=float).reshape(-1)
    if f.shape[0] != stage.size:
        raise SchemaError(f"{f.shape[0]} values for {stage.size} support points")
    return _moment_builder(f, stage, _seed_directions(stage.dim)).build()


def moment_sup_lp(values, stage: StageMomentSet, direction: str = SUP) -> MomentResult:
    """
    Worst-case expectation of per-point values over one stage set.

    The covariance cap is enforced on the primal by direction cuts
    v'(second moment)v <= v'Sigma v, adding the eigenvector of the most
    negative eigenvalue of Sigma - S until it is within the PSD tolerance.

    Args:
        values: f(d) for each support point
        stage: the stage set
        direction: "sup" or "inf" (inf f = -sup(-f))

    Returns:
        MomentResult with the optimal distribution and multipliers
        (p for the mass row, qu/ql for the mean bounds, R = sum w_k v_k v_k')

    Raises:
        InfeasibleMomentSet
    """
    if direction not in (SUP, INF):
        raise SchemaError(f"direction must be sup or inf, got {direction!r}")
    f = np.asarray(values, dtype=float).reshape(-1)
    if f.shape[0] != stage.size:
        raise SchemaError(f"{f.shape[0]} values for {stage.size} support points")
    sign = 1.0 if direction == SUP else -1.0
    f = sign * f
    m = stage.dim
    directions = _seed_directions(m)
    dev = stage.deviations()

    for it in range(MAX_CUT_ITERATIONS):
        sol = solve_lp(_moment_builder(f, stage, directions).build())
        if sol.status != "optimal":
            raise InfeasibleMomentSet(
                "stage moment set admits no distribution",
                {"status": sol.status, "cuts": len(directions)},
            )
        w = np.clip(sol.x, 0.0, None)
        w = w / w.sum()
        S = (dev * w[:, None]).T @ dev
        gap = stage.sigma - S
        lam, v = min_eigenvalue(0.5 * (gap + gap.T))
        if lam >= -PSD_TOL:
            break
        if _is_duplicate(v, directions):
            if lam >= -1e-6 * (1.0 + float(np.max(np.abs(stage.sigma)))):
                break
            raise CutLimitExceeded("covariance cuts stalled", {"min_eigenvalue": lam})
        directions.append(v)
    else:
        raise CutLimitExceeded(f"covariance cap not met after {MAX_CUT_ITERATIONS} rounds")

    duals = sol.duals
    p = float(duals[0])
    qu = np.array([duals[1 + 2 * a] for a in range(m)])
    ql = np.array([-duals[2 + 2 * a] for a in range(m)])
    weights = duals[1 + 2 * m:]
    R = np.zeros((m, m))
    for wk, v in zip(weights, directions):
        R += wk * np.outer(v, v)
    dual_value = p + (qu - ql) @ stage.center + (qu + ql) @ stage.delta + float(np.sum(R * stage.sigma))
    value = float(w @ f)
    return MomentResult(
        value=sign * value,
        distribution=DiscreteDistribution(tuple(range(stage.size)), w),
        p=p,
        qu=qu,
        ql=ql,
        R=R,
        dual_value=sign * float(dual_value),
        cuts=len(directions),
        direction=direction,
    )


def is_strictly_feasible(stage: StageMomentSet, slack: float = MOMENT_STRICT_SLACK) -> bool:
    """
    True if some distribution has every mass, every nonzero mean slack and the
    covariance gap (Sigma - S) at least `slack` away from its bound.
    """
    n, m = stage.size, stage.dim
    dev = stage.deviations()
    directions = _seed_directions(m)
    for _ in range(MAX_CUT_ITERATIONS):
        builder = LpBuilder("max")
        for i in range(n):
            builder.add_variable(f"w[{i}]")
        s = builder.add_variable("s", -np.inf, 1.0, 1.0)
        for i in range(n):
            builder.add_row({i: 1.0, s: -1.0}, ">=", 0.0)
        builder.add_row({i: 1.0 for i in range(n)}, "=", 1.0)
        for a in range(m):
            coeffs = {i: float(stage.points[i, a]) for i in range(n)}
            if stage.delta[a] > 0:
                builder.add_row({**coeffs, s: 1.0}, "<=", float(stage.center[a] + stage.delta[a]))
                builder.add_row({**coeffs, s: -1.0}, ">=", float(stage.center[a] - stage.delta[a]))
            else:
                builder.add_row(coeffs, "=", float(stage.center[a]))
        for v in directions:
            proj = (dev @ v) ** 2
            builder.add_row({**{i: float(proj[i]) for i in range(n)}, s: 1.0}, "<=", float(v @ stage.sigma @ v))
        sol = solve_lp(builder.build())
        if sol.status != "optimal":
            return False
        w, level = sol.x[:n], sol.x[n]
        S = (dev * w[:, None]).T @ dev
        gap = stage.sigma - S - level * np.eye(m)
        lam, v = min_eigenvalue(0.5 * (gap + gap.T))
        if lam >= -PSD_TOL or _is_duplicate(v, directions):
            return level + min(lam, 0.0) >= slack
        directions.append(v)
    return False


def check_process_feasible(proc: MomentAmbiguityProcess) -> None:
    """
    Raise unless every stage set (every period, every conditioning point) is feasible.

    Raises:
        InfeasibleMomentSet with the offending (period, point index)
    """
    for t in range(1, proc.periods + 1):
        for j in proc.conditioning_points(t):
            stage = stage_moment_set(proc, t, j)
            try:
                moment_sup_lp(np.zeros(stage.size), stage)
            except InfeasibleMomentSet as e:
                raise InfeasibleMomentSet(
                    f"period {t} set is empty at conditioning point {j}",
                    {"period": t, "point": j, **e.details},
                )


def _cost_tables(x: Sequence, proc: MomentAmbiguityProcess, costs: Sequence[StageCost]) -> List[np.ndarray]:
    T = proc.periods
    if len(x) != T or len(costs) != T:
        raise SchemaError(f"need {T} decisions and {T} stage costs")
    return [costs[t].values(x[t], proc.supports[t]) for t in range(T)]


@dataclass
class NestedResult:
    """Stage-1 value plus every conditional optimum keyed by (period, conditioning index)."""
    value: float
    conditionals: Dict[Tuple[int, Optional[int]], DiscreteDistribution]
    stage_values: Dict[Tuple[int, Optional[int]], float]
    cuts: int = 0


def nested_dro_value(
    x: Sequence,
    proc: MomentAmbiguityProcess,
    costs: Sequence[StageCost],
    direction: str = SUP,
    max_workers: int = 1,
) -> NestedResult:
    """
    Backward recursion of the nested worst-case expectation.

    For t = T..1 and every conditioning point d_{t-1}, solves the stage
    moment problem on h_t + g_{t+1}, where g_{t+1}(d_t) is the stage t+1
    optimum conditioned on d_t (g_{T+1} = 0).

    Args:
        x: one decision per period
        proc: moment ambiguity process
        costs: one StageCost per period
        direction: "sup" or "inf"
        max_workers: threads for the independent conditioning points

    Raises:
        InfeasibleMomentSet at any (t, d_{t-1})
    """
    tables = _cost_tables(x, proc, costs)
    T = proc.periods
    conditionals: Dict[Tuple[int, Optional[int]], DiscreteDistribution] = {}
    stage_values: Dict[Tuple[int, Optional[int]], float] = {}
    cuts = 0
    following = np.zeros(proc.supports[T - 1].shape[0])

    for t in range(T, 0, -1):
        f = tables[t - 1] + following
        keys = proc.conditioning_points(t)

        def solve(j: Optional[int], f=f, t=t) -> MomentResult:
            try:
                return moment_sup_lp(f, stage_moment_set(proc, t, j), direction)
            except InfeasibleMomentSet as e:
                raise InfeasibleMomentSet(
                    f"period {t} set is empty at conditioning point {j}",
                    {"period": t, "point": j, **e.details},
                )

        if max_workers > 1 and len(keys) > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                results = list(pool.map(solve, keys))
        else:
            results = [solve(j) for j in keys]

        for j, res in zip(keys, results):
            conditionals[(t, j)] = res.distribution
            stage_values[(t, j)] = res.value
            cuts += res.cuts
        if t > 1:
            following = np.array([stage_values[(t, j)] for j in keys])

    return NestedResult(stage_values[(1, None)], conditionals, stage_values, cuts)


def first_stage_lp(x: Sequence, proc: MomentAmbiguityProcess, costs: Sequence[StageCost]) -> LpProblem:
    """Stage-1 primal LP on h_1 + g_2, with g_2 from the nested recursion."""
    f = _cost_tables(x, proc, costs)[0]
    if proc.periods > 1:
        nested = nested_dro_value(x, proc, costs, SUP)
        f = f + np.array([nested.stage_values[(2, j)] for j in proc.conditioning_points(2)])
    return stage_moment_lp(f, stage_moment_set(proc, 1))


def compose_joint(
    proc: MomentAmbiguityProcess,
    conditionals: Dict[Tuple[int, Optional[int]], DiscreteDistribution],
) -> List[Tuple[Tuple[int, ...], float]]:
    """Joint distribution over paths (i_1, ..., i_T) built from the stagewise conditionals."""
    T = proc.periods
    ranges = [range(proc.supports[t].shape[0]) for t in range(T)]
    joint = []
    for path in itertools.product(*ranges):
        prob = conditionals[(1, None)].masses[path[0]]
        for t in range(2, T + 1):
            if prob == 0.0:
                break
            prob *= conditionals[(t, path[t - 2])].masses[path[t - 1]]
        if prob > 0.0:
            joint.append((path, float(prob)))
    return joint


def joint_expectation(
    x: Sequence,
    proc: MomentAmbiguityProcess,
    costs: Sequence[StageCost],
    conditionals: Dict[Tuple[int, Optional[int]], DiscreteDistribution],
) -> float:
    """E[sum_t h_t] under the composed joint distribution."""
    tables = _cost_tables(x, proc, costs)
    total = 0.0
    for path, prob in compose_joint(proc, conditionals):
        total += prob * sum(tables[t][i] for t, i in enumerate(path))
    return float(total)


class _DualCopy:
    """LP columns of one (p, qu, ql, R) dual copy."""

    def __init__(self, builder: LpBuilder, label: str, m: int):
        self.p = builder.add_variable(f"p{label}", -np.inf, np.inf)
        self.qu = [builder.add_variable(f"qu{label}[{a}]") for a in range(m)]
        self.ql = [builder.add_variable(f"ql{label}[{a}]") for a in range(m)]
        self.r: Dict[Tuple[int, int], int] = {}
        for a in range(m):
            for b in range(a, m):
                self.r[(a, b)] = builder.add_variable(f"R{label}[{a}][{b}]", -np.inf, np.inf)
        self.m = m

    def block(self) -> PsdBlock:
        return PsdBlock.from_upper(self.m, self.r)

    def value_terms(self, center: np.ndarray, delta: np.ndarray, sigma: np.ndarray) -> Dict[int, float]:
        """p + (qu - ql)'center + (qu + ql)'delta + R . Sigma"""
        out = {self.p: 1.0}
        for a in range(self.m):
            out[self.qu[a]] = out.get(self.qu[a], 0.0) + center[a] + delta[a]
            out[self.ql[a]] = out.get(self.ql[a], 0.0) - center[a] + delta[a]
        for (a, b), col in self.r.items():
            out[col] = out.get(col, 0.0) + (sigma[a, a] if a == b else 2.0 * sigma[a, b])
        return out

    def point_terms(self, point: np.ndarray, anchor: np.ndarray) -> Dict[int, float]:
        """p + (qu - ql)'xi + (xi - mu0)'R(xi - mu0)"""
        z = point - anchor
        out = {self.p: 1.0}
        for a in range(self.m):
            out[self.qu[a]] = out.get(self.qu[a], 0.0) + point[a]
            out[self.ql[a]] = out.get(self.ql[a], 0.0) - point[a]
        for (a, b), col in self.r.items():
            out[col] = out.get(col, 0.0) + (z[a] * z[a] if a == b else 2.0 * z[a] * z[b])
        return out


def _merge(target: Dict[int, float], terms: Dict[int, float], scale: float = 1.0) -> None:
    for k, v in terms.items():
        target[k] = target.get(k, 0.0) + scale * v


@dataclass
class DualResult:
    value: float
    cuts: int
    iterations: int
    history: List[float] = field(default_factory=list)


def _solve_dual(builder: LpBuilder, copies: List[_DualCopy], label: str) -> DualResult:
    problem = builder.build()
    sol = solve_with_psd_cuts(problem, [c.block() for c in copies])
    if sol.status == "infeasible":
        raise LpInfeasible(f"{label} dual is infeasible; the costs or sets are malformed")
    if sol.status == "unbounded":
        raise LpInfeasible(f"{label} dual is unbounded; some stage set is empty")
    return DualResult(sol.objective, sol.cuts, sol.iterations, sol.history)


def _signed_tables(x, proc, costs, direction) -> Tuple[List[np.ndarray], float]:
    if direction not in (SUP, INF):
        raise SchemaError(f"direction must be sup or inf, got {direction!r}")
    sign = 1.0 if direction == SUP else -1.0
    return [sign * h for h in _cost_tables(x, proc, costs)], sign


def exact_dual(
    x: Sequence,
    proc: MomentAmbiguityProcess,
    costs: Sequence[StageCost],
    direction: str = SUP,
) -> DualResult:
    """
    Single minimization with one dual copy per (period, conditioning point).

    For every t, j and support point xi_i of period t:
        p_t(j) + (qu - ql)_t(j)'xi_i + (xi_i - mu0_t(j))'R_t(j)(xi_i - mu0_t(j))
            - D_{t+1}(i) >= h_t(xi_i)
    with D_t(j) = p + (qu - ql)'mu_t(j) + (qu + ql)'delta_t + R . Sigma_t of
    copy (t, j), D_{T+1} = 0, objective D_1 and every R_t(j) PSD.
    """
    tables, sign = _signed_tables(x, proc, costs, direction)
    T, m = proc.periods, proc.dim
    builder = LpBuilder("min")
    copies: Dict[Tuple[int, Optional[int]], _DualCopy] = {}
    for t in range(1, T + 1):
        for j in proc.conditioning_points(t):
            copies[(t, j)] = _DualCopy(builder, f"[{t}][{j}]", m)

    def value_terms(t: int, j: Optional[int]) -> Dict[int, float]:
        return copies[(t, j)].value_terms(proc.center(t, j), proc.delta[t - 1], proc.sigma[t - 1])

    for col, v in value_terms(1, None).items():
        builder.add_cost(col, v)

    for t in range(1, T + 1):
        points = proc.supports[t - 1]
        for j in proc.conditioning_points(t):
            copy = copies[(t, j)]
            anchor = proc.anchor(t, j)
            for i in range(points.shape[0]):
                row = copy.point_terms(points[i], anchor)
                if t < T:
                    _merge(row, value_terms(t + 1, i), -1.0)
                builder.add_row(row, ">=", float(tables[t - 1][i]), f"stage[{t}][{j}][{i}]")

    res = _solve_dual(builder, list(copies.values()), "exact")
    res.value *= sign
    return res


def conservative_dual(
    x: Sequence,
    proc: MomentAmbiguityProcess,
    costs: Sequence[StageCost],
    direction: str = SUP,
) -> DualResult:
    """
    As exact_dual with a single dual copy per period; for t >= 2 the
    constraints must hold for every (previous point, current point) pair and
    D_{t+1} is evaluated at the center A_{t+1} xi_i + b_{t+1}.
    """
    tables, sign = _signed_tables(x, proc, costs, direction)
    T, m = proc.periods, proc.dim
    builder = LpBuilder("min")
    copies = [_DualCopy(builder, f"[{t}]", m) for t in range(1, T + 1)]

    def value_terms_at(t: int, d_prev: Optional[np.ndarray]) -> Dict[int, float]:
        center = proc.mu1 if d_prev is None else proc.center_at(t, d_prev)
        return copies[t - 1].value_terms(center, proc.delta[t - 1], proc.sigma[t - 1])

    for col, v in value_terms_at(1, None).items():
        builder.add_cost(col, v)

    for t in range(1, T + 1):
        points = proc.supports[t - 1]
        prevs: List[Optional[np.ndarray]]
        if t == 1 or proc.anchor_mode == "fixed":
            prevs = [None]
        else:
            prevs = list(proc.supports[t - 2])
        for jj, d_prev in enumerate(prevs):
            anchor = proc.anchor(t, None) if d_prev is None else proc.anchor_at(t, d_prev)
            for i in range(points.shape[0]):
                row = copies[t - 1].point_terms(points[i], anchor)
                if t < T:
                    _merge(row, value_terms_at(t + 1, points[i]), -1.0)
                builder.add_row(row, ">=", float(tables[t - 1][i]), f"stage[{t}][{jj}][{i}]")

    res = _solve_dual(builder, copies, "conservative")
    res.value *= sign
    return res


def exact_dual_value(x: Sequence, proc: MomentAmbiguityProcess, costs: Sequence[StageCost], direction: str = SUP) -> float:
    """Certified bound from the previous-point-indexed duals (see exact_dual)."""
    return exact_dual(x, proc, costs, direction).value


def conservative_dual_value(
    x: Sequence, proc: MomentAmbiguityProcess, costs: Sequence[StageCost], direction: str = SUP
) -> float:
    """Bound from constant per-period duals (see conservative_dual)."""
    return conservative_dual(x, proc, costs, direction).value


@dataclass
class DroReport:
    primal: float
    exact_dual: float
    conservative_dual: float
    strong_duality_applicable: bool
    cut_counts: Dict[str, int] = field(default_factory=dict)

    @property
    def gaps(self) -> Dict[str, float]:
        return {
            "exact_minus_primal": self.exact_dual - self.primal,
            "conservative_minus_exact": self.conservative_dual - self.exact_dual,
        }

    def to_dict(self) -> Dict:
        return {
            "primal": self.primal,
            "exact_dual": self.exact_dual,
            "conservative_dual": self.conservative_dual,
            "gaps": self.gaps,
            "cut_counts": dict(self.cut_counts),
            "strong_duality_applicable": self.strong_duality_applicable,
        }


def dro_report(x: Sequence, proc: MomentAmbiguityProcess, costs: Sequence[StageCost]) -> DroReport:
    """Nested primal, exact and conservative duals (sup direction) for one instance."""
    nested = nested_dro_value(x, proc, costs, SUP)
    exact = exact_dual(x, proc, costs, SUP)
    conservative = conservative_dual(x, proc, costs, SUP)
    strict = all(
        is_strictly_feasible(stage_moment_set(proc, t, j))
        for t in range(1, proc.periods + 1)
        for j in proc.conditioning_points(t)
    )
    logger.info(f"[dro] primal {nested.value:.6g} exact {exact.value:.6g} conservative {conservative.value:.6g}")
    return DroReport(
        primal=nested.value,
        exact_dual=exact.value,
        conservative_dual=conservative.value,
        strong_duality_applicable=strict,
        cut_counts={"primal": nested.cuts, "exact": exact.cuts, "conservative": conservative.cuts},
    )
