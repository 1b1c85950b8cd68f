"""
Two-period robust knapsack for the CU robust toolkit.

    max c_1'x_1 + c_2'x_2   s.t.  d_1'x_1 + d_2'x_2 <= B for all d in the set,
    x binary

The robust row is the T = 2 center-dependence counterpart. CU sets move
the period-2 center with d_1 (mu_2 = Phi mu_1 + Psi d_1); NC sets keep it
fixed. Solvers: vectorized exhaustive enumeration (certifying, <= 24 items)
and depth-first branch-and-bound (<= 40 items), both returning the
lexicographically smallest optimum.

The experiment compares CU and NC solutions by constraint satisfaction on
sampled paths and by objective value.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import FEASIBILITY_TOL, MAX_BRANCH_AND_BOUND_ITEMS, MAX_EXHAUSTIVE_ITEMS
from cu_sets import EllipsoidalCuProcess, KnapsackUncertaintyModel, sample_paths
from errors import CuError, DimensionMismatch, KnapsackInfeasible, ModeUnsupportedForDimension, SchemaError
from experiment_engine import ExperimentResult, binomial_margin, run_grid
from experiment_profiles import KnapsackExperimentConfig
from numerics import as_vector, cholesky, keyed_rng, symmetrize
from synthetic_market import estimate_mean_cov

logger = logging.getLogger(__name__)

CU = "CU"
NC = "NC"

_CHUNK = 1 << 16

KNAPSACK_COLUMNS = [
    "sweep",
    "r",
    "lambda",
    "model",
    "avg_objective",
    "avg_satisfaction",
    "satisfaction_margin",
    "excluded_paths",
    "nonzero_first",
    "nonzero_second",
    "replications",
    "failed_replications",
]


@dataclass(eq=False)
class KnapsackInstance:
    """Costs, budget and uncertainty model of one robust knapsack; mode CU or NC."""
    c1: np.ndarray
    c2: np.ndarray
    budget: float
    model: KnapsackUncertaintyModel
    mode: str = CU
    nc_center: str = "first_period"

    def __post_init__(self):
        m = self.model.dim
        self.c1 = as_vector(self.c1, m, name="c1")
        self.c2 = as_vector(self.c2, m, name="c2")
        self.budget = float(self.budget)
        if not np.isfinite(self.budget):
            raise SchemaError("budget must be finite")
        if self.mode not in (CU, NC):
            raise SchemaError(f"unknown knapsack mode {self.mode!r}")

    @property
    def m1(self) -> int:
        return int(self.c1.shape[0])

    @property
    def m2(self) -> int:
        return int(self.c2.shape[0])

    @property
    def items(self) -> int:
        return self.m1 + self.m2

    @property
    def costs(self) -> np.ndarray:
        return np.concatenate([self.c1, self.c2])

    def process(self) -> EllipsoidalCuProcess:
        if self.mode == CU:
            return self.model.as_process()
        return self.model.nc_process(self.nc_center)

    def with_model(self, model: KnapsackUncertaintyModel) -> "KnapsackInstance":
        return KnapsackInstance(self.c1, self.c2, self.budget, model, self.mode, self.nc_center)


@dataclass
class KnapsackSolution:
    x1: np.ndarray
    x2: np.ndarray
    objective: float
    lhs: float
    method: str
    nodes: int = 0

    def to_dict(self) -> Dict:
        return {
            "x1": [int(v) for v in self.x1],
            "x2": [int(v) for v in self.x2],
            "objective": float(self.objective),
            "lhs": float(self.lhs),
            "method": self.method,
            "nodes": self.nodes,
        }


def _pair(x1, x2, m: int) -> Tuple[np.ndarray, np.ndarray]:
    x1 = np.asarray(x1, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    if x1.shape[0] != m or x2.shape[0] != m:
        raise DimensionMismatch(f"decisions need length {m}", {"x1": x1.shape[0], "x2": x2.shape[0]})
    return x1, x2


def cu_knapsack_lhs(x1, x2, model: KnapsackUncertaintyModel) -> float:
    """
    Worst-case d_1'x_1 + d_2'x_2 over the connected sets:
    mu_1'(x_1 + (Phi + Psi)'x_2) + r_1 ||L'(x_1 + Psi'x_2)|| + r_2 ||L'x_2||.
    """
    x1, x2 = _pair(x1, x2, model.dim)
    mean = model.mu1 @ (x1 + (model.phi + model.psi).T @ x2)
    first = np.linalg.norm(model.L.T @ (x1 + model.psi.T @ x2))
    second = np.linalg.norm(model.L.T @ x2)
    return float(mean + model.r1 * first + model.r2 * second)


def nc_knapsack_lhs(x1, x2, model: KnapsackUncertaintyModel, center: str = "first_period") -> float:
    """Worst case over the non-connected sets (period-2 center mu_1, or (Phi + Psi) mu_1 for "nominal")."""
    x1, x2 = _pair(x1, x2, model.dim)
    if center == "first_period":
        mu2 = model.mu1
    elif center == "nominal":
        mu2 = (model.phi + model.psi) @ model.mu1
    else:
        raise SchemaError(f"unknown nc center {center!r}")
    return float(
        model.mu1 @ x1 + model.r1 * np.linalg.norm(model.L.T @ x1)
        + mu2 @ x2 + model.r2 * np.linalg.norm(model.L.T @ x2)
    )


class _CounterpartTerms:
    """
    Counterpart split into radius-free parts, batched over rows of X = [X1 X2]:
    lhs = X w + r_1 ||X1 L_1 + X2 F L_1|| + r_2 ||X2 L_2||.
    """

    def __init__(self, proc: EllipsoidalCuProcess):
        if proc.periods != 2:
            raise SchemaError("knapsack counterpart needs a two-period process")
        A, F, c = proc.A[0], proc.F[0], proc.c[0]
        self.m = proc.dim
        self.weights = np.concatenate([proc.mu1, (F + A) @ proc.mu1 + c])
        self.first = np.vstack([proc.chol[0], F @ proc.chol[0]])
        self.second = proc.chol[1]
        self.radii = proc.radii

    def parts(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        mean = X @ self.weights
        n1 = np.linalg.norm(X @ self.first, axis=1)
        n2 = np.linalg.norm(X[:, self.m:] @ self.second, axis=1)
        return mean, n1, n2

    def lhs(self, x: np.ndarray, radii: Optional[Tuple[float, float]] = None) -> float:
        r1, r2 = radii if radii is not None else self.radii
        mean, n1, n2 = self.parts(x[None, :])
        return float(mean[0] + r1 * n1[0] + r2 * n2[0])


def _choose_method(items: int, method: str) -> str:
    if method == "auto":
        method = "exhaustive" if items <= MAX_EXHAUSTIVE_ITEMS else "branch_and_bound"
    if method == "exhaustive" and items > MAX_EXHAUSTIVE_ITEMS:
        raise ModeUnsupportedForDimension(
            f"exhaustive search is limited to {MAX_EXHAUSTIVE_ITEMS} items", {"items": items}
        )
    if method == "branch_and_bound" and items > MAX_BRANCH_AND_BOUND_ITEMS:
        raise ModeUnsupportedForDimension(
            f"branch-and-bound is limited to {MAX_BRANCH_AND_BOUND_ITEMS} items", {"items": items}
        )
    if method not in ("exhaustive", "branch_and_bound"):
        raise SchemaError(f"unknown knapsack solver {method!r}")
    return method


def _exhaustive(
    c: np.ndarray,
    terms: _CounterpartTerms,
    budget: float,
    radii: Sequence[Tuple[float, float]],
) -> List[Tuple[np.ndarray, float]]:
    """
    Best feasible x for every radius pair in one pass over all 2^n codes.

    Item i is bit n-1-i of the code, so code order is lexicographic order
    and the first maximum is the lexicographically smallest optimum.
    """
    n = c.shape[0]
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    best_obj = np.full(len(radii), -np.inf)
    best_code = np.zeros(len(radii), dtype=np.int64)
    r1 = np.array([r[0] for r in radii])
    r2 = np.array([r[1] for r in radii])
    limit = budget + FEASIBILITY_TOL

    for start in range(0, 1 << n, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, 1 << n), dtype=np.int64)
        X = ((codes[:, None] >> shifts) & 1).astype(float)
        obj = X @ c
        mean, n1, n2 = terms.parts(X)
        for k in range(len(radii)):
            feasible = mean + r1[k] * n1 + r2[k] * n2 <= limit
            if not feasible.any():
                continue
            masked = np.where(feasible, obj, -np.inf)
            i = int(np.argmax(masked))
            if masked[i] > best_obj[k]:
                best_obj[k] = masked[i]
                best_code[k] = codes[i]

    out = []
    for k in range(len(radii)):
        x = ((best_code[k] >> shifts) & 1).astype(float)
        out.append((x, float(best_obj[k])))
    return out


def _branch_and_bound(c: np.ndarray, terms: _CounterpartTerms, budget: float) -> Tuple[np.ndarray, float, int]:
    """
    Depth-first search over items in index order, 0-branch first.

    Bound: c of the partial assignment plus the fractional knapsack
    relaxation on the mean weights when every weight is nonnegative, else
    plus the remaining positive costs. Mean-term pruning only with
    nonnegative weights, where the mean term is monotone.
    """
    n = c.shape[0]
    w = terms.weights
    monotone = bool(np.all(w >= 0))
    limit = budget + FEASIBILITY_TOL
    positive_suffix = np.concatenate([np.cumsum(np.maximum(c, 0.0)[::-1])[::-1], [0.0]])
    by_ratio = sorted(
        (j for j in range(n) if c[j] > 0),
        key=lambda j: (-np.inf if w[j] <= 0 else -c[j] / w[j], j),
    )

    def bound(depth: int, capacity: float) -> float:
        if not monotone:
            return float(positive_suffix[depth])
        total = 0.0
        for j in by_ratio:
            if j < depth:
                continue
            if w[j] <= 0 or w[j] <= capacity:
                total += c[j]
                capacity -= max(w[j], 0.0)
            else:
                total += c[j] * max(capacity, 0.0) / w[j]
                break
        return total

    x = np.zeros(n)
    best_x = np.zeros(n)
    best_obj = 0.0
    nodes = 0
    slack = 1e-12 * (1.0 + float(np.abs(c).sum()))

    def visit(depth: int, obj: float, mean: float) -> None:
        nonlocal best_obj, best_x, nodes
        nodes += 1
        if depth == n:
            value = float(c @ x)
            if value > best_obj and terms.lhs(x) <= limit:
                best_obj, best_x = value, x.copy()
            return
        if obj + bound(depth, budget - mean) < best_obj - slack:
            return
        for value in (0.0, 1.0):
            if value and monotone and mean + w[depth] > limit:
                continue
            x[depth] = value
            visit(depth + 1, obj + value * c[depth], mean + value * w[depth])
        x[depth] = 0.0

    visit(0, 0.0, 0.0)
    return best_x, best_obj, nodes


def _split(inst: KnapsackInstance, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return x[: inst.m1].copy(), x[inst.m1:].copy()


def solve_knapsack_radii(
    inst: KnapsackInstance,
    radii: Sequence[Tuple[float, float]],
    method: str = "auto",
) -> List[KnapsackSolution]:
    """
    Optimal selections of one instance for several (r_1, r_2) pairs.

    Exhaustive mode scores every pair in a single enumeration pass.

    Raises:
        KnapsackInfeasible: budget below zero (x = 0 itself violates)
        ModeUnsupportedForDimension: too many items for the chosen solver
    """
    if inst.model.dim != inst.m1 or inst.m1 != inst.m2:
        raise DimensionMismatch("item counts must match the model dimension")
    if inst.budget < -FEASIBILITY_TOL:
        raise KnapsackInfeasible("budget is negative, the empty selection violates", {"budget": inst.budget})
    method = _choose_method(inst.items, method)
    c = inst.costs
    out: List[KnapsackSolution] = []

    if method == "exhaustive":
        terms = _CounterpartTerms(inst.process())
        for (x, obj), pair in zip(_exhaustive(c, terms, inst.budget, radii), radii):
            x1, x2 = _split(inst, x)
            out.append(KnapsackSolution(x1, x2, obj, terms.lhs(x, pair), method, 1 << inst.items))
        return out

    for r1, r2 in radii:
        scoped = inst.with_model(inst.model.with_radii(r1, r2))
        terms = _CounterpartTerms(scoped.process())
        x, obj, nodes = _branch_and_bound(c, terms, inst.budget)
        x1, x2 = _split(inst, x)
        logger.debug(f"[knapsack] branch-and-bound r=({r1}, {r2}) nodes={nodes}")
        out.append(KnapsackSolution(x1, x2, obj, terms.lhs(x), method, nodes))
    return out


def solve_robust_knapsack(inst: KnapsackInstance, method: str = "auto") -> KnapsackSolution:
    """
    Maximize c'x over binary x with the CU (or NC) counterpart within B.

    Ties go to the lexicographically smallest x = (x_1, x_2).
    """
    return solve_knapsack_radii(inst, [(inst.model.r1, inst.model.r2)], method)[0]


def satisfaction_on_paths(x1, x2, d1: np.ndarray, d2: np.ndarray, budget: float) -> float:
    """Fraction of sampled paths with d_1'x_1 + d_2'x_2 <= B."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    load = d1 @ x1 + d2 @ x2
    return float(np.mean(load <= budget + FEASIBILITY_TOL))


def constraint_satisfaction(
    x1,
    x2,
    model: KnapsackUncertaintyModel,
    sigma,
    n: int,
    seed: int,
    budget: float,
    replication: int = 0,
) -> float:
    """
    Monte Carlo constraint satisfaction of a fixed selection.

    Paths follow d_1 ~ N(mu_1, sigma), d_2 = Phi mu_1 + Psi d_1 + N(0, sigma),
    drawn from the streams keyed (seed, replication, period).
    """
    if n < 1:
        raise SchemaError("at least one sample path required")
    x1, x2 = _pair(x1, x2, model.dim)
    d1, d2 = sample_paths(model, sigma, n, seed, replication)
    return satisfaction_on_paths(x1, x2, d1, d2, budget)


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------


def true_covariance(cfg: KnapsackExperimentConfig) -> np.ndarray:
    """Random true covariance sigma_scale * G G' / m, G standard normal from stream (seed, 0, 0)."""
    m = cfg.items_per_period
    G = keyed_rng(cfg.seed, 0, 0).standard_normal((m, m))
    return cfg.sigma_scale * symmetrize(G @ G.T / m)


@dataclass
class KnapsackReplication:
    """Sampled costs and estimated set parameters of one replication."""
    index: int
    c1: np.ndarray
    c2: np.ndarray
    mu_hat: np.ndarray
    L_hat: np.ndarray
    sigma_true: np.ndarray
    L_true: np.ndarray = field(repr=False, default=None)

    def model(self, lam: float, r1: float, r2: float) -> KnapsackUncertaintyModel:
        m = self.mu_hat.shape[0]
        return KnapsackUncertaintyModel(self.mu_hat, np.eye(m), lam * np.eye(m), self.L_hat, r1, r2)

    def true_model(self, lam: float) -> KnapsackUncertaintyModel:
        m = self.mu_hat.shape[0]
        return KnapsackUncertaintyModel(np.ones(m), np.eye(m), lam * np.eye(m), self.L_true, 0.0, 0.0)


def build_replication(cfg: KnapsackExperimentConfig, rep: int, sigma_true: Optional[np.ndarray] = None) -> KnapsackReplication:
    """
    Steps shared by CU and NC: sample l first-period weights to estimate
    (mu_1, Sigma), then sample c_1 ~ N(e, Sigma/100), c_2 ~ N(1.25 e, Sigma/100).
    """
    m = cfg.items_per_period
    sigma_true = true_covariance(cfg) if sigma_true is None else sigma_true
    L_true = cholesky(sigma_true)
    e = np.ones(m)

    z = keyed_rng(cfg.seed, rep, 3).standard_normal((cfg.estimation_samples, m))
    d1 = e + z @ L_true.T
    mu_hat, sigma_hat = estimate_mean_cov(d1)
    L_hat = cholesky(sigma_hat)

    zc = keyed_rng(cfg.seed, rep, 4).standard_normal((2, m))
    cost_factor = L_true / np.sqrt(cfg.cost_cov_divisor)
    c1 = cfg.cost_mean_first * e + cost_factor @ zc[0]
    c2 = cfg.cost_mean_second * e + cost_factor @ zc[1]
    return KnapsackReplication(rep, c1, c2, mu_hat, L_hat, sigma_true, L_true)


def _cells(cfg: KnapsackExperimentConfig) -> List[Tuple[str, float, float]]:
    cells = [("r", float(r), float(cfg.default_lambda)) for r in cfg.r_grid]
    cells += [("lambda", float(cfg.sweep_radius), float(lam)) for lam in cfg.lambda_grid]
    return cells


def _run_replication(cfg: KnapsackExperimentConfig, rep: KnapsackReplication) -> Dict[Tuple[int, str], Tuple[float, float, int, int]]:
    """(cell index, model) -> (objective, satisfaction, nonzero_first, nonzero_second)."""
    cells = _cells(cfg)
    by_lambda: Dict[float, List[int]] = {}
    for i, (_, _, lam) in enumerate(cells):
        by_lambda.setdefault(lam, []).append(i)

    out: Dict[Tuple[int, str], Tuple[float, float, int, int]] = {}
    for lam, indices in by_lambda.items():
        d1, d2 = sample_paths(rep.true_model(lam), rep.sigma_true, cfg.evaluation_samples, cfg.seed, rep.index)
        radii = [(cells[i][1], cells[i][1]) for i in indices]
        for mode in (CU, NC):
            inst = KnapsackInstance(rep.c1, rep.c2, cfg.budget, rep.model(lam, 0.0, 0.0), mode, cfg.nc_center)
            for i, sol in zip(indices, solve_knapsack_radii(inst, radii, cfg.solver)):
                sat = satisfaction_on_paths(sol.x1, sol.x2, d1, d2, cfg.budget)
                out[(i, mode)] = (sol.objective, sat, int(sol.x1.sum()), int(sol.x2.sum()))
    return out


def solve_knapsack_pair(cfg: KnapsackExperimentConfig, replication: int = 0) -> Dict[str, Dict]:
    """CU and NC solutions of one replication at the default lambda and the sweep radius."""
    rep = build_replication(cfg, replication)
    r = cfg.sweep_radius
    d1, d2 = sample_paths(rep.true_model(cfg.default_lambda), rep.sigma_true, cfg.evaluation_samples, cfg.seed, replication)
    out = {}
    for mode in (CU, NC):
        inst = KnapsackInstance(rep.c1, rep.c2, cfg.budget, rep.model(cfg.default_lambda, r, r), mode, cfg.nc_center)
        sol = solve_robust_knapsack(inst, cfg.solver)
        doc = sol.to_dict()
        doc["satisfaction"] = satisfaction_on_paths(sol.x1, sol.x2, d1, d2, cfg.budget)
        out[mode] = doc
    return out


def run_knapsack_experiment(cfg: KnapsackExperimentConfig, threads: int = 1) -> ExperimentResult:
    """
    CU versus NC sweep over the radius grid (lambda fixed) and the lambda grid
    (radius fixed).

    Per (cell, model): satisfaction is averaged over replications; the
    objective is averaged over (replication, path) pairs whose path satisfies
    the budget, so each replication's objective is weighted by its
    satisfaction fraction. Replications whose solve fails are counted and
    reported, not averaged.
    """
    cfg.validate()
    cells = _cells(cfg)
    sigma_true = true_covariance(cfg)
    failures: List[Dict] = []

    def work(index: int, rep_index: int):
        try:
            rep = build_replication(cfg, rep_index, sigma_true)
            result = _run_replication(cfg, rep)
            logger.debug(f"[knapsack] replication {rep_index + 1}/{cfg.replications} done")
            return result
        except CuError as e:
            logger.warning(f"[knapsack] replication {rep_index} failed: {e.message}")
            return e

    outcomes = run_grid(list(range(cfg.replications)), work, threads)
    for rep_index, outcome in enumerate(outcomes):
        if isinstance(outcome, CuError):
            failures.append({"replication": rep_index, **outcome.to_dict()})
    good = [o for o in outcomes if not isinstance(o, CuError)]

    records = []
    n = cfg.evaluation_samples
    for i, (sweep, r, lam) in enumerate(cells):
        for mode in (CU, NC):
            rows = [o[(i, mode)] for o in good]
            objs = np.array([row[0] for row in rows])
            sats = np.array([row[1] for row in rows])
            weight = float(sats.sum())
            avg_sat = float(sats.mean()) if rows else float("nan")
            records.append({
                "sweep": sweep,
                "r": r,
                "lambda": lam,
                "model": mode,
                "avg_objective": float(objs @ sats / weight) if weight > 0 else float("nan"),
                "avg_satisfaction": avg_sat,
                "satisfaction_margin": binomial_margin(avg_sat, len(rows) * n) if rows else float("nan"),
                "excluded_paths": int(round(float(np.sum(1.0 - sats)) * n)),
                "nonzero_first": float(np.mean([row[2] for row in rows])) if rows else float("nan"),
                "nonzero_second": float(np.mean([row[3] for row in rows])) if rows else float("nan"),
                "replications": len(rows),
                "failed_replications": len(failures),
            })
        cu, nc = records[-2], records[-1]
        logger.info(
            f"[knapsack] cell {i + 1}/{len(cells)} {sweep} r={r:g} lambda={lam:g} "
            f"CU sat={cu['avg_satisfaction']:.3f} obj={cu['avg_objective']:.3f} "
            f"NC sat={nc['avg_satisfaction']:.3f} obj={nc['avg_objective']:.3f}"
        )

    metadata = {
        "profile": cfg.name,
        "seed": cfg.seed,
        "items_per_period": cfg.items_per_period,
        "budget": cfg.budget,
        "replications": cfg.replications,
        "evaluation_samples": n,
        "estimation_samples": cfg.estimation_samples,
        "default_lambda": cfg.default_lambda,
        "sweep_radius": cfg.sweep_radius,
        "nc_center": cfg.nc_center,
        "solver": cfg.solver,
        "sigma_scale": cfg.sigma_scale,
        "failed_replications": len(failures),
        "objective_weighting": "satisfied (replication, path) pairs",
    }
    return ExperimentResult("knapsack", list(KNAPSACK_COLUMNS), records, metadata, failures)
