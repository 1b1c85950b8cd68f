"""
Two-period, two-asset worst-case expected utility for the CU robust toolkit.

    max_{x_1, x_2 on the simplex}  inf_{P_1} E[ u(x_1'd_1) + inf_{P_2 | d_1} E[u(x_2'd_2)] ]

with u(r) = min_k (a_k r + b_k). Returns live on a per-asset lattice around
mu_1. The CU model centers period 2 at mu_1 + omega (d_1 - mu_1) with the
covariance cap anchored at that center; the DRO comparison keeps period 2
at mu_1, so its objective splits into two independent period values.

Allocations are searched on a grid of step 1/resolution, asset-1 weight
ascending; the first best pair wins.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from cache import StageValueCache, get_cache
from cu_sets import MomentAmbiguityProcess
from dro_counterpart import INF, StageCost, StageMomentSet, moment_sup_lp, stage_moment_set
from errors import CuError, SchemaError
from experiment_engine import ExperimentResult, GridSpace, run_grid
from experiment_profiles import PortfolioConfig
from wealth_simulator import asset_covariance, simulate_wealth, support_bounds

logger = logging.getLogger(__name__)

CU = "CU"
DRO = "DRO"
DIFF = "DIFF"

DEFAULT_UTILITY = StageCost(kind="piecewise_min", slopes=(1.5, 1.0, 0.2), intercepts=(0.0, 0.015, 0.06))

# std(CU) <= std(DRO) * (1 + STD_TOLERANCE) counts as "CU not riskier"
STD_TOLERANCE = 0.05

PORTFOLIO_COLUMNS = [
    "omega",
    "rho",
    "model",
    "x1_asset1",
    "x1_asset2",
    "x2_asset1",
    "x2_asset2",
    "objective",
    "wealth_mean",
    "wealth_std",
    "wealth_worst",
]


def utility_cost(cfg: PortfolioConfig) -> StageCost:
    return StageCost(
        kind="piecewise_min",
        slopes=tuple(float(v) for v in cfg.utility_slopes),
        intercepts=tuple(float(v) for v in cfg.utility_intercepts),
    )


def utility(r, cfg: Optional[PortfolioConfig] = None) -> np.ndarray:
    """Piecewise-linear concave utility of portfolio returns r."""
    cost = DEFAULT_UTILITY if cfg is None else utility_cost(cfg)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    return np.min(np.outer(r, cost.slopes) + np.asarray(cost.intercepts), axis=1)


def allocation_grid(resolution: int) -> np.ndarray:
    """Rows (k/res, 1 - k/res), k = 0..res."""
    if resolution < 2:
        raise SchemaError("allocation resolution must be at least 2")
    w = np.arange(resolution + 1) / resolution
    return np.column_stack([w, 1.0 - w])


def support_lattice(cfg: PortfolioConfig) -> np.ndarray:
    """support_points per asset spanning the support box, asset 1 slowest."""
    lo, hi = support_bounds(cfg)
    mu = np.asarray(cfg.mu1, dtype=float)
    offsets = np.linspace(-1.0, 1.0, cfg.support_points)
    axes = [mu[a] + offsets * (hi[a] - mu[a]) for a in range(2)]
    return np.array([[a, b] for a in axes[0] for b in axes[1]])


def _with_points(base: np.ndarray, extra: np.ndarray) -> np.ndarray:
    points = [p for p in base]
    for p in extra:
        if not any(np.max(np.abs(p - q)) <= 1e-12 for q in points):
            points.append(p)
    return np.array(points)


def build_moment_process(cfg: PortfolioConfig, omega: float, rho: float, model: str = CU) -> MomentAmbiguityProcess:
    """
    Two-stage moment process of the portfolio model.

    CU: mu_2(d_1) = omega d_1 + (1 - omega) mu_1, covariance anchored at the
    conditional center, period-2 support = lattice plus every conditional
    center (each stage set then holds the point mass at its center).
    DRO: mu_2 = mu_1 and anchors mu_1 in both periods.

    Raises:
        InfeasibleMomentSet, SchemaError
    """
    mu = np.asarray(cfg.mu1, dtype=float)
    delta = np.asarray(cfg.delta, dtype=float)
    sigma = asset_covariance(cfg, rho)
    lattice = support_lattice(cfg)
    if model == CU:
        centers = omega * lattice + (1.0 - omega) * mu
        return MomentAmbiguityProcess(
            supports=(lattice, _with_points(lattice, centers)),
            A=(None, omega * np.eye(2)),
            b=(None, (1.0 - omega) * mu),
            mu1=mu,
            delta=(delta, delta),
            sigma=(sigma, sigma),
            anchor_mode="conditional",
        )
    if model == DRO:
        return MomentAmbiguityProcess(
            supports=(lattice, lattice),
            A=(None, np.zeros((2, 2))),
            b=(None, mu),
            mu1=mu,
            delta=(delta, delta),
            sigma=(sigma, sigma),
            anchors=(mu, mu),
        )
    raise SchemaError(f"unknown portfolio model {model!r}")


def portfolio_stage_value(x, stage: StageMomentSet, direction: str = INF, cost: StageCost = DEFAULT_UTILITY) -> float:
    """
    Worst-case expected utility of allocation x over one stage set.

    Raises:
        SchemaError: x not on the simplex
        InfeasibleMomentSet
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != stage.dim or np.any(x < -1e-12) or abs(float(x.sum()) - 1.0) > 1e-9:
        raise SchemaError("allocation must be nonnegative and sum to one", {"x": x.tolist()})
    return moment_sup_lp(cost.values(x, stage.points), stage, direction).value


@dataclass
class PortfolioSolution:
    model: str
    x1: np.ndarray
    x2: np.ndarray
    objective: float

    def to_dict(self) -> Dict:
        return {
            "model": self.model,
            "x1": [float(v) for v in self.x1],
            "x2": [float(v) for v in self.x2],
            "objective": float(self.objective),
        }


def _best_pair(values: np.ndarray, grid: np.ndarray, model: str) -> PortfolioSolution:
    """First maximum of values[k1, k2], k1 outer; near-equal values keep the earlier pair."""
    best_value, best_k1, best_k2 = float(values[0, 0]), 0, 0
    for k1 in range(values.shape[0]):
        for k2 in range(values.shape[1]):
            v = float(values[k1, k2])
            if v > best_value + 1e-12 * (1.0 + abs(best_value)):
                best_value, best_k1, best_k2 = v, k1, k2
    return PortfolioSolution(model, grid[best_k1].copy(), grid[best_k2].copy(), best_value)


def _cu_values(cfg: PortfolioConfig, omega: float, rho: float, grid: np.ndarray, threads: int) -> np.ndarray:
    proc = build_moment_process(cfg, omega, rho, CU)
    cost = utility_cost(cfg)
    points2 = proc.supports[1]
    stage2 = [stage_moment_set(proc, 2, j) for j in proc.conditioning_points(2)]

    def second(k: int, x: np.ndarray) -> np.ndarray:
        f = cost.values(x, points2)
        return np.array([moment_sup_lp(f, s, INF).value for s in stage2])

    following = np.array(run_grid(list(grid), second, threads))
    stage1 = stage_moment_set(proc, 1)
    first = [cost.values(x, proc.supports[0]) for x in grid]

    def row(k1: int, f1: np.ndarray) -> np.ndarray:
        return np.array([moment_sup_lp(f1 + following[k2], stage1, INF).value for k2 in range(len(grid))])

    return np.array(run_grid(first, row, threads))


def _dro_period_values(cfg: PortfolioConfig, rho: float, grid: np.ndarray) -> np.ndarray:
    proc = build_moment_process(cfg, 0.0, rho, DRO)
    cost = utility_cost(cfg)
    out = np.zeros((2, len(grid)))
    for t in (1, 2):
        stage = stage_moment_set(proc, t, None if t == 1 else 0)
        for k, x in enumerate(grid):
            out[t - 1, k] = portfolio_stage_value(x, stage, INF, cost)
    return out


def _fingerprint(cfg: PortfolioConfig) -> str:
    keys = ("mu1", "delta", "variance", "utility_slopes", "utility_intercepts",
            "allocation_resolution", "support_points", "support_width")
    return json.dumps({k: getattr(cfg, k) for k in keys}, sort_keys=True)


def solve_portfolio(
    cfg: PortfolioConfig,
    omega: float,
    rho: float,
    cache: Optional[StageValueCache] = None,
    threads: int = 1,
) -> Dict[str, PortfolioSolution]:
    """
    Grid-search optimum of both models at (omega, rho).

    CU objective is the nested worst-case value; DRO is the sum of the two
    decoupled period values (independent of omega, memoized per rho).
    """
    grid = allocation_grid(cfg.allocation_resolution)
    cache = cache if cache is not None else get_cache()

    cu_values = _cu_values(cfg, omega, rho, grid, threads)
    period = cache.get_or_compute((_fingerprint(cfg), "dro", float(rho)), lambda: _dro_period_values(cfg, rho, grid))
    dro_values = period[0][:, None] + period[1][None, :]

    return {
        CU: _best_pair(cu_values, grid, CU),
        DRO: _best_pair(dro_values, grid, DRO),
    }


def _spearman(x: Sequence[float], y: Sequence[float]) -> Optional[Dict[str, float]]:
    if len(x) < 3 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return None
    res = stats.spearmanr(x, y)
    corr, pvalue = float(res[0]), float(res[1])
    if not np.isfinite(corr):
        return None
    return {"correlation": corr, "pvalue": pvalue}


def run_portfolio_experiment(
    cfg: PortfolioConfig,
    threads: int = 1,
    cache: Optional[StageValueCache] = None,
) -> ExperimentResult:
    """
    CU versus DRO over the (omega, rho) grid, omega outer.

    Each cell yields a CU row, a DRO row and a DIFF row holding
    objective(CU) - objective(DRO), mean(CU) - mean(DRO),
    std(DRO) - std(CU) and worst(CU) - worst(DRO) in the objective and
    wealth columns. Both models of a cell share their wealth paths.
    """
    cfg.validate()
    cache = cache if cache is not None else StageValueCache()
    cells = GridSpace({"omega": list(cfg.omega_grid), "rho": list(cfg.rho_grid)}).get_grid()

    def work(index: int, cell: Dict[str, float]):
        omega, rho = cell["omega"], cell["rho"]
        try:
            solutions = solve_portfolio(cfg, omega, rho, cache)
        except CuError as e:
            logger.warning(f"[portfolio] cell omega={omega:g} rho={rho:g} failed: {e.message}")
            return e
        wealth = {
            name: simulate_wealth(sol.x1, sol.x2, cfg, omega, rho, cfg.wealth_samples, cfg.seed, index)
            for name, sol in solutions.items()
        }
        logger.info(
            f"[portfolio] cell {index + 1}/{len(cells)} omega={omega:g} rho={rho:g} "
            f"CU x1={solutions[CU].x1[0]:.2f} std={wealth[CU].std:.4f} "
            f"DRO x1={solutions[DRO].x1[0]:.2f} std={wealth[DRO].std:.4f}"
        )
        return solutions, wealth

    outcomes = run_grid(cells, work, threads)

    records: List[Dict] = []
    failures: List[Dict] = []
    diffs: List[Dict] = []
    for cell, outcome in zip(cells, outcomes):
        if isinstance(outcome, CuError):
            failures.append({**cell, **outcome.to_dict()})
            continue
        solutions, wealth = outcome
        for name in (CU, DRO):
            sol, w = solutions[name], wealth[name]
            records.append({
                "omega": cell["omega"],
                "rho": cell["rho"],
                "model": name,
                "x1_asset1": float(sol.x1[0]),
                "x1_asset2": float(sol.x1[1]),
                "x2_asset1": float(sol.x2[0]),
                "x2_asset2": float(sol.x2[1]),
                "objective": sol.objective,
                "wealth_mean": w.mean,
                "wealth_std": w.std,
                "wealth_worst": w.worst,
            })
        cu, dro = wealth[CU], wealth[DRO]
        diff = {
            "omega": cell["omega"],
            "rho": cell["rho"],
            "model": DIFF,
            "x1_asset1": float("nan"),
            "x1_asset2": float("nan"),
            "x2_asset1": float("nan"),
            "x2_asset2": float("nan"),
            "objective": solutions[CU].objective - solutions[DRO].objective,
            "wealth_mean": cu.mean - dro.mean,
            "wealth_std": dro.std - cu.std,
            "wealth_worst": cu.worst - dro.worst,
        }
        records.append(diff)
        diffs.append({**diff, "cu_std": cu.std, "dro_std": dro.std})

    within = [d["cu_std"] <= d["dro_std"] * (1.0 + STD_TOLERANCE) for d in diffs]
    metadata = {
        "profile": cfg.name,
        "seed": cfg.seed,
        "allocation_resolution": cfg.allocation_resolution,
        "support_points": cfg.support_points,
        "wealth_samples": cfg.wealth_samples,
        "initial_wealth": cfg.initial_wealth,
        "gross_returns": cfg.gross_returns,
        "std_tolerance": STD_TOLERANCE,
        "std_within_tolerance_fraction": float(np.mean(within)) if within else None,
        "worst_advantage_vs_omega": _spearman(
            [d["omega"] for d in diffs], [d["wealth_worst"] for d in diffs]
        ),
        "failed_cells": len(failures),
    }
    logger.debug(f"[portfolio] stage value cache {cache.get_stats()}")
    return ExperimentResult("portfolio", list(PORTFOLIO_COLUMNS), records, metadata, failures)
