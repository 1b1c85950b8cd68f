"""
Wealth Simulator for the CU robust toolkit.

Simulates two periods of a two-asset allocation under the connected
return model:
- d_1 ~ N(mu_1, Sigma_1)
- d_2 ~ N(mu_1 + omega (d_1 - mu_1), Sigma_1)
both clipped to the support box, and compounds wealth
W_{t+1} = W_t * (d_hat' x_t).

Returns are net by default, so d_hat = 1 + d (gross multipliers); with
gross_returns off the formula is applied to d itself.
"""

from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np

from errors import SchemaError
from experiment_profiles import PortfolioConfig
from numerics import as_vector, cholesky, keyed_rng


def asset_covariance(cfg: PortfolioConfig, rho: float) -> np.ndarray:
    """Sigma_1 = variance * [[1, rho], [rho, 1]]."""
    v = float(cfg.variance)
    return np.array([[v, v * rho], [v * rho, v]])


def support_bounds(cfg: PortfolioConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Per-asset box mu_1 +- support_width * sqrt(variance)."""
    mu = np.asarray(cfg.mu1, dtype=float)
    half = cfg.support_width * np.sqrt(cfg.variance)
    return mu - half, mu + half


@dataclass
class WealthStats:
    """Terminal wealth statistics of one allocation pair."""
    mean: float
    std: float
    worst: float
    samples: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean": self.mean,
            "std": self.std,
            "worst": self.worst,
            "samples": self.samples,
        }

    def __iter__(self):
        return iter((self.mean, self.std, self.worst))


def sample_returns(
    cfg: PortfolioConfig,
    omega: float,
    rho: float,
    n: int,
    seed: int,
    cell: int = 0,
) -> Tuple[np.ndarray, np.ndarray]:
    """(d_1, d_2) return samples of shape (n, 2) from the streams keyed (seed, cell, period)."""
    mu = np.asarray(cfg.mu1, dtype=float)
    L = cholesky(asset_covariance(cfg, rho))
    lo, hi = support_bounds(cfg)
    z1 = keyed_rng(seed, cell, 1).standard_normal((n, 2))
    z2 = keyed_rng(seed, cell, 2).standard_normal((n, 2))
    d1 = np.clip(mu + z1 @ L.T, lo, hi)
    d2 = np.clip(mu + omega * (d1 - mu) + z2 @ L.T, lo, hi)
    return d1, d2


def terminal_wealth(x1, x2, d1: np.ndarray, d2: np.ndarray, initial_wealth: float, gross_returns: bool = True) -> np.ndarray:
    """W_2 per path from W_0 through both periods."""
    x1 = as_vector(x1, 2, name="x1")
    x2 = as_vector(x2, 2, name="x2")
    shift = 1.0 if gross_returns else 0.0
    return initial_wealth * ((d1 + shift) @ x1) * ((d2 + shift) @ x2)


def simulate_wealth(
    x1,
    x2,
    cfg: PortfolioConfig,
    omega: float,
    rho: float,
    n: int,
    seed: int,
    cell: int = 0,
) -> WealthStats:
    """
    Mean, sample standard deviation and minimum of terminal wealth over n paths.

    Identical (seed, cell) give identical paths, so allocations compared
    within a cell share their random numbers.
    """
    if n < 2:
        raise SchemaError("wealth simulation needs at least two samples")
    d1, d2 = sample_returns(cfg, omega, rho, n, seed, cell)
    wealth = terminal_wealth(x1, x2, d1, d2, cfg.initial_wealth, cfg.gross_returns)
    return WealthStats(
        mean=float(wealth.mean()),
        std=float(wealth.std(ddof=1)),
        worst=float(wealth.min()),
        samples=n,
    )


def format_wealth(stats: WealthStats, label: str = "") -> str:
    """One console line for a wealth triple."""
    prefix = f"{label}: " if label else ""
    return f"{prefix}mean {stats.mean:.4f} | std {stats.std:.4f} | worst {stats.worst:.4f} ({stats.samples} paths)"
