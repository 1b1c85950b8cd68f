"""
Synthetic return data and parameter estimation for the CU robust toolkit.

The connected sets need a conditional-mean model mu_{t+1}(d_t) = A d_t + b.
This module:
- generates synthetic VAR(1) returns d_{t+1} = A d_t + b + e_t as a pandas
  frame (a stand-in for market data, labelled as such in frame.attrs)
- estimates sample mean / covariance
- fits a VAR(1) by least squares
- builds a two-stage MomentAmbiguityProcess from a fit

Frame layout:
    period, <asset_1>, ..., <asset_m>
    0,      0.031,       ..., 0.058
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from cu_sets import MomentAmbiguityProcess
from errors import DimensionMismatch, InvalidProcess
from numerics import as_matrix, as_vector, cholesky, keyed_rng, symmetrize

logger = logging.getLogger(__name__)

SYNTHETIC_LABEL = "synthetic VAR(1) returns, not market data"


def default_asset_names(m: int) -> List[str]:
    return [f"asset_{i + 1}" for i in range(m)]


def generate_var1_returns(
    A,
    b,
    sigma,
    periods: int,
    seed: int,
    assets: Optional[Sequence[str]] = None,
    burn_in: int = 50,
) -> pd.DataFrame:
    """
    Simulate d_{t+1} = A d_t + b + e_t, e_t ~ N(0, sigma).

    The chain starts at the stationary mean (I - A)^{-1} b when it exists
    (else at b) and drops burn_in periods.

    Raises:
        DimensionMismatch, NotPsd
    """
    b = as_vector(b, name="b")
    m = b.shape[0]
    A = as_matrix(A, m, m, name="A")
    L = cholesky(symmetrize(as_matrix(sigma, m, m, name="sigma")))
    if periods < 2:
        raise InvalidProcess("need at least two periods")
    names = list(assets) if assets is not None else default_asset_names(m)
    if len(names) != m:
        raise DimensionMismatch(f"{len(names)} asset names for {m} assets")

    try:
        d = np.linalg.solve(np.eye(m) - A, b)
    except np.linalg.LinAlgError:
        d = b.copy()
    z = keyed_rng(seed, 0, 7).standard_normal((burn_in + periods, m))
    rows = np.zeros((periods, m))
    for t in range(burn_in + periods):
        d = A @ d + b + L @ z[t]
        if t >= burn_in:
            rows[t - burn_in] = d

    frame = pd.DataFrame(rows, columns=names)
    frame.index.name = "period"
    frame.attrs["source"] = SYNTHETIC_LABEL
    return frame


def _returns(data) -> np.ndarray:
    if isinstance(data, pd.DataFrame):
        arr = data.to_numpy(dtype=float)
    else:
        arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or not np.all(np.isfinite(arr)):
        raise InvalidProcess("returns must be a finite 2-d table")
    return arr


def estimate_mean_cov(data) -> Tuple[np.ndarray, np.ndarray]:
    """Sample mean and unbiased sample covariance (rows = observations)."""
    arr = _returns(data)
    if arr.shape[0] < 2:
        raise InvalidProcess("need at least two observations")
    return arr.mean(axis=0), symmetrize(np.atleast_2d(np.cov(arr, rowvar=False)))


@dataclass
class Var1Fit:
    """Least-squares VAR(1) estimate."""
    A: np.ndarray
    b: np.ndarray
    sigma: np.ndarray
    observations: int

    def conditional_mean(self, d_prev) -> np.ndarray:
        return self.A @ as_vector(d_prev, self.b.shape[0], name="d_prev") + self.b


def fit_var1(data) -> Var1Fit:
    """
    Regress d_{t+1} on (d_t, 1) by least squares.

    Residual covariance uses n - m - 1 degrees of freedom.

    Raises:
        InvalidProcess: fewer observations than regressors
    """
    arr = _returns(data)
    n, m = arr.shape
    if n - 1 <= m + 1:
        raise InvalidProcess(f"{n} observations are too few to fit {m} assets")
    X = np.hstack([arr[:-1], np.ones((n - 1, 1))])
    Y = arr[1:]
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    A = coef[:m].T
    b = coef[m]
    resid = Y - X @ coef
    sigma = symmetrize(resid.T @ resid / (n - 1 - (m + 1)))
    logger.debug(f"[market] VAR(1) fit on {n} rows, spectral radius {max(abs(np.linalg.eigvals(A))):.3f}")
    return Var1Fit(A, b, sigma, n)


def moment_process_from_fit(
    fit: Var1Fit,
    data,
    delta_scale: float = 0.5,
    max_points: int = 12,
) -> MomentAmbiguityProcess:
    """
    Two-stage moment process with conditional means from a VAR(1) fit.

    Period 1: support = the last max_points distinct observations, mean
    box around their average (half-width delta_scale * std), covariance cap
    the sample covariance plus the support spread. Period 2: support =
    period-1 points plus every conditional mean A xi + b, covariance cap
    the residual covariance anchored at the conditional mean.
    """
    arr = _returns(data)
    points = np.unique(arr[-max_points:], axis=0)
    if points.shape[0] < 2:
        raise InvalidProcess("need at least two distinct observations for the support")
    _, cov = estimate_mean_cov(arr)
    mu1 = points.mean(axis=0)
    delta = delta_scale * np.sqrt(np.diag(cov))
    dev = points - mu1
    # cap covers the uniform distribution on the support
    sigma1 = symmetrize(cov + dev.T @ dev / points.shape[0])

    centers = points @ fit.A.T + fit.b
    extra = [c for c in centers if not any(np.max(np.abs(c - p)) <= 1e-12 for p in points)]
    support2 = np.vstack([points] + ([np.array(extra)] if extra else []))
    return MomentAmbiguityProcess(
        supports=(points, support2),
        A=(None, fit.A),
        b=(None, fit.b),
        mu1=mu1,
        delta=(delta, delta),
        sigma=(sigma1, fit.sigma),
        anchor_mode="conditional",
    )
