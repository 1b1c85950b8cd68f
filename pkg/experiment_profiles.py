"""
Experiment Profiles for the CU robust toolkit.

Defines the benchmark configurations:
- Robust knapsack: desk (10 + 10 items, certified by exhaustive search),
  full (20 + 20 items, branch-and-bound) and the negative-correlation variant
- Two-asset DRO portfolio: desk (coarse grids) and full (fine grids)

Each profile contains every parameter needed for:
- instance generation (seeded)
- the solver mode
- Monte Carlo evaluation
- the sweep grids
"""

from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional
import os

import numpy as np

from config import BASE_SEED, MAX_BRANCH_AND_BOUND_ITEMS, MAX_EXHAUSTIVE_ITEMS
from errors import SchemaError


def _grid(start: float, stop: float, count: int) -> List[float]:
    return [float(v) for v in np.linspace(start, stop, count)]


@dataclass
class KnapsackExperimentConfig:
    """Two-period robust knapsack sweep, CU versus NC sets."""
    name: str
    display_name: str

    items_per_period: int = 10
    replications: int = 10
    estimation_samples: int = 500
    evaluation_samples: int = 500

    r_grid: List[float] = field(default_factory=lambda: _grid(0.0, 4.0, 8))
    lambda_grid: List[float] = field(default_factory=lambda: _grid(-1.0, 1.0, 9))
    default_lambda: float = 0.5
    sweep_radius: float = 2.0

    budget: float = 20.0
    seed: int = BASE_SEED

    sigma_scale: float = 0.1
    cost_mean_first: float = 1.0
    cost_mean_second: float = 1.25
    cost_cov_divisor: float = 100.0

    nc_center: str = "first_period"
    solver: str = "auto"

    def validate(self) -> None:
        """Raise SchemaError on an unusable configuration."""
        if not self.r_grid or not self.lambda_grid:
            raise SchemaError("knapsack grids must be nonempty")
        for key in ("items_per_period", "replications", "estimation_samples", "evaluation_samples"):
            if int(getattr(self, key)) < 1:
                raise SchemaError(f"{key} must be at least 1")
        if self.estimation_samples < 2:
            raise SchemaError("covariance estimation needs at least two samples")
        if any(r < 0 for r in self.r_grid) or self.sweep_radius < 0:
            raise SchemaError("radii must be nonnegative")
        if not np.isfinite(self.budget):
            raise SchemaError("budget must be finite")
        if self.nc_center not in ("first_period", "nominal"):
            raise SchemaError(f"unknown nc_center {self.nc_center!r}")
        if self.solver not in ("auto", "exhaustive", "branch_and_bound"):
            raise SchemaError(f"unknown solver {self.solver!r}")
        total = 2 * self.items_per_period
        if self.solver == "exhaustive" and total > MAX_EXHAUSTIVE_ITEMS:
            raise SchemaError(f"exhaustive search is limited to {MAX_EXHAUSTIVE_ITEMS} items")
        if total > MAX_BRANCH_AND_BOUND_ITEMS:
            raise SchemaError(f"branch-and-bound is limited to {MAX_BRANCH_AND_BOUND_ITEMS} items")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]):
        """Inverse of to_dict; unknown keys are rejected."""
        unknown = set(doc) - {f.name for f in fields(cls)}
        if unknown:
            raise SchemaError(f"unknown {cls.__name__} keys {sorted(unknown)}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg


@dataclass
class PortfolioConfig:
    """Two-period, two-asset worst-case expected utility, CU versus plain DRO."""
    name: str
    display_name: str

    mu1: List[float] = field(default_factory=lambda: [0.03, 0.06])
    delta: List[float] = field(default_factory=lambda: [0.02, 0.02])
    variance: float = 0.005

    utility_slopes: List[float] = field(default_factory=lambda: [1.5, 1.0, 0.2])
    utility_intercepts: List[float] = field(default_factory=lambda: [0.0, 0.015, 0.06])

    omega_grid: List[float] = field(default_factory=lambda: _grid(-2.0, 2.0, 9))
    rho_grid: List[float] = field(default_factory=lambda: _grid(-1.0, 1.0, 9))
    omega: float = 0.0
    rho: float = 0.0

    allocation_resolution: int = 10
    support_points: int = 5
    support_width: float = 3.0

    wealth_samples: int = 2000
    initial_wealth: float = 100.0
    gross_returns: bool = True
    seed: int = BASE_SEED

    def validate(self) -> None:
        """Raise SchemaError on an unusable configuration."""
        if len(self.mu1) != 2 or len(self.delta) != 2:
            raise SchemaError("portfolio model has exactly two assets")
        if any(d < 0 for d in self.delta):
            raise SchemaError("delta must be nonnegative")
        if self.variance <= 0:
            raise SchemaError("variance must be positive")
        for rho in list(self.rho_grid) + [self.rho]:
            if not -1.0 <= rho <= 1.0:
                raise SchemaError(f"rho {rho} outside [-1, 1]")
        if self.allocation_resolution < 2 or self.support_points < 2:
            raise SchemaError("grid resolutions must be at least 2")
        if self.wealth_samples < 2:
            raise SchemaError("wealth simulation needs at least two samples")
        if self.initial_wealth <= 0:
            raise SchemaError("initial wealth must be positive")
        if len(self.utility_slopes) != len(self.utility_intercepts) or not self.utility_slopes:
            raise SchemaError("utility needs matching slopes and intercepts")
        if not self.omega_grid or not self.rho_grid:
            raise SchemaError("portfolio grids must be nonempty")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]):
        """Inverse of to_dict; unknown keys are rejected."""
        unknown = set(doc) - {f.name for f in fields(cls)}
        if unknown:
            raise SchemaError(f"unknown {cls.__name__} keys {sorted(unknown)}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg


KNAPSACK_DESK = KnapsackExperimentConfig(
    name="desk",
    display_name="Knapsack desk (10 + 10 items, exhaustive)",
)

KNAPSACK_FULL = KnapsackExperimentConfig(
    name="full",
    display_name="Knapsack full scale (20 + 20 items, branch-and-bound)",
    items_per_period=20,
    replications=30,
    r_grid=_grid(0.0, 4.0, 20),
    lambda_grid=_grid(-1.0, 1.0, 20),
    budget=40.0,
    solver="branch_and_bound",
)

KNAPSACK_NEGATIVE = KnapsackExperimentConfig(
    name="negative",
    display_name="Knapsack desk, negative temporal correlation",
    default_lambda=-0.2,
)

PORTFOLIO_DESK = PortfolioConfig(
    name="desk",
    display_name="Portfolio desk (allocation step 1/10, 5 support points)",
)

PORTFOLIO_FULL = PortfolioConfig(
    name="full",
    display_name="Portfolio fine (allocation step 1/100, 7 support points)",
    allocation_resolution=100,
    support_points=7,
)


KNAPSACK_PROFILES = {
    "desk": KNAPSACK_DESK,
    "full": KNAPSACK_FULL,
    "negative": KNAPSACK_NEGATIVE,
}

PORTFOLIO_PROFILES = {
    "desk": PORTFOLIO_DESK,
    "full": PORTFOLIO_FULL,
}


def get_knapsack_profile(name: Optional[str] = None) -> KnapsackExperimentConfig:
    """
    Get a knapsack profile by name.

    Set CU_KNAPSACK_PROFILE env var to switch the default:
    - "desk" (default)
    - "full"
    - "negative"
    """
    profile_name = name or os.getenv("CU_KNAPSACK_PROFILE", "desk")
    if profile_name not in KNAPSACK_PROFILES:
        raise SchemaError(f"unknown knapsack profile {profile_name!r}", {"available": list(KNAPSACK_PROFILES)})
    return KNAPSACK_PROFILES[profile_name]


def get_portfolio_profile(name: Optional[str] = None) -> PortfolioConfig:
    """
    Get a portfolio profile by name.

    Set CU_PORTFOLIO_PROFILE env var to switch the default:
    - "desk" (default)
    - "full"
    """
    profile_name = name or os.getenv("CU_PORTFOLIO_PROFILE", "desk")
    if profile_name not in PORTFOLIO_PROFILES:
        raise SchemaError(f"unknown portfolio profile {profile_name!r}", {"available": list(PORTFOLIO_PROFILES)})
    return PORTFOLIO_PROFILES[profile_name]


def list_profiles() -> Dict[str, list]:
    """List all available profile names per experiment."""
    return {
        "knapsack": list(KNAPSACK_PROFILES.keys()),
        "portfolio": list(PORTFOLIO_PROFILES.keys()),
    }
