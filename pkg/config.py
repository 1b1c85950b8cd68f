# config.py
"""
Configuration for the CU robust toolkit.

You keep:
- run-time knobs (seed, worker cap, log level) in env vars
- numeric tolerances shared by every module here

Experiment parameters are managed via experiment_profiles.py.
Set CU_KNAPSACK_PROFILE / CU_PORTFOLIO_PROFILE to switch presets.
"""

import os


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        return default


BASE_SEED = _env_int("CU_SEED", 20240601)
MAX_THREADS = max(1, _env_int("CU_THREADS", 1))
LOG_LEVEL = os.getenv("CU_LOG_LEVEL", "WARNING").upper()


SCHEMA_VERSION = 1

# absolute residual tolerance for every counterpart / row check
FEASIBILITY_TOL = 1e-9

SYMMETRY_TOL = 1e-10
PIVOT_TOL = 1e-9

# lambda_min above -PSD_TOL counts as PSD
PSD_TOL = 1e-7
CUT_DUPLICATE_COSINE = 1.0 - 1e-6
MAX_CUT_ITERATIONS = 200

MOMENT_STRICT_SLACK = 1e-6

MAX_SIGN_HORIZON = 5
MAX_EXHAUSTIVE_ITEMS = 24
MAX_BRANCH_AND_BOUND_ITEMS = 40

CSV_FLOAT_FORMAT = "%.9g"


VERBS = [
    "reformulate",
    "worst-case",
    "solve-knapsack",
    "run-knapsack",
    "solve-portfolio",
    "run-portfolio",
    "verify",
    "export",
]

VERBS_REQUIRING_INPUT = {"reformulate", "worst-case", "export"}

VERIFY_SUITES = ["theorem1", "duality", "aro", "dro", "all"]


def validate_thread_count(threads: int) -> bool:
    """True if the worker cap is usable."""
    return isinstance(threads, int) and threads >= 1


def get_runtime_info() -> str:
    """Get a display string for the current runtime settings."""
    return (
        f"seed {BASE_SEED} | "
        f"threads {MAX_THREADS} | "
        f"log {LOG_LEVEL}"
    )
