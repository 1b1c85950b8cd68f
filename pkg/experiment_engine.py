"""
Experiment Engine for the CU robust toolkit.

Shared plumbing for the knapsack and portfolio sweeps:
- ExperimentResult: per-(grid value, model) records plus metadata
- GridSpace: named axes expanded into cells in a fixed order
- run_grid: independent work units on a thread pool, gathered by index
- CSV / JSON writers with a fixed float format and row order
- binomial confidence margins and console summaries
"""

from __future__ import annotations

import itertools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

import numpy as np
import pandas as pd
from scipy import stats

from config import CSV_FLOAT_FORMAT

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass
class ExperimentResult:
    """Records of one sweep; columns are the metric names, rows are (grid value, model)."""
    experiment: str
    columns: List[str]
    records: List[Dict[str, Any]] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)
    failures: List[Dict[str, Any]] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.records, columns=self.columns)

    def to_csv_text(self) -> str:
        return self.to_frame().to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "experiment": self.experiment,
            "metadata": self.metadata,
            "failures": self.failures,
            "records": [
                {k: _json_value(rec.get(k)) for k in self.columns}
                for rec in self.records
            ],
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def rows(self, **match) -> List[Dict[str, Any]]:
        """Records whose fields equal every keyword given."""
        return [r for r in self.records if all(r.get(k) == v for k, v in match.items())]


def _json_value(v: Any) -> Any:
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


@dataclass
class GridSpace:
    """
    Named sweep axes.

    Cells are the cartesian product of the axes, first axis slowest,
    which fixes the record order of every experiment.
    """
    axes: Dict[str, List[float]]

    def get_grid(self) -> List[Dict[str, float]]:
        """Generate all axis combinations."""
        keys = list(self.axes)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.axes[k] for k in keys))]

    def __len__(self) -> int:
        size = 1
        for values in self.axes.values():
            size *= len(values)
        return size


def run_grid(items: Sequence[T], worker: Callable[[int, T], R], threads: int = 1) -> List[R]:
    """
    Evaluate worker(index, item) for every item.

    Results land in index-addressed slots, so the output does not depend
    on the thread count or on completion order.
    """
    if threads <= 1 or len(items) <= 1:
        return [worker(i, item) for i, item in enumerate(items)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(worker, i, item) for i, item in enumerate(items)]
        return [f.result() for f in futures]


def binomial_margin(p: float, n: int, confidence: float = 0.95) -> float:
    """Normal-approximation half-width of a binomial proportion interval."""
    if n <= 0:
        return float("nan")
    z = float(stats.norm.ppf(0.5 + confidence / 2.0))
    p = min(max(float(p), 0.0), 1.0)
    return z * float(np.sqrt(p * (1.0 - p) / n))


def save_results(result: ExperimentResult, path, fmt: str = "csv") -> Path:
    """Write records as CSV or JSON."""
    output_path = Path(path)
    if output_path.parent and not output_path.parent.exists():
        output_path.parent.mkdir(parents=True, exist_ok=True)
    text = result.to_csv_text() if fmt == "csv" else result.to_json_text()
    with open(output_path, "w", newline="") as f:
        f.write(text)
    return output_path


def load_results(path) -> List[Dict[str, Any]]:
    """Read a CSV written by save_results back into records."""
    return pd.read_csv(Path(path)).to_dict(orient="records")


def print_summary(result: ExperimentResult, metrics: Sequence[str], keys: Sequence[str]) -> None:
    """Print a fixed-width table of selected columns."""
    if not result.records:
        print("No results to summarize.")
        return

    width = 14 * (len(keys) + len(metrics))
    print("\n" + "=" * width)
    print(f"{result.experiment.upper()} SUMMARY")
    print("=" * width)
    print("".join(f"{k:<14}" for k in list(keys) + list(metrics)))
    print("-" * width)
    for rec in result.records:
        cells = []
        for k in list(keys) + list(metrics):
            v = rec.get(k)
            cells.append(f"{v:<14.6g}" if isinstance(v, (float, np.floating)) else f"{str(v):<14}")
        print("".join(cells))
    print("-" * width)
    if result.failures:
        print(f"Failures: {len(result.failures)} (first: {result.failures[0].get('message')})")
    for key, value in result.metadata.items():
        if isinstance(value, (int, float, str, bool)) or value is None:
            print(f"{key}: {value}")
    print("=" * width + "\n")
