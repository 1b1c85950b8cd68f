"""
Settings Module for the CU robust toolkit.

Loads experiment configuration files (JSON, versioned by "schema_version"),
applies dotted-path command line overrides and turns the result into the
dataclass configs of experiment_profiles.

A config document starts from a named profile and overlays fields:

    {
      "schema_version": 1,
      "experiment": "knapsack",
      "profile": "desk",
      "grid": {"r": {"min": 0, "max": 4, "count": 8}},
      "budget": 20
    }

Grids may be given as explicit lists or as {"min", "max", "count"}; a
partial entry keeps the profile's remaining bounds.
"""

from __future__ import annotations

import copy
import json
from dataclasses import fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from config import SCHEMA_VERSION
from errors import BadOverride, SchemaError
from experiment_profiles import (
    KnapsackExperimentConfig,
    PortfolioConfig,
    get_knapsack_profile,
    get_portfolio_profile,
    list_profiles,
)


CONFIG_FILE = "cu_config.json"

KNAPSACK_GRIDS = {"r": "r_grid", "lambda": "lambda_grid"}
PORTFOLIO_GRIDS = {"omega": "omega_grid", "rho": "rho_grid"}
RESERVED_KEYS = {"schema_version", "experiment", "profile", "grid", "point"}


def load_config_file(path) -> Dict[str, Any]:
    """
    Load and version-check a JSON config file.

    Raises:
        SchemaError: unreadable file, bad JSON or unsupported schema_version
    """
    path = Path(path)
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as e:
        raise SchemaError(f"cannot read config {path}: {e}")
    except json.JSONDecodeError as e:
        raise SchemaError(f"config {path} is not valid JSON: {e}")
    if not isinstance(doc, dict):
        raise SchemaError(f"config {path} must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported schema_version {version!r}",
            {"expected": SCHEMA_VERSION, "path": str(path)},
        )
    return doc


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: Dict[str, Any], overrides: Optional[Sequence[str]]) -> Dict[str, Any]:
    """
    Apply "dotted.key=value" overrides in order; last writer wins.

    Values are parsed as JSON literals and fall back to plain strings.
    Returns a new document; the input is not modified.

    Raises:
        BadOverride: missing "=", empty key or a path through a non-object
    """
    out = copy.deepcopy(doc)
    for item in overrides or ():
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise BadOverride(f"override {item!r} is not key=value")
        parts = key.split(".")
        if any(not p for p in parts):
            raise BadOverride(f"override key {key!r} has an empty segment")
        node = out
        for part in parts[:-1]:
            nxt = node.setdefault(part, {})
            if not isinstance(nxt, dict):
                raise BadOverride(f"override {key!r} passes through non-object {part!r}")
            node = nxt
        node[parts[-1]] = _parse_value(raw.strip())
    return out


def _grid_values(entry: Any, base: List[float], name: str) -> List[float]:
    if isinstance(entry, list):
        values = [float(v) for v in entry]
    elif isinstance(entry, dict):
        unknown = set(entry) - {"min", "max", "count"}
        if unknown:
            raise SchemaError(f"grid {name} has unknown keys {sorted(unknown)}")
        lo = float(entry.get("min", base[0]))
        hi = float(entry.get("max", base[-1]))
        count = int(entry.get("count", len(base)))
        if count < 1:
            raise SchemaError(f"grid {name} count must be at least 1")
        values = [lo] if count == 1 else [float(v) for v in np.linspace(lo, hi, count)]
    else:
        raise SchemaError(f"grid {name} must be a list or a min/max/count object")
    if not values:
        raise SchemaError(f"grid {name} is empty")
    return values


def _overlay(base, doc: Dict[str, Any], grids: Dict[str, str], point_keys: Sequence[str]):
    known = {f.name for f in fields(base)}
    changes: Dict[str, Any] = {}
    for key, value in doc.items():
        if key in RESERVED_KEYS:
            continue
        if key not in known:
            raise SchemaError(f"unknown config key {key!r}")
        changes[key] = value

    grid_doc = doc.get("grid", {}) or {}
    if not isinstance(grid_doc, dict):
        raise SchemaError("grid must be an object")
    for key, entry in grid_doc.items():
        if key not in grids:
            raise SchemaError(f"unknown grid {key!r}", {"available": list(grids)})
        changes[grids[key]] = _grid_values(entry, getattr(base, grids[key]), key)

    point_doc = doc.get("point", {}) or {}
    for key, value in point_doc.items():
        if key not in point_keys:
            raise SchemaError(f"unknown point key {key!r}")
        changes[key] = float(value)

    try:
        cfg = replace(base, **changes)
    except TypeError as e:
        raise SchemaError(f"bad config value: {e}")
    cfg.validate()
    return cfg


def knapsack_config_from_dict(doc: Optional[Dict[str, Any]] = None) -> KnapsackExperimentConfig:
    """Profile named by doc["profile"] (or the active one), overlaid with the document."""
    doc = doc or {}
    _check_experiment(doc, "knapsack")
    base = get_knapsack_profile(doc.get("profile"))
    return _overlay(base, doc, KNAPSACK_GRIDS, ())


def portfolio_config_from_dict(doc: Optional[Dict[str, Any]] = None) -> PortfolioConfig:
    """Profile named by doc["profile"] (or the active one), overlaid with the document."""
    doc = doc or {}
    _check_experiment(doc, "portfolio")
    base = get_portfolio_profile(doc.get("profile"))
    return _overlay(base, doc, PORTFOLIO_GRIDS, ("omega", "rho"))


def _check_experiment(doc: Dict[str, Any], expected: str) -> None:
    kind = doc.get("experiment", expected)
    if kind != expected:
        raise SchemaError(f"config is for experiment {kind!r}, expected {expected!r}")


def config_to_dict(cfg, experiment: str) -> Dict[str, Any]:
    """Full config document (every field explicit) for a dataclass config."""
    doc: Dict[str, Any] = {"schema_version": SCHEMA_VERSION, "experiment": experiment, "profile": cfg.name}
    doc.update({k: v for k, v in cfg.to_dict().items() if k != "name"})
    return doc


def save_config_file(cfg, experiment: str, path=CONFIG_FILE) -> Path:
    """Write the explicit config document as JSON."""
    path = Path(path)
    with open(path, "w") as f:
        json.dump(config_to_dict(cfg, experiment), f, indent=2)
        f.write("\n")
    return path


def get_config_status(path=CONFIG_FILE) -> Dict[str, Any]:
    """Get information about the config file and available profiles."""
    path = Path(path)
    status: Dict[str, Any] = {
        "config_file": str(path),
        "config_exists": path.exists(),
        "profiles": list_profiles(),
        "active_knapsack": get_knapsack_profile().name,
        "active_portfolio": get_portfolio_profile().name,
    }
    if path.exists():
        try:
            doc = load_config_file(path)
            status["experiment"] = doc.get("experiment")
            status["profile"] = doc.get("profile")
        except SchemaError as e:
            status["error"] = e.message
    return status


def print_config_status(path=CONFIG_FILE) -> None:
    """Print the current configuration status."""
    status = get_config_status(path)

    print("\n" + "=" * 50)
    print("CONFIGURATION STATUS")
    print("=" * 50)
    print(f"Config File: {status['config_file']}")
    print(f"File Exists: {status['config_exists']}")
    print(f"Active Knapsack Profile: {status['active_knapsack']}")
    print(f"Active Portfolio Profile: {status['active_portfolio']}")
    if "experiment" in status:
        print(f"File Experiment: {status['experiment']} (profile {status['profile']})")
    if "error" in status:
        print(f"File Error: {status['error']}")
    for experiment, names in status["profiles"].items():
        print(f"  {experiment}: {', '.join(names)}")
    print("=" * 50 + "\n")


if __name__ == "__main__":
    print_config_status()
