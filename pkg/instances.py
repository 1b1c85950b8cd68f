"""
Instance Files for the CU robust toolkit.

Reads and writes the JSON instance documents consumed by the CLI:
- ellipsoidal_center: center-dependent ellipsoids
- ellipsoidal_matrix: covariance-dependent ellipsoids
- polyhedral_rhs: RHS-dependent polyhedra
- moment: finite-support moment ambiguity (with stage costs)

Common keys: schema_version, kind, periods, dimension, optional decision
(one vector per period) and budget. Canonical output has a fixed key
order, shortest-repr floats, two-space indent and a trailing newline, so
load -> dump is byte-stable on canonical documents.

A moment instance may give a "source" block instead of the explicit
process; the process is then estimated from return data and dumps in
explicit form.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from config import SCHEMA_VERSION
from cu_sets import EllipsoidalCuProcess, MatrixCuProcess, MomentAmbiguityProcess, PolyhedralCuProcess
from dro_counterpart import INF, SUP, StageCost
from errors import CuError, SchemaError
from synthetic_market import fit_var1, generate_var1_returns, moment_process_from_fit

logger = logging.getLogger(__name__)

KINDS = ("ellipsoidal_center", "ellipsoidal_matrix", "polyhedral_rhs", "moment")

Process = Union[EllipsoidalCuProcess, MatrixCuProcess, PolyhedralCuProcess, MomentAmbiguityProcess]


@dataclass
class Instance:
    """A process plus the optional plan, budget and (moment kind) stage costs."""
    kind: str
    process: Process
    decision: Optional[List[np.ndarray]] = None
    budget: Optional[float] = None
    costs: List[StageCost] = field(default_factory=list)
    direction: str = SUP

    @property
    def periods(self) -> int:
        return self.process.periods

    @property
    def dimension(self) -> int:
        return self.process.dim

    def require_decision(self) -> List[np.ndarray]:
        if self.decision is None:
            raise SchemaError(f"{self.kind} instance has no decision")
        return self.decision

    def require_budget(self) -> float:
        if self.budget is None:
            raise SchemaError(f"{self.kind} instance has no budget")
        return self.budget


def _need(doc: Dict[str, Any], key: str) -> Any:
    if key not in doc:
        raise SchemaError(f"instance is missing {key!r}", {"kind": doc.get("kind")})
    return doc[key]


SOURCE_KEYS = {"returns", "synthetic", "delta_scale", "max_points"}


def _fitted_moment_process(source: Dict[str, Any]) -> MomentAmbiguityProcess:
    """
    Two-stage moment process estimated by a VAR(1) fit.

    The data are either explicit rows under "returns" or a seeded synthetic
    series under "synthetic" (A, b, sigma, periods, seed).
    """
    if not isinstance(source, dict):
        raise SchemaError("source must be an object")
    unknown = set(source) - SOURCE_KEYS
    if unknown:
        raise SchemaError(f"unknown source keys {sorted(unknown)}")
    if ("returns" in source) == ("synthetic" in source):
        raise SchemaError("source needs exactly one of returns or synthetic")
    if "returns" in source:
        data = np.asarray(source["returns"], dtype=float)
    else:
        gen = source["synthetic"]
        if not isinstance(gen, dict):
            raise SchemaError("synthetic source must be an object")
        data = generate_var1_returns(
            _need(gen, "A"), _need(gen, "b"), _need(gen, "sigma"),
            int(_need(gen, "periods")), int(gen.get("seed", 0)),
        )
    fit = fit_var1(data)
    logger.debug(f"[instances] moment process fitted on {fit.observations} observations")
    return moment_process_from_fit(
        fit, data, float(source.get("delta_scale", 0.5)), int(source.get("max_points", 12))
    )


def _parse_process(kind: str, doc: Dict[str, Any]) -> Process:
    if kind == "ellipsoidal_center":
        return EllipsoidalCuProcess(
            _need(doc, "mu1"), _need(doc, "radii"), tuple(_need(doc, "cholesky")),
            tuple(_need(doc, "A")), tuple(_need(doc, "F")), tuple(_need(doc, "c")),
        )
    if kind == "ellipsoidal_matrix":
        return MatrixCuProcess(
            tuple(_need(doc, "means")), _need(doc, "radii"), _need(doc, "sigma1"),
            _need(doc, "a"), _need(doc, "f"), tuple(_need(doc, "C")),
        )
    if kind == "polyhedral_rhs":
        return PolyhedralCuProcess(tuple(_need(doc, "G")), tuple(_need(doc, "g")), tuple(_need(doc, "Delta")))
    if doc.get("source") is not None:
        return _fitted_moment_process(doc["source"])
    return MomentAmbiguityProcess(
        supports=tuple(_need(doc, "supports")),
        A=tuple(_need(doc, "A")),
        b=tuple(_need(doc, "b")),
        mu1=_need(doc, "mu1"),
        delta=tuple(_need(doc, "delta")),
        sigma=tuple(_need(doc, "sigma")),
        anchors=tuple(doc["anchors"]) if doc.get("anchors") is not None else None,
        anchor_mode=doc.get("anchor_mode", "fixed"),
    )


def instance_from_dict(doc: Dict[str, Any]) -> Instance:
    """
    Build an Instance from a parsed document.

    Raises:
        SchemaError: version, kind, missing keys or declared sizes
        plus any construction error of the process (NotPsd, InvalidProcess, ...)
    """
    if not isinstance(doc, dict):
        raise SchemaError("instance must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r}", {"expected": SCHEMA_VERSION})
    kind = doc.get("kind")
    if kind not in KINDS:
        raise SchemaError(f"unknown instance kind {kind!r}", {"kinds": list(KINDS)})

    try:
        process = _parse_process(kind, doc)
    except CuError:
        raise
    except (TypeError, ValueError) as e:
        raise SchemaError(f"malformed {kind} instance: {e}")

    for key, actual in (("periods", process.periods), ("dimension", process.dim)):
        declared = doc.get(key)
        if declared is not None and int(declared) != actual:
            raise SchemaError(f"declared {key} {declared} but data has {actual}")

    decision = None
    if doc.get("decision") is not None:
        raw = doc["decision"]
        if len(raw) != process.periods:
            raise SchemaError(f"decision needs {process.periods} vectors")
        decision = [np.asarray(v, dtype=float).reshape(-1) for v in raw]
        if any(v.shape[0] != process.dim for v in decision):
            raise SchemaError(f"decision vectors need length {process.dim}")

    budget = None if doc.get("budget") is None else float(doc["budget"])
    costs: List[StageCost] = []
    direction = doc.get("direction", SUP)
    if kind == "moment":
        raw_costs = doc.get("costs") or [{"kind": "linear"}] * process.periods
        if len(raw_costs) != process.periods:
            raise SchemaError(f"costs need one entry per period ({process.periods})")
        costs = [StageCost.from_dict(c) for c in raw_costs]
        if direction not in (SUP, INF):
            raise SchemaError(f"direction must be sup or inf, got {direction!r}")
    return Instance(kind, process, decision, budget, costs, direction)


def load_instance(path) -> Instance:
    """Read an instance file."""
    path = Path(path)
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as e:
        raise SchemaError(f"cannot read instance {path}: {e}")
    except json.JSONDecodeError as e:
        raise SchemaError(f"instance {path} is not valid JSON: {e}")
    inst = instance_from_dict(doc)
    logger.debug(f"[instances] loaded {inst.kind} T={inst.periods} m={inst.dimension} from {path}")
    return inst


def _vec(v) -> List[float]:
    return [float(x) for x in np.asarray(v, dtype=float).reshape(-1)]


def _mat(M) -> List[List[float]]:
    return [[float(x) for x in row] for row in np.asarray(M, dtype=float)]


def instance_to_dict(inst: Instance) -> Dict[str, Any]:
    """Canonical document, keys in a fixed order."""
    p = inst.process
    doc: Dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "kind": inst.kind,
        "periods": p.periods,
        "dimension": p.dim,
    }
    if inst.kind == "ellipsoidal_center":
        doc["mu1"] = _vec(p.mu1)
        doc["radii"] = _vec(p.radii)
        doc["cholesky"] = [_mat(L) for L in p.chol]
        doc["A"] = [_mat(M) for M in p.A]
        doc["F"] = [_mat(M) for M in p.F]
        doc["c"] = [_vec(v) for v in p.c]
    elif inst.kind == "ellipsoidal_matrix":
        doc["means"] = [_vec(v) for v in p.means]
        doc["radii"] = _vec(p.radii)
        doc["sigma1"] = _mat(p.sigma1)
        doc["a"] = _vec(p.a)
        doc["f"] = _vec(p.f)
        doc["C"] = [_mat(M) for M in p.C]
    elif inst.kind == "polyhedral_rhs":
        doc["G"] = [_mat(M) for M in p.G]
        doc["g"] = [_vec(v) for v in p.g]
        doc["Delta"] = [_mat(M) for M in p.Delta]
    else:
        doc["supports"] = [_mat(S) for S in p.supports]
        doc["A"] = [None] + [_mat(M) for M in p.A[1:]]
        doc["b"] = [None] + [_vec(v) for v in p.b[1:]]
        doc["mu1"] = _vec(p.mu1)
        doc["delta"] = [_vec(v) for v in p.delta]
        doc["sigma"] = [_mat(M) for M in p.sigma]
        doc["anchors"] = [_vec(v) for v in p.anchors]
        doc["anchor_mode"] = p.anchor_mode
        doc["costs"] = [c.to_dict() for c in inst.costs]
        doc["direction"] = inst.direction
    if inst.decision is not None:
        doc["decision"] = [_vec(v) for v in inst.decision]
    if inst.budget is not None:
        doc["budget"] = float(inst.budget)
    return doc


def dump_instance(inst: Instance) -> str:
    """Canonical JSON text."""
    return json.dumps(instance_to_dict(inst), indent=2) + "\n"


def save_instance(inst: Instance, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        f.write(dump_instance(inst))
    return path
