"""
Dense LP engine for the CU robust toolkit.

Two-phase tableau simplex with:
- Dantzig pricing, switching to Bland's rule after a stall
- primal values, row duals (d objective / d rhs) and the objective
- an unbounded ray or a phase-1 Farkas vector when no optimum exists

On top of it, solve_with_psd_cuts enforces symmetric matrix variables to be
PSD by adding eigenvector cuts v'Rv >= 0 until the realized blocks pass.

LP text format (write_lp_text / read_lp_text):

    min                      # or max
    c_1 c_2 ... c_n
    a_11 ... a_1n <= b_1     # one row per line, <=, >= or =
    ...
    bounds                   # optional, one "lo hi" line per variable
    0 inf
    -inf 5
    end

Anything after '#' on a line is ignored.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import CUT_DUPLICATE_COSINE, FEASIBILITY_TOL, MAX_CUT_ITERATIONS, PIVOT_TOL, PSD_TOL
from errors import CutLimitExceeded, DimensionMismatch, NumericalFailure, SchemaError
from numerics import min_eigenvalue

logger = logging.getLogger(__name__)

SENSES = ("<=", ">=", "=")

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class LpProblem:
    """Linear program: optimize c'x subject to A x (sense) b, lower <= x <= upper."""
    sense: str
    c: np.ndarray
    A: np.ndarray
    row_senses: Tuple[str, ...]
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    var_names: Tuple[str, ...] = ()
    row_names: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise SchemaError(f"objective sense must be min or max, got {self.sense!r}")
        n = self.c.shape[0]
        m = self.b.shape[0]
        if self.A.shape != (m, n):
            raise DimensionMismatch(
                f"constraint matrix is {self.A.shape}, expected ({m}, {n})",
                {"rows": m, "cols": n},
            )
        if len(self.row_senses) != m:
            raise DimensionMismatch("one sense per row required")
        for s in self.row_senses:
            if s not in SENSES:
                raise SchemaError(f"unknown row sense {s!r}")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise DimensionMismatch("bounds must have one entry per variable")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))):
            raise SchemaError("LP coefficients must be finite")
        if np.any(self.lower > self.upper):
            raise SchemaError("lower bound above upper bound")

    @property
    def num_vars(self) -> int:
        return int(self.c.shape[0])

    @property
    def num_rows(self) -> int:
        return int(self.b.shape[0])

    @classmethod
    def create(
        cls,
        sense: str,
        c,
        A=None,
        row_senses: Sequence[str] = (),
        b=None,
        lower=None,
        upper=None,
        var_names: Sequence[str] = (),
        row_names: Sequence[str] = (),
    ) -> "LpProblem":
        """Build from plain lists; bounds default to x >= 0."""
        c = np.asarray(c, dtype=float).reshape(-1)
        n = c.shape[0]
        A = np.zeros((0, n)) if A is None else np.asarray(A, dtype=float).reshape(-1, n)
        b = np.zeros(0) if b is None else np.asarray(b, dtype=float).reshape(-1)
        lower = np.zeros(n) if lower is None else np.asarray(lower, dtype=float).reshape(-1)
        upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float).reshape(-1)
        return cls(sense, c, A, tuple(row_senses), b, lower, upper, tuple(var_names), tuple(row_names))

    def with_rows(self, rows: Sequence[Tuple[np.ndarray, str, float]], names: Sequence[str] = ()) -> "LpProblem":
        """Copy with extra rows appended."""
        if not rows:
            return self
        A = np.vstack([self.A] + [np.asarray(r[0], dtype=float).reshape(1, -1) for r in rows])
        senses = self.row_senses + tuple(r[1] for r in rows)
        b = np.concatenate([self.b, [float(r[2]) for r in rows]])
        base = list(self.row_names) or [f"row{i}" for i in range(self.num_rows)]
        extra = list(names) or [f"cut{i}" for i in range(len(rows))]
        row_names = tuple(base + extra)
        return LpProblem(self.sense, self.c, A, senses, b, self.lower, self.upper, self.var_names, row_names)

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """Per-row violation (>= 0 means violated by that much)."""
        ax = self.A @ x
        out = np.zeros(self.num_rows)
        for i, s in enumerate(self.row_senses):
            if s == "<=":
                out[i] = ax[i] - self.b[i]
            elif s == ">=":
                out[i] = self.b[i] - ax[i]
            else:
                out[i] = abs(ax[i] - self.b[i])
        return out


class LpBuilder:
    """Incremental construction of an LpProblem by named variables."""

    def __init__(self, sense: str = "min"):
        self.sense = sense
        self._names: List[str] = []
        self._index: Dict[str, int] = {}
        self._lower: List[float] = []
        self._upper: List[float] = []
        self._cost: Dict[int, float] = {}
        self._rows: List[Tuple[Dict[int, float], str, float]] = []
        self._row_names: List[str] = []

    def add_variable(self, name: str, lower: float = 0.0, upper: float = np.inf, cost: float = 0.0) -> int:
        if name in self._index:
            raise SchemaError(f"duplicate variable {name}")
        j = len(self._names)
        self._names.append(name)
        self._index[name] = j
        self._lower.append(float(lower))
        self._upper.append(float(upper))
        if cost:
            self._cost[j] = float(cost)
        return j

    def index(self, name: str) -> int:
        return self._index[name]

    @property
    def num_vars(self) -> int:
        return len(self._names)

    def set_cost(self, j: int, value: float) -> None:
        self._cost[j] = float(value)

    def add_cost(self, j: int, value: float) -> None:
        self._cost[j] = self._cost.get(j, 0.0) + float(value)

    def add_row(self, coeffs: Mapping[int, float], sense: str, rhs: float, name: str = "") -> int:
        if sense not in SENSES:
            raise SchemaError(f"unknown row sense {sense!r}")
        i = len(self._rows)
        self._rows.append((dict(coeffs), sense, float(rhs)))
        self._row_names.append(name or f"row{i}")
        return i

    def build(self) -> LpProblem:
        n = len(self._names)
        c = np.zeros(n)
        for j, v in self._cost.items():
            c[j] = v
        A = np.zeros((len(self._rows), n))
        for i, (coeffs, _, _) in enumerate(self._rows):
            for j, v in coeffs.items():
                A[i, j] += v
        return LpProblem(
            self.sense,
            c,
            A,
            tuple(r[1] for r in self._rows),
            np.array([r[2] for r in self._rows], dtype=float),
            np.array(self._lower, dtype=float),
            np.array(self._upper, dtype=float),
            tuple(self._names),
            tuple(self._row_names),
        )


@dataclass
class LpSolution:
    """Result of solve_lp / solve_with_psd_cuts."""
    status: str
    x: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None
    objective: float = float("nan")
    ray: Optional[np.ndarray] = None
    farkas: Optional[np.ndarray] = None
    iterations: int = 0
    cuts: int = 0
    history: List[float] = field(default_factory=list)

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL

    def to_dict(self) -> Dict:
        return {
            "status": self.status,
            "objective": self.objective,
            "x": None if self.x is None else [float(v) for v in self.x],
            "duals": None if self.duals is None else [float(v) for v in self.duals],
            "iterations": self.iterations,
            "cuts": self.cuts,
        }


@dataclass
class _Standard:
    """x = offset + M z with z >= 0; rows over z already flipped to b >= 0."""
    M: np.ndarray
    offset: np.ndarray
    A: np.ndarray
    senses: List[str]
    b: np.ndarray
    row_sign: np.ndarray
    cost: np.ndarray
    num_original_rows: int


def _standardize(p: LpProblem) -> _Standard:
    n = p.num_vars
    cols: List[np.ndarray] = []
    offset = np.zeros(n)
    bound_rows: List[Tuple[int, float]] = []
    for j in range(n):
        lo, hi = p.lower[j], p.upper[j]
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(lo):
            offset[j] = lo
            cols.append(e)
            if np.isfinite(hi):
                bound_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append(-e)
        else:
            cols.append(e)
            cols.append(-e)
    M = np.column_stack(cols) if cols else np.zeros((n, 0))
    nz = M.shape[1]

    A = p.A @ M
    b = p.b - p.A @ offset
    senses = list(p.row_senses)
    if bound_rows:
        extra = np.zeros((len(bound_rows), nz))
        for r, (k, width) in enumerate(bound_rows):
            extra[r, k] = 1.0
        A = np.vstack([A, extra])
        b = np.concatenate([b, [w for _, w in bound_rows]])
        senses += ["<="] * len(bound_rows)

    row_sign = np.ones(A.shape[0])
    flip = {"<=": ">=", ">=": "<=", "=": "="}
    for i in range(A.shape[0]):
        if b[i] < 0:
            A[i] = -A[i]
            b[i] = -b[i]
            senses[i] = flip[senses[i]]
            row_sign[i] = -1.0

    direction = 1.0 if p.sense == "min" else -1.0
    cost = direction * (p.c @ M)
    return _Standard(M, offset, A, senses, b, row_sign, cost, p.num_rows)


class _Tableau:
    """Dense simplex tableau [B^-1 A | B^-1 b] with an explicit basis list."""

    def __init__(self, std: _Standard):
        m, nz = std.A.shape
        n_slack = sum(1 for s in std.senses if s != "=")
        n_art = sum(1 for s in std.senses if s != "<=")
        width = nz + n_slack + n_art
        T = np.zeros((m, width + 1))
        T[:, :nz] = std.A
        T[:, -1] = std.b
        basis = [0] * m
        unit_col = [0] * m
        art_cols: List[int] = []
        k_slack = nz
        k_art = nz + n_slack
        for i, s in enumerate(std.senses):
            if s == "<=":
                T[i, k_slack] = 1.0
                basis[i] = unit_col[i] = k_slack
                k_slack += 1
            elif s == ">=":
                T[i, k_slack] = -1.0
                k_slack += 1
                T[i, k_art] = 1.0
                basis[i] = unit_col[i] = k_art
                art_cols.append(k_art)
                k_art += 1
            else:
                T[i, k_art] = 1.0
                basis[i] = unit_col[i] = k_art
                art_cols.append(k_art)
                k_art += 1
        self.T = T
        self.basis = basis
        self.unit_col = unit_col
        self.art_cols = art_cols
        self.num_struct = nz
        self.width = width
        self.iterations = 0
        self.max_iterations = 50 * (m + width) + 1000

    @property
    def rows(self) -> int:
        return self.T.shape[0]

    def pivot(self, r: int, e: int) -> None:
        T = self.T
        T[r] /= T[r, e]
        col = T[:, e].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, e] = 0.0
        T[r, e] = 1.0
        rhs = T[:, -1]
        rhs[(rhs < 0) & (rhs > -FEASIBILITY_TOL)] = 0.0
        self.basis[r] = e

    def objective(self, cost: np.ndarray) -> float:
        return float(cost[self.basis] @ self.T[:, -1])

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        return cost - cost[self.basis] @ self.T[:, :-1]

    def run(self, cost: np.ndarray, allowed: np.ndarray) -> Tuple[str, Optional[int]]:
        """
        Minimize cost over the current tableau.

        Returns:
            ("optimal", None) or ("unbounded", entering column)
        """
        m = self.rows
        stall_limit = 3 * (m + self.width)
        stall = 0
        bland = False
        last = self.objective(cost)
        while True:
            if self.iterations >= self.max_iterations:
                raise NumericalFailure(
                    f"simplex did not converge in {self.iterations} iterations",
                    {"iterations": self.iterations},
                )
            d = self.reduced_costs(cost)
            d[~allowed] = 0.0
            candidates = np.flatnonzero(d < -PIVOT_TOL)
            if candidates.size == 0:
                return OPTIMAL, None
            if bland:
                e = int(candidates[0])
            else:
                e = int(candidates[np.argmin(d[candidates])])

            col = self.T[:, e]
            rows = np.flatnonzero(col > PIVOT_TOL)
            if rows.size == 0:
                return UNBOUNDED, e
            ratios = self.T[rows, -1] / col[rows]
            best = float(np.min(ratios))
            tied = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
            if bland:
                r = int(min(tied, key=lambda i: self.basis[i]))
            else:
                r = int(tied[np.argmax(col[tied])])

            self.pivot(r, e)
            self.iterations += 1

            value = self.objective(cost)
            if value < last - 1e-12 * (1.0 + abs(last)):
                stall = 0
                last = value
            else:
                stall += 1
                if not bland and stall > stall_limit:
                    logger.debug(f"[lp] switching to Bland's rule after {stall} stalled pivots")
                    bland = True

    def drive_out_artificials(self) -> None:
        """Pivot zero-level artificials out of the basis where a structural column allows."""
        art = set(self.art_cols)
        for r in range(self.rows):
            if self.basis[r] not in art:
                continue
            row = self.T[r, :self.width].copy()
            row[list(art)] = 0.0
            nz = np.flatnonzero(np.abs(row) > PIVOT_TOL)
            if nz.size:
                self.pivot(r, int(nz[np.argmax(np.abs(row[nz]))]))
            # otherwise the row is redundant and its artificial stays basic at zero

    def row_multipliers(self, cost: np.ndarray) -> np.ndarray:
        """y' = c_B' B^-1, read from the columns that formed the initial basis."""
        binv = self.T[:, self.unit_col]
        return cost[self.basis] @ binv

    def values(self) -> np.ndarray:
        z = np.zeros(self.width)
        for i, j in enumerate(self.basis):
            z[j] = self.T[i, -1]
        return z


def solve_lp(p: LpProblem) -> LpSolution:
    """
    Solve an LpProblem with the two-phase simplex.

    Returns:
        LpSolution with status optimal, infeasible (farkas set) or
        unbounded (ray set)

    Raises:
        NumericalFailure if the pivot limit is hit
    """
    std = _standardize(p)
    tab = _Tableau(std)
    m = tab.rows
    scale = 1.0 + (float(np.max(np.abs(std.b))) if m else 0.0)

    art = np.zeros(tab.width, dtype=bool)
    art[tab.art_cols] = True

    if tab.art_cols:
        phase1 = np.zeros(tab.width)
        phase1[tab.art_cols] = 1.0
        tab.run(phase1, np.ones(tab.width, dtype=bool))
        infeasibility = tab.objective(phase1)
        if infeasibility > FEASIBILITY_TOL * scale:
            y = tab.row_multipliers(phase1)
            farkas = (std.row_sign * y)[:std.num_original_rows]
            logger.debug(f"[lp] infeasible, phase-1 residual {infeasibility:.3e}")
            return LpSolution(INFEASIBLE, farkas=farkas, iterations=tab.iterations)
        tab.drive_out_artificials()

    cost = np.zeros(tab.width)
    cost[:tab.num_struct] = std.cost
    status, entering = tab.run(cost, ~art)

    if status == UNBOUNDED:
        direction = np.zeros(tab.width)
        direction[entering] = 1.0
        for i, j in enumerate(tab.basis):
            direction[j] -= tab.T[i, entering]
        ray = std.M @ direction[:tab.num_struct]
        return LpSolution(UNBOUNDED, ray=ray, iterations=tab.iterations)

    z = tab.values()[:tab.num_struct]
    x = std.offset + std.M @ z
    y = tab.row_multipliers(cost)
    direction = 1.0 if p.sense == "min" else -1.0
    duals = (direction * std.row_sign * y)[:std.num_original_rows]
    return LpSolution(
        OPTIMAL,
        x=x,
        duals=duals,
        objective=float(p.c @ x),
        iterations=tab.iterations,
    )


@dataclass(frozen=True)
class PsdBlock:
    """Symmetric matrix variable: entry (i, j) lives in LP column columns[(i, j)]."""
    dim: int
    columns: Mapping[Tuple[int, int], int]

    def __post_init__(self):
        for i in range(self.dim):
            for j in range(self.dim):
                if (i, j) not in self.columns:
                    raise SchemaError(f"PSD block entry ({i}, {j}) has no column")
                if self.columns[(i, j)] != self.columns[(j, i)]:
                    raise SchemaError(f"PSD block entries ({i}, {j}) and ({j}, {i}) must share a column")

    @classmethod
    def from_upper(cls, dim: int, upper: Mapping[Tuple[int, int], int]) -> "PsdBlock":
        """Columns given for i <= j only."""
        cols: Dict[Tuple[int, int], int] = {}
        for (i, j), col in upper.items():
            cols[(i, j)] = col
            cols[(j, i)] = col
        return cls(dim, cols)

    def realize(self, x: np.ndarray) -> np.ndarray:
        R = np.zeros((self.dim, self.dim))
        for (i, j), col in self.columns.items():
            R[i, j] = x[col]
        return R

    def cut_row(self, v: np.ndarray, num_vars: int) -> np.ndarray:
        """Coefficients of v'Rv as a linear form in the LP columns."""
        row = np.zeros(num_vars)
        for (i, j), col in self.columns.items():
            row[col] += v[i] * v[j]
        return row

    def seed_directions(self) -> List[np.ndarray]:
        dirs = []
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            dirs.append(e)
        for i in range(self.dim):
            for j in range(i + 1, self.dim):
                for s in (1.0, -1.0):
                    v = np.zeros(self.dim)
                    v[i] = 1.0
                    v[j] = s
                    dirs.append(v / np.sqrt(2.0))
        return dirs


PsdBlockSpec = Sequence[PsdBlock]


def solve_with_psd_cuts(p: LpProblem, blocks: PsdBlockSpec, max_iterations: int = MAX_CUT_ITERATIONS) -> LpSolution:
    """
    Solve p with every block required PSD, by eigenvector cutting planes.

    Args:
        p: base LP (the PSD requirement is not part of it)
        blocks: matrix variables to keep PSD
        max_iterations: LP solves before giving up

    Returns:
        LpSolution of the final LP; cuts counts the added rows and history
        the objective per round (nondecreasing for min problems)

    Raises:
        CutLimitExceeded if the blocks are still not PSD after max_iterations
    """
    if not blocks:
        return solve_lp(p)

    n = p.num_vars
    cut_dirs: List[List[np.ndarray]] = [[] for _ in blocks]
    seed_rows = []
    for k, block in enumerate(blocks):
        for v in block.seed_directions():
            cut_dirs[k].append(v)
            seed_rows.append((block.cut_row(v, n), ">=", 0.0))
    current = p.with_rows(seed_rows, [f"psd_seed{i}" for i in range(len(seed_rows))])
    added = len(seed_rows)
    history: List[float] = []

    for it in range(max_iterations):
        sol = solve_lp(current)
        if sol.status == INFEASIBLE:
            sol.cuts = added
            sol.history = history
            return sol
        point = sol.x if sol.status == OPTIMAL else sol.ray
        if sol.status == OPTIMAL:
            history.append(sol.objective)

        new_rows = []
        worst = 0.0
        magnitude = 1.0
        for k, block in enumerate(blocks):
            R = block.realize(point)
            lam, v = min_eigenvalue(R)
            worst = min(worst, lam)
            magnitude = max(magnitude, 1.0 + float(np.max(np.abs(R))))
            if lam >= -PSD_TOL:
                continue
            if any(float(v @ w) ** 2 > CUT_DUPLICATE_COSINE for w in cut_dirs[k]):
                continue
            cut_dirs[k].append(v)
            new_rows.append((block.cut_row(v, n), ">=", 0.0))

        if not new_rows:
            if worst >= -PSD_TOL or sol.status == UNBOUNDED:
                sol.cuts = added
                sol.history = history
                return sol
            if worst >= -1e-6 * magnitude:
                # only duplicates left; the residual is simplex round-off
                logger.warning(f"[lp] accepting lambda_min {worst:.3e} after duplicate cuts")
                sol.cuts = added
                sol.history = history
                return sol
            raise CutLimitExceeded(
                "PSD cuts stalled on duplicate directions",
                {"iterations": it + 1, "min_eigenvalue": worst},
            )
        current = current.with_rows(new_rows, [f"psd_cut{added + i}" for i in range(len(new_rows))])
        added += len(new_rows)
        logger.debug(f"[lp] round {it + 1}: {len(new_rows)} PSD cuts, lambda_min {worst:.3e}")

    raise CutLimitExceeded(
        f"blocks not PSD after {max_iterations} cut rounds",
        {"iterations": max_iterations, "cuts": added},
    )


def _fmt(v: float) -> str:
    return repr(float(v))


def write_lp_text(p: LpProblem) -> str:
    """Serialize an LpProblem in the fixed LP text format."""
    lines = [p.sense, " ".join(_fmt(v) for v in p.c)]
    for i in range(p.num_rows):
        coeffs = " ".join(_fmt(v) for v in p.A[i])
        lines.append(f"{coeffs} {p.row_senses[i]} {_fmt(p.b[i])}")
    default_bounds = np.all(p.lower == 0.0) and np.all(np.isinf(p.upper))
    if not default_bounds:
        lines.append("bounds")
        for lo, hi in zip(p.lower, p.upper):
            lines.append(f"{_fmt(lo)} {_fmt(hi)}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def read_lp_text(text: str) -> LpProblem:
    """Parse the LP text format back into an LpProblem."""
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    if len(lines) < 2:
        raise SchemaError("LP text needs a sense line and an objective line")
    sense = lines[0].lower()
    if sense not in ("min", "max"):
        raise SchemaError("first line must be 'min' or 'max'")
    try:
        c = [float(tok) for tok in lines[1].split()]
    except ValueError as e:
        raise SchemaError(f"bad objective line: {e}")

    rows, senses, rhs = [], [], []
    lower, upper = None, None
    idx = 2
    while idx < len(lines):
        line = lines[idx]
        idx += 1
        if line.lower() == "end":
            break
        if line.lower() == "bounds":
            lower, upper = [], []
            for _ in range(len(c)):
                if idx >= len(lines):
                    raise SchemaError("bounds section is short")
                parts = lines[idx].split()
                idx += 1
                if len(parts) != 2:
                    raise SchemaError("bound lines hold 'lo hi'")
                lower.append(float(parts[0]))
                upper.append(float(parts[1]))
            continue
        for sym in ("<=", ">=", "="):
            if sym in line:
                left, right = line.split(sym, 1)
                break
        else:
            raise SchemaError(f"row without <=, >= or =: {line!r}")
        try:
            coeffs = [float(tok) for tok in left.split()]
            value = float(right)
        except ValueError as e:
            raise SchemaError(f"bad row {line!r}: {e}")
        if len(coeffs) != len(c):
            raise SchemaError(f"row has {len(coeffs)} coefficients, expected {len(c)}")
        rows.append(coeffs)
        senses.append(sym)
        rhs.append(value)

    return LpProblem.create(
        sense,
        c,
        A=np.array(rows, dtype=float).reshape(len(rows), len(c)),
        row_senses=senses,
        b=rhs,
        lower=lower,
        upper=upper,
    )
