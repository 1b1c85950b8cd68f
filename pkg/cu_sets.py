"""
Connected-uncertainty set families for the CU robust toolkit.

Four process types whose period-t set depends on the period t-1 realization:
- EllipsoidalCuProcess: center mu_{t+1} = A_t mu_t + F_t d_t + c_t
- MatrixCuProcess: covariance Sigma_{t+1} = a_t Sigma_t + f_t (d_t - mu_t)(d_t - mu_t)' + C_t
- PolyhedralCuProcess: G_t d_t >= g_t + Delta_t d_{t-1}
- MomentAmbiguityProcess: finite supports with conditional mean bounds

plus the two-period KnapsackUncertaintyModel, path sampling and
membership tests. Processes validate on construction and are immutable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config import FEASIBILITY_TOL
from errors import DimensionMismatch, InvalidProcess, NotPsd
from numerics import as_matrix, as_vector, check_symmetric, cholesky, is_psd, keyed_rng, min_eigenvalue

logger = logging.getLogger(__name__)


def _matrices(values, count: int, m: int, name: str) -> Tuple[np.ndarray, ...]:
    if len(values) != count:
        raise DimensionMismatch(f"{name} needs {count} matrices, got {len(values)}")
    return tuple(as_matrix(v, m, m, name=f"{name}[{i}]") for i, v in enumerate(values))


def _vectors(values, count: int, m: int, name: str) -> Tuple[np.ndarray, ...]:
    if len(values) != count:
        raise DimensionMismatch(f"{name} needs {count} vectors, got {len(values)}")
    return tuple(as_vector(v, m, name=f"{name}[{i}]") for i, v in enumerate(values))


def _scalars(values, count: int, name: str) -> np.ndarray:
    arr = as_vector(values, name=name) if len(values) else np.zeros(0)
    if arr.shape[0] != count:
        raise DimensionMismatch(f"{name} needs {count} entries, got {arr.shape[0]}")
    return arr


@dataclass(frozen=True, eq=False)
class EllipsoidalCuProcess:
    """
    Ellipsoidal sets with previous-realization-dependent centers.

    U_t(d_{t-1}) = {mu_t(d_{t-1}) + L_t u : ||u|| <= r_t}
    """
    mu1: np.ndarray
    radii: np.ndarray
    chol: Tuple[np.ndarray, ...]
    A: Tuple[np.ndarray, ...]
    F: Tuple[np.ndarray, ...]
    c: Tuple[np.ndarray, ...]

    def __post_init__(self):
        mu1 = as_vector(self.mu1, name="mu1")
        m = mu1.shape[0]
        radii = as_vector(self.radii, name="radii")
        T = radii.shape[0]
        if T < 1:
            raise InvalidProcess("at least one period required")
        if np.any(radii < 0):
            raise InvalidProcess("radii must be nonnegative", {"radii": radii.tolist()})
        object.__setattr__(self, "mu1", mu1)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "chol", _matrices(self.chol, T, m, "chol"))
        object.__setattr__(self, "A", _matrices(self.A, T - 1, m, "A"))
        object.__setattr__(self, "F", _matrices(self.F, T - 1, m, "F"))
        object.__setattr__(self, "c", _vectors(self.c, T - 1, m, "c"))

    @property
    def periods(self) -> int:
        return int(self.radii.shape[0])

    @property
    def dim(self) -> int:
        return int(self.mu1.shape[0])

    @classmethod
    def from_covariances(cls, mu1, radii, sigmas, A, F, c) -> "EllipsoidalCuProcess":
        """Build with L_t taken as the Cholesky factor of each Sigma_t."""
        return cls(mu1, radii, tuple(cholesky(s) for s in sigmas), A, F, c)


@dataclass(frozen=True, eq=False)
class MatrixCuProcess:
    """Ellipsoidal sets with fixed centers and a previous-realization-dependent covariance."""
    means: Tuple[np.ndarray, ...]
    radii: np.ndarray
    sigma1: np.ndarray
    a: np.ndarray
    f: np.ndarray
    C: Tuple[np.ndarray, ...]

    def __post_init__(self):
        radii = as_vector(self.radii, name="radii")
        T = radii.shape[0]
        if T < 1:
            raise InvalidProcess("at least one period required")
        if not self.means:
            raise DimensionMismatch("means must hold one vector per period")
        m = as_vector(self.means[0], name="means[0]").shape[0]
        if np.any(radii < 0):
            raise InvalidProcess("radii must be nonnegative")
        sigma1 = check_symmetric(as_matrix(self.sigma1, m, m, name="sigma1"), name="sigma1")
        if not is_psd(sigma1):
            raise NotPsd("sigma1 is not PSD")
        a = _scalars(self.a, T - 1, "a")
        f = _scalars(self.f, T - 1, "f")
        if np.any(a < 0) or np.any(f < 0):
            raise InvalidProcess("a_t and f_t must be nonnegative")
        C = _matrices(self.C, T - 1, m, "C")
        for t, Ct in enumerate(C):
            check_symmetric(Ct, name=f"C[{t}]")
            if not is_psd(Ct):
                raise NotPsd(f"C[{t}] is not PSD")
        object.__setattr__(self, "means", _vectors(self.means, T, m, "means"))
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "sigma1", sigma1)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "C", C)

    @property
    def periods(self) -> int:
        return int(self.radii.shape[0])

    @property
    def dim(self) -> int:
        return int(self.sigma1.shape[0])


@dataclass(frozen=True, eq=False)
class PolyhedralCuProcess:
    """
    Polyhedral sets with a right-hand side shifted by the previous realization.

    Construction checks that every stage polyhedron is bounded and nonempty
    along the nominal path (stage 1 box center, then each next box center).
    """
    G: Tuple[np.ndarray, ...]
    g: Tuple[np.ndarray, ...]
    Delta: Tuple[np.ndarray, ...]
    nominal: Tuple[np.ndarray, ...] = field(default=(), repr=False)

    def __post_init__(self):
        T = len(self.G)
        if T < 1 or len(self.g) != T or len(self.Delta) != T:
            raise DimensionMismatch("G, g and Delta need one entry per period")
        G0 = as_matrix(self.G[0], name="G[0]")
        m = G0.shape[1]
        G, g, D = [], [], []
        for t in range(T):
            Gt = as_matrix(self.G[t], cols=m, name=f"G[{t}]")
            k = Gt.shape[0]
            G.append(Gt)
            g.append(as_vector(self.g[t], k, name=f"g[{t}]"))
            D.append(as_matrix(self.Delta[t], k, m, name=f"Delta[{t}]"))
        if np.any(D[0] != 0.0):
            raise InvalidProcess("Delta for the first period must be zero")
        object.__setattr__(self, "G", tuple(G))
        object.__setattr__(self, "g", tuple(g))
        object.__setattr__(self, "Delta", tuple(D))
        object.__setattr__(self, "nominal", self._nominal_path())

    @property
    def periods(self) -> int:
        return len(self.G)

    @property
    def dim(self) -> int:
        return int(self.G[0].shape[1])

    def stage_rhs(self, t: int, d_prev: Optional[np.ndarray]) -> np.ndarray:
        """g_t + Delta_t d_{t-1} for 1-based period t."""
        if t == 1 or d_prev is None:
            return self.g[t - 1].copy()
        return self.g[t - 1] + self.Delta[t - 1] @ as_vector(d_prev, self.dim, name="d_prev")

    def _nominal_path(self) -> Tuple[np.ndarray, ...]:
        from lp_core import LpProblem, solve_lp

        path: List[np.ndarray] = []
        d_prev = None
        m = self.dim
        for t in range(1, self.periods + 1):
            Gt = self.G[t - 1]
            rhs = self.stage_rhs(t, d_prev)
            lo = np.zeros(m)
            hi = np.zeros(m)
            for i in range(m):
                for sign in (1.0, -1.0):
                    c = np.zeros(m)
                    c[i] = sign
                    p = LpProblem.create(
                        "max", c, Gt, [">="] * Gt.shape[0], rhs,
                        lower=np.full(m, -np.inf), upper=np.full(m, np.inf),
                    )
                    sol = solve_lp(p)
                    if sol.status == "infeasible":
                        raise InvalidProcess(f"period {t} polyhedron is empty on the nominal path", {"period": t})
                    if sol.status == "unbounded":
                        raise InvalidProcess(f"period {t} polyhedron is unbounded", {"period": t, "axis": i})
                    if sign > 0:
                        hi[i] = sol.objective
                    else:
                        lo[i] = -sol.objective
            d_prev = 0.5 * (lo + hi)
            path.append(d_prev)
        return tuple(path)


@dataclass(frozen=True, eq=False)
class MomentAmbiguityProcess:
    """
    Finite-support moment ambiguity sets with conditional mean bounds.

    Period t (1-based) conditioned on d_{t-1} = supports[t-2][j] admits every
    distribution on supports[t-1] with
        mu_t - delta_t <= E[d] <= mu_t + delta_t,  mu_t = A_t d_{t-1} + b_t
        E[(d - mu0_t)(d - mu0_t)'] <= Sigma_t
    Period 1 is unconditioned with mu_1 = mu1. With anchor_mode "fixed",
    mu0_t is anchors[t-1] (default b_t + A_t mean(supports[t-2])); with
    "conditional" it is the conditional center mu_t itself.
    """
    supports: Tuple[np.ndarray, ...]
    A: Tuple[np.ndarray, ...]
    b: Tuple[np.ndarray, ...]
    mu1: np.ndarray
    delta: Tuple[np.ndarray, ...]
    sigma: Tuple[np.ndarray, ...]
    anchors: Optional[Tuple[Optional[np.ndarray], ...]] = None
    anchor_mode: str = "fixed"
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        T = len(self.supports)
        if T < 1:
            raise InvalidProcess("at least one period required")
        mu1 = as_vector(self.mu1, name="mu1")
        m = mu1.shape[0]
        supports = []
        for t, pts in enumerate(self.supports):
            arr = as_matrix(np.asarray(pts, dtype=float).reshape(-1, m), cols=m, name=f"supports[{t}]")
            if arr.shape[0] < 2:
                raise InvalidProcess(f"period {t + 1} support needs at least two points")
            if np.unique(arr, axis=0).shape[0] != arr.shape[0]:
                raise InvalidProcess(f"period {t + 1} support has duplicate points")
            supports.append(arr)
        if self.anchor_mode not in ("fixed", "conditional"):
            raise InvalidProcess(f"unknown anchor_mode {self.anchor_mode!r}")
        if len(self.A) != T or len(self.b) != T:
            raise DimensionMismatch("A and b need one entry per period (period 1 entry is ignored)")
        A = [np.zeros((m, m)) if self.A[t] is None else as_matrix(self.A[t], m, m, name=f"A[{t}]")
             for t in range(T)]
        b = [np.zeros(m) if self.b[t] is None else as_vector(self.b[t], m, name=f"b[{t}]")
             for t in range(T)]
        delta = _vectors(self.delta, T, m, "delta")
        for t, d in enumerate(delta):
            if np.any(d < 0):
                raise InvalidProcess(f"delta[{t}] must be nonnegative")
        sigma = []
        for t, s in enumerate(self.sigma):
            s = check_symmetric(as_matrix(s, m, m, name=f"sigma[{t}]"), name=f"sigma[{t}]")
            if not is_psd(s):
                raise NotPsd(f"sigma[{t}] is not PSD")
            sigma.append(s)
        if len(sigma) != T:
            raise DimensionMismatch("sigma needs one matrix per period")

        anchors: List[np.ndarray] = []
        given = list(self.anchors) if self.anchors is not None else [None] * T
        if len(given) != T:
            raise DimensionMismatch("anchors need one entry per period")
        for t in range(T):
            if given[t] is not None:
                anchors.append(as_vector(given[t], m, name=f"anchors[{t}]"))
            elif t == 0:
                anchors.append(mu1.copy())
            else:
                anchors.append(b[t] + A[t] @ supports[t - 1].mean(axis=0))

        object.__setattr__(self, "supports", tuple(supports))
        object.__setattr__(self, "A", tuple(A))
        object.__setattr__(self, "b", tuple(b))
        object.__setattr__(self, "mu1", mu1)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "sigma", tuple(sigma))
        object.__setattr__(self, "anchors", tuple(anchors))

        if self.validate:
            from dro_counterpart import check_process_feasible

            check_process_feasible(self)

    @property
    def periods(self) -> int:
        return len(self.supports)

    @property
    def dim(self) -> int:
        return int(self.mu1.shape[0])

    def conditioning_points(self, t: int) -> List[Optional[int]]:
        """Indices j of d_{t-1} in supports[t-2]; [None] for period 1."""
        if t == 1:
            return [None]
        return list(range(self.supports[t - 2].shape[0]))

    def center(self, t: int, j: Optional[int] = None) -> np.ndarray:
        if t == 1:
            return self.mu1.copy()
        if j is None:
            raise InvalidProcess(f"period {t} needs a conditioning point")
        return self.center_at(t, self.supports[t - 2][j])

    def center_at(self, t: int, d_prev: np.ndarray) -> np.ndarray:
        if t == 1:
            return self.mu1.copy()
        return self.A[t - 1] @ d_prev + self.b[t - 1]

    def anchor(self, t: int, j: Optional[int] = None) -> np.ndarray:
        if self.anchor_mode == "conditional":
            return self.center(t, j)
        return self.anchors[t - 1]

    def anchor_at(self, t: int, d_prev: np.ndarray) -> np.ndarray:
        if self.anchor_mode == "conditional":
            return self.center_at(t, d_prev)
        return self.anchors[t - 1]


@dataclass(frozen=True, eq=False)
class KnapsackUncertaintyModel:
    """Two-period ellipsoidal model with mu_2(d_1) = Phi mu_1 + Psi d_1 and a shared factor L."""
    mu1: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    L: np.ndarray
    r1: float
    r2: float

    def __post_init__(self):
        mu1 = as_vector(self.mu1, name="mu1")
        m = mu1.shape[0]
        object.__setattr__(self, "mu1", mu1)
        object.__setattr__(self, "phi", as_matrix(self.phi, m, m, name="phi"))
        object.__setattr__(self, "psi", as_matrix(self.psi, m, m, name="psi"))
        object.__setattr__(self, "L", as_matrix(self.L, m, m, name="L"))
        if self.r1 < 0 or self.r2 < 0:
            raise InvalidProcess("radii must be nonnegative")

    @property
    def dim(self) -> int:
        return int(self.mu1.shape[0])

    def with_radii(self, r1: float, r2: float) -> "KnapsackUncertaintyModel":
        return KnapsackUncertaintyModel(self.mu1, self.phi, self.psi, self.L, r1, r2)

    def as_process(self) -> EllipsoidalCuProcess:
        """The equivalent T = 2 process: A_1 = Phi, F_1 = Psi, c_1 = 0."""
        m = self.dim
        return EllipsoidalCuProcess(
            self.mu1, [self.r1, self.r2], (self.L, self.L), (self.phi,), (self.psi,), (np.zeros(m),)
        )

    def nc_process(self, center: str = "first_period") -> EllipsoidalCuProcess:
        """
        Non-connected comparison sets: the period-2 center ignores d_1.

        Args:
            center: "first_period" uses mu_2 = mu_1, "nominal" uses
                mu_2 = Phi mu_1 + Psi mu_1
        """
        m = self.dim
        if center == "first_period":
            A, c = np.eye(m), np.zeros(m)
        elif center == "nominal":
            A, c = np.zeros((m, m)), (self.phi + self.psi) @ self.mu1
        else:
            raise InvalidProcess(f"unknown nc center {center!r}")
        return EllipsoidalCuProcess(
            self.mu1, [self.r1, self.r2], (self.L, self.L), (A,), (np.zeros((m, m)),), (c,)
        )


def propagate_center(proc: EllipsoidalCuProcess, path: Sequence) -> List[np.ndarray]:
    """
    Centers mu_1..mu_T along a realized path d_1..d_{T-1}.

    Raises:
        DimensionMismatch
    """
    if len(path) != proc.periods - 1:
        raise DimensionMismatch(f"path needs {proc.periods - 1} vectors, got {len(path)}")
    centers = [proc.mu1.copy()]
    for t, d in enumerate(path):
        d = as_vector(d, proc.dim, name=f"path[{t}]")
        centers.append(proc.A[t] @ centers[-1] + proc.F[t] @ d + proc.c[t])
    return centers


def propagate_covariance(proc: MatrixCuProcess, path: Sequence) -> List[np.ndarray]:
    """
    Covariances Sigma_1..Sigma_T along a realized path d_1..d_{T-1}.

    Raises:
        DimensionMismatch, NotPsd (only if the invariants were bypassed)
    """
    if len(path) != proc.periods - 1:
        raise DimensionMismatch(f"path needs {proc.periods - 1} vectors, got {len(path)}")
    sigmas = [proc.sigma1.copy()]
    for t, d in enumerate(path):
        dev = as_vector(d, proc.dim, name=f"path[{t}]") - proc.means[t]
        nxt = proc.a[t] * sigmas[-1] + proc.f[t] * np.outer(dev, dev) + proc.C[t]
        nxt = 0.5 * (nxt + nxt.T)
        lam, _ = min_eigenvalue(nxt)
        if lam < -1e-9 * (1.0 + float(np.max(np.abs(nxt)))):
            raise NotPsd(f"covariance at period {t + 2} lost PSD", {"min_eigenvalue": lam})
        sigmas.append(nxt)
    return sigmas


def sample_paths(
    model: KnapsackUncertaintyModel,
    sigma,
    n: int,
    seed: int,
    replication: int = 0,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    n Gaussian realization pairs (d_1, d_2), each of shape (n, m).

    d_1 = mu_1 + e_1, d_2 = Phi mu_1 + Psi d_1 + e_2 with e_t ~ N(0, sigma).
    Period t draws come from the stream keyed (seed, replication, t).
    """
    m = model.dim
    sigma = as_matrix(sigma, m, m, name="sigma")
    L = cholesky(0.5 * (sigma + sigma.T))
    z1 = keyed_rng(seed, replication, 1).standard_normal((n, m))
    z2 = keyed_rng(seed, replication, 2).standard_normal((n, m))
    d1 = model.mu1 + z1 @ L.T
    d2 = model.phi @ model.mu1 + d1 @ model.psi.T + z2 @ L.T
    return d1, d2


def sample_path(
    model: KnapsackUncertaintyModel,
    sigma,
    rng_seed: int,
    replication: int = 0,
) -> Tuple[np.ndarray, np.ndarray]:
    """One realization pair (d_1, d_2); identical for identical keys."""
    d1, d2 = sample_paths(model, sigma, 1, rng_seed, replication)
    return d1[0], d2[0]


def member_ellipsoidal(proc: EllipsoidalCuProcess, t: int, mu_t, d) -> bool:
    """True iff d = mu_t + L_t u for some ||u|| <= r_t (least-squares for singular L_t)."""
    m = proc.dim
    diff = as_vector(d, m, name="d") - as_vector(mu_t, m, name="mu_t")
    L = proc.chol[t - 1]
    u, *_ = np.linalg.lstsq(L, diff, rcond=None)
    if np.linalg.norm(L @ u - diff) > 1e-9 * (1.0 + np.linalg.norm(diff)):
        return False
    return float(np.linalg.norm(u)) <= proc.radii[t - 1] + FEASIBILITY_TOL


def member_polyhedral(proc: PolyhedralCuProcess, t: int, d_prev, d) -> bool:
    """True iff G_t d >= g_t + Delta_t d_prev within tolerance."""
    d = as_vector(d, proc.dim, name="d")
    rhs = proc.stage_rhs(t, d_prev)
    return bool(np.all(proc.G[t - 1] @ d >= rhs - FEASIBILITY_TOL))
