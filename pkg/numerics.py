"""
Dense numerics for the CU robust toolkit.

Small dense vectors and matrices only (dimensions stay below ~50 in every
experiment). Provides:
- validated conversion to float arrays
- Cholesky factorization that tolerates singular PSD input
- smallest eigenpair for PSD cut generation
- Euclidean norm
- counter-based random streams keyed by (seed, replication, period, ...)
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np

from config import SYMMETRY_TOL
from errors import DimensionMismatch, InvalidProcess, NotPsd, NotSquare, NotSymmetric


def as_vector(values, length: Optional[int] = None, name: str = "vector") -> np.ndarray:
    """Convert to a finite 1-D float array, optionally checking its length."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be one-dimensional", {"shape": list(arr.shape)})
    if length is not None and arr.shape[0] != length:
        raise DimensionMismatch(
            f"{name} has length {arr.shape[0]}, expected {length}",
            {"name": name, "got": int(arr.shape[0]), "expected": int(length)},
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidProcess(f"{name} has non-finite entries")
    return arr


def as_matrix(
    values,
    rows: Optional[int] = None,
    cols: Optional[int] = None,
    name: str = "matrix",
) -> np.ndarray:
    """Convert to a finite 2-D float array, optionally checking its shape."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be two-dimensional", {"shape": list(arr.shape)})
    if (rows is not None and arr.shape[0] != rows) or (cols is not None and arr.shape[1] != cols):
        raise DimensionMismatch(
            f"{name} has shape {arr.shape}, expected ({rows}, {cols})",
            {"name": name, "got": list(arr.shape), "expected": [rows, cols]},
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidProcess(f"{name} has non-finite entries")
    return arr


def check_symmetric(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Raise unless m is square and symmetric within the relative tolerance."""
    m = as_matrix(m, name=name)
    if m.shape[0] != m.shape[1]:
        raise NotSquare(f"{name} is {m.shape[0]}x{m.shape[1]}", {"shape": list(m.shape)})
    scale = 1.0 + float(np.max(np.abs(m))) if m.size else 1.0
    asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if asym > SYMMETRY_TOL * scale:
        raise NotSymmetric(f"{name} is not symmetric", {"max_asymmetry": asym})
    return m


def symmetrize(m) -> np.ndarray:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise NotSquare(f"matrix is {m.shape[0]}x{m.shape[1]}")
    return 0.5 * (m + m.T)


def cholesky(sigma) -> np.ndarray:
    """
    Lower-triangular L with L @ L.T == sigma.

    Zero pivots of singular PSD input are clamped: the column is set to zero.

    Raises:
        NotSquare, NotSymmetric, NotPsd
    """
    a = check_symmetric(sigma, name="sigma")
    n = a.shape[0]
    scale = 1.0 + (float(np.max(np.abs(a))) if a.size else 0.0)
    tol = 1e-9 * scale
    # off-diagonal residual allowed next to a clamped pivot
    coupling_tol = 1e-6 * scale

    L = np.zeros((n, n))
    for j in range(n):
        pivot = a[j, j] - float(L[j, :j] @ L[j, :j])
        if pivot < -tol:
            raise NotPsd(f"negative pivot {pivot:.3e} at column {j}", {"column": j, "pivot": pivot})
        below = a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]
        if pivot <= tol:
            if below.size and float(np.max(np.abs(below))) > coupling_tol:
                raise NotPsd(f"zero pivot with nonzero coupling at column {j}", {"column": j})
            continue
        root = np.sqrt(pivot)
        L[j, j] = root
        L[j + 1:, j] = below / root
    return L


def min_eigenvalue(m) -> Tuple[float, np.ndarray]:
    """
    Smallest eigenvalue and a unit eigenvector of a symmetric matrix.

    Returns:
        (lambda_min, v) with ||v|| = 1
    """
    a = check_symmetric(m)
    values, vectors = np.linalg.eigh(0.5 * (a + a.T))
    v = vectors[:, 0]
    return float(values[0]), v / np.linalg.norm(v)


def is_psd(m, tol: float = 1e-9) -> bool:
    a = check_symmetric(m)
    if a.size == 0:
        return True
    lam, _ = min_eigenvalue(a)
    return lam >= -tol


def two_norm(v) -> float:
    """Euclidean norm of a finite vector."""
    return float(np.linalg.norm(as_vector(v)))


def keyed_rng(*keys: int) -> np.random.Generator:
    """
    Independent random stream derived from explicit integer keys.

    Same keys give the same stream bit-for-bit regardless of which worker
    thread asks for it.
    """
    entropy: Sequence[int] = [int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(entropy))))
