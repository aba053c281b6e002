"""Truncated orthogonal bases of snapshot ensembles.

The basis is the set of leading left singular vectors of the snapshot
matrix.  Two computation paths exist: a direct dense SVD, and the method
of snapshots (eigendecomposition of the small ``m x m`` Gram matrix),
which is the default whenever there are far fewer snapshots than spatial
unknowns -- the operating regime of this toolkit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NumericError, UndefinedEnergyError

# Singular values below DROP_TOL * sigma_1 contribute no mode: forming
# u_k = X v_k / sigma_k with a near-zero sigma_k would just amplify noise.
DROP_TOL = 1e-12


@dataclass(frozen=True)
class PodBasis:
    """Orthonormal spatial modes with the full singular value spectrum.

    ``modes`` is ``(n, r)`` with orthonormal columns; ``singular_values``
    keeps all ``q = min(n, m)`` values so energy bookkeeping stays exact
    after truncation.
    """

    modes: np.ndarray
    singular_values: np.ndarray
    rank: int
    energy_threshold: float

    def __post_init__(self):
        if self.modes.ndim != 2 or self.modes.shape[1] != self.rank:
            raise DimensionMismatchError(
                f"modes must be (n, {self.rank}), got {self.modes.shape}")
        if self.rank < 1:
            raise DimensionMismatchError("rank must be >= 1")

    @property
    def n(self) -> int:
        return self.modes.shape[0]

    def project(self, X: np.ndarray) -> np.ndarray:
        """Coefficients of ``X`` (n rows) in the reduced space: B^T X."""
        X = np.asarray(X)
        if X.shape[0] != self.n:
            raise DimensionMismatchError(
                f"expected {self.n} rows, got {X.shape[0]}")
        return self.modes.T @ X

    def reconstruct(self, C: np.ndarray) -> np.ndarray:
        """Field reconstruction B C from coefficients (r rows)."""
        C = np.asarray(C)
        if C.shape[0] != self.rank:
            raise DimensionMismatchError(
                f"expected {self.rank} coefficient rows, got {C.shape[0]}")
        return self.modes @ C


def project(basis: PodBasis, X: np.ndarray) -> np.ndarray:
    return basis.project(X)


def reconstruct(basis: PodBasis, C: np.ndarray) -> np.ndarray:
    return basis.reconstruct(C)


def _fix_signs(U: np.ndarray, Vt: np.ndarray | None) -> tuple[np.ndarray, np.ndarray | None]:
    # Deterministic orientation: largest-magnitude entry of each mode positive.
    if U.shape[1] == 0:
        return U, Vt
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U = U * signs
    if Vt is not None:
        Vt = Vt * signs[:, None]
    return U, Vt


def compute_svd(X, method: str = "auto") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Singular value decomposition of a snapshot matrix.

    Returns ``(U, s, Vt)`` where ``s`` holds all ``q = min(n, m)`` singular
    values in descending order and ``U``/``Vt`` keep only the columns/rows
    whose singular value clears ``DROP_TOL * s[0]`` (the numerical rank).
    Mode signs follow the largest-entry-positive convention, so results are
    deterministic across both paths.

    ``method``: "gram" for the method of snapshots, "dense" for a direct
    LAPACK SVD, "auto" to pick gram when m <= n.
    """
    X = np.asarray(getattr(X, "data", X), dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionMismatchError(f"need a non-empty 2-D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NumericError("snapshot matrix contains non-finite entries")
    n, m = X.shape
    if method == "auto":
        method = "gram" if m <= n else "dense"
    if method not in ("gram", "dense"):
        raise ValueError(f"unknown SVD method {method!r}")

    if method == "dense":
        U, s, Vt = np.linalg.svd(X, full_matrices=False)
    else:
        # Method of snapshots: X^T X = V diag(s^2) V^T, then u_k = X v_k / s_k.
        gram = X.T @ X
        evals, V = np.linalg.eigh(gram)
        order = np.argsort(evals)[::-1]
        evals = evals[order]
        V = V[:, order]
        s = np.sqrt(np.clip(evals, 0.0, None))
        keep = s >= DROP_TOL * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
        U = X @ (V[:, keep] / s[keep])
        Vt = V[:, keep].T

    if s.size and s[0] > 0:
        keep = s >= DROP_TOL * s[0]
        U = U[:, keep[: U.shape[1]]]
        Vt = Vt[keep[: Vt.shape[0]], :]
    else:
        U = U[:, :0]
        Vt = Vt[:0, :]
    U, Vt = _fix_signs(U, Vt)
    return U, s, Vt


def accumulated_energy(singular_values: np.ndarray, r: int) -> float:
    """Fraction of the singular value sum captured by the first r values."""
    s = np.asarray(singular_values, dtype=np.float64)
    if r < 1 or r > s.size:
        raise ValueError(f"r={r} out of range for {s.size} singular values")
    total = s.sum()
    if total <= 0.0:
        raise UndefinedEnergyError("energy undefined: all singular values are zero")
    return float(s[:r].sum() / total)


def select_rank(singular_values: np.ndarray, threshold: float) -> int:
    """Smallest r whose accumulated energy reaches ``threshold``."""
    if not (0.0 < threshold <= 1.0):
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    s = np.asarray(singular_values, dtype=np.float64)
    partial = np.cumsum(s)
    if partial.size == 0 or partial[-1] <= 0.0:
        raise UndefinedEnergyError("energy undefined: all singular values are zero")
    energy = partial / partial[-1]  # energy[-1] == 1.0 exactly
    r = int(np.searchsorted(energy, threshold - 1e-15) + 1)
    return min(r, s.size)


def pod_basis(X, energy_threshold: float, method: str = "auto") -> PodBasis:
    """Compute the truncated basis meeting ``energy_threshold``.

    The rank is clamped to the numerical rank of the ensemble: modes whose
    singular value is below ``DROP_TOL * sigma_1`` carry no usable energy.
    """
    U, s, _ = compute_svd(X, method=method)
    r = min(select_rank(s, energy_threshold), U.shape[1])
    if r < 1:
        raise UndefinedEnergyError("snapshot matrix has numerical rank zero")
    return PodBasis(np.ascontiguousarray(U[:, :r]), s, r, energy_threshold)
