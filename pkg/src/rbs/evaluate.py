"""Accuracy metrics and per-cell error-bound verification.

Metrics are relative errors aggregated over runs, time steps, and cells.
The bound machinery computes, per cell p, a constant K_p such that the
RMS reconstruction error at that cell over any evaluation set is at most
K_p times the worst per-mode regression RMSE e -- and then checks that
inequality cell by cell on real predictions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, UndefinedMetricError

BOUND_TOL = 1e-9


def _check_pair(pred: np.ndarray, ref: np.ndarray, grouping: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape or pred.ndim != 2:
        raise DimensionMismatchError(
            f"pred and ref must share a 2-D shape, got {pred.shape} and {ref.shape}")
    n_runs, n_steps = grouping
    if n_runs * n_steps != pred.shape[1]:
        raise DimensionMismatchError(
            f"grouping {grouping} implies {n_runs * n_steps} columns, "
            f"matrix has {pred.shape[1]}")
    return pred, ref


def rel_rmse(pred: np.ndarray, ref: np.ndarray, grouping: tuple[int, int]) -> float:
    """Ratio of the averaged squared error norms to averaged squared
    reference norms over all runs, steps, and cells (no square root)."""
    pred, ref = _check_pair(pred, ref, grouping)
    num = np.mean(np.sum((pred - ref) ** 2, axis=0))
    den = np.mean(np.sum(ref ** 2, axis=0))
    if den <= 0.0:
        raise UndefinedMetricError("reference is identically zero")
    return float(num / den)


def rel_ame(pred: np.ndarray, ref: np.ndarray, grouping: tuple[int, int]) -> float:
    """As rel_rmse with absolute values in place of squared norms."""
    pred, ref = _check_pair(pred, ref, grouping)
    num = np.mean(np.sum(np.abs(pred - ref), axis=0))
    den = np.mean(np.sum(np.abs(ref), axis=0))
    if den <= 0.0:
        raise UndefinedMetricError("reference is identically zero")
    return float(num / den)


@dataclass(frozen=True)
class EvalReport:
    """Relative errors against raw snapshots and against their rank-r
    projections, plus a per-run breakdown (against raw)."""

    delta_rmse: float
    delta_rmse_sqrt: float
    delta_ame: float
    proj_delta_rmse: float
    proj_delta_rmse_sqrt: float
    proj_delta_ame: float
    per_run: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "raw": {
                "delta_rmse": self.delta_rmse,
                "delta_rmse_sqrt": self.delta_rmse_sqrt,
                "delta_ame": self.delta_ame,
            },
            "projected": {
                "delta_rmse": self.proj_delta_rmse,
                "delta_rmse_sqrt": self.proj_delta_rmse_sqrt,
                "delta_ame": self.proj_delta_ame,
            },
            "per_run": list(self.per_run),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def make_report(
    pred: np.ndarray,
    raw: np.ndarray,
    projected: np.ndarray,
    grouping: tuple[int, int],
    run_indices=None,
) -> EvalReport:
    """Bundle both metric variants against both references."""
    n_runs, n_steps = grouping
    if run_indices is None:
        run_indices = range(n_runs)
    per_run = []
    for pos, run in enumerate(run_indices):
        cols = slice(pos * n_steps, (pos + 1) * n_steps)
        r = rel_rmse(pred[:, cols], raw[:, cols], (1, n_steps))
        per_run.append({
            "run": int(run),
            "delta_rmse": r,
            "delta_rmse_sqrt": float(np.sqrt(r)),
            "delta_ame": rel_ame(pred[:, cols], raw[:, cols], (1, n_steps)),
        })
    d_raw = rel_rmse(pred, raw, grouping)
    d_proj = rel_rmse(pred, projected, grouping)
    return EvalReport(
        delta_rmse=d_raw,
        delta_rmse_sqrt=float(np.sqrt(d_raw)),
        delta_ame=rel_ame(pred, raw, grouping),
        proj_delta_rmse=d_proj,
        proj_delta_rmse_sqrt=float(np.sqrt(d_proj)),
        proj_delta_ame=rel_ame(pred, projected, grouping),
        per_run=tuple(per_run),
    )


def compute_Kp(basis, standardizer, method: str = "cross") -> np.ndarray:
    """Per-cell bound constants K_p = sqrt(A_p + 2 B_p) with
    A_p = sum_k (S_k B[p,k])^2 and B_p the sum of cross products
    |S_h B[p,h]| |S_l B[p,l]| over h < l.

    The expression is a perfect square, so K_p also equals
    sum_k |S_k B[p,k]| (``method="sum"``); the default path accumulates
    the cross terms explicitly and the two are cross-checked.
    """
    B = np.asarray(basis.modes, dtype=np.float64)
    S = np.asarray(standardizer.coeff_stds, dtype=np.float64)
    if B.shape[1] != S.shape[0]:
        raise DimensionMismatchError(
            f"basis rank {B.shape[1]} != standardizer length {S.shape[0]}")
    W = np.abs(B * S[None, :])
    if method == "sum":
        return W.sum(axis=1)
    if method != "cross":
        raise ValueError(f"unknown method {method!r}")
    A = np.sum(W * W, axis=1)
    prefix = np.cumsum(W, axis=1) - W  # sum over h < l at each l
    B_term = np.sum(W * prefix, axis=1)
    Kp = np.sqrt(A + 2.0 * B_term)
    if __debug__:
        direct = W.sum(axis=1)
        if not np.allclose(Kp, direct, rtol=1e-12, atol=1e-12):
            raise AssertionError("K_p cross-term path disagrees with direct sum")
    return Kp


@dataclass(frozen=True)
class BoundReport:
    """Executable form of the per-cell error bound.

    ``lhs[p]`` is the RMS (over evaluation columns) reconstruction error
    at cell p; the claim is lhs[p] <= kp[p] * e + tol for every cell.
    """

    lhs: np.ndarray
    kp: np.ndarray
    e: float
    e_k: tuple[float, ...]
    violations: tuple[int, ...]
    max_ratio: float
    tol: float = BOUND_TOL

    def to_dict(self) -> dict:
        return {
            "e": self.e,
            "e_k": list(self.e_k),
            "max_ratio": self.max_ratio,
            "n_cells": int(self.lhs.shape[0]),
            "violations": list(self.violations),
            "tol": self.tol,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def verify_bound(model, val_inputs: np.ndarray, C_val: np.ndarray, tol: float = BOUND_TOL) -> BoundReport:
    """Check lhs_p <= K_p * e + tol on an evaluation set.

    ``val_inputs`` are raw (t, lambda) rows, shape (m_v, d); ``C_val`` is
    the matching true coefficient matrix (r, m_v).  Both reconstructions
    use the model's basis, so the comparison isolates regression error.
    """
    C_val = np.asarray(C_val, dtype=np.float64)
    if C_val.ndim != 2 or C_val.shape[0] != model.basis.rank:
        raise DimensionMismatchError(
            f"C_val must be (r={model.basis.rank}, m), got {C_val.shape}")
    if C_val.shape[1] == 0:
        raise DimensionMismatchError("evaluation set is empty")
    std = model.standardizer
    Z = std.apply_inputs(np.atleast_2d(np.asarray(val_inputs, dtype=np.float64)))
    c_std = std.apply_coeffs(C_val)
    c_hat_std = np.vstack([svr.predict(Z) for svr in model.svrs])
    e_k = tuple(float(np.sqrt(np.mean((c_std[k] - c_hat_std[k]) ** 2)))
                for k in range(C_val.shape[0]))
    e = max(e_k)
    C_hat = std.invert_coeffs(c_hat_std)
    X = model.basis.reconstruct(C_val)
    X_hat = model.basis.reconstruct(C_hat)
    lhs = np.sqrt(np.mean((X - X_hat) ** 2, axis=1))
    kp = np.asarray(model.bound_constants, dtype=np.float64)
    rhs = kp * e
    violations = tuple(int(p) for p in np.flatnonzero(lhs > rhs + tol))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0.0, lhs / rhs, 0.0)
    return BoundReport(
        lhs=lhs, kp=kp, e=e, e_k=e_k,
        violations=violations,
        max_ratio=float(ratio.max()),
        tol=tol,
    )
