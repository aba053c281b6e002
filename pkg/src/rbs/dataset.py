"""Snapshot ensembles: construction, synthetic generation, splitting, storage.

A *run* is one simulation trajectory: a parameter vector and a ``T x n``
sequence of flattened field frames.  An ensemble of runs is flattened into
the paired snapshot / input matrices that feed the reduction and the
regressors: snapshot column ``k*T + j`` holds run ``k``'s frame ``j`` and
the matching input column holds ``(t_j, lambda_k)``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    CannotSplitError,
    DimensionMismatchError,
    EmptyInputError,
    FormatError,
    GeneratorConfigError,
)

DATASET_MAGIC = b"RBSD0001"

_HEADER = struct.Struct("<4Q")  # N, T, n, d_lambda


@dataclass(frozen=True)
class SimulationRun:
    """One solver run: parameters plus a time sequence of field frames.

    ``params`` has length d_lambda, ``times`` is strictly increasing with
    length T, and ``fields`` is a ``(T, n)`` array (frame-major).
    """

    params: np.ndarray
    times: np.ndarray
    fields: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "params", np.asarray(self.params, dtype=np.float64))
        object.__setattr__(self, "times", np.asarray(self.times, dtype=np.float64))
        object.__setattr__(self, "fields", np.asarray(self.fields, dtype=np.float64))
        if self.params.ndim != 1 or self.params.size < 1:
            raise DimensionMismatchError("params must be a non-empty 1-D vector")
        if self.times.ndim != 1 or self.times.size < 1:
            raise DimensionMismatchError("times must be a non-empty 1-D vector")
        if self.fields.ndim != 2 or self.fields.shape[0] != self.times.size:
            raise DimensionMismatchError(
                f"fields must be (T, n) with T={self.times.size}, "
                f"got {self.fields.shape}"
            )
        for name, arr in (("params", self.params), ("times", self.times),
                          ("fields", self.fields)):
            if not np.all(np.isfinite(arr)):
                raise DimensionMismatchError(f"{name} contains non-finite values")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise DimensionMismatchError("times must be strictly increasing")

    @property
    def n_steps(self) -> int:
        return self.times.size

    @property
    def n_cells(self) -> int:
        return self.fields.shape[1]

    @property
    def d_lambda(self) -> int:
        return self.params.size


@dataclass(frozen=True)
class SnapshotMatrix:
    """``(n, m)`` field matrix, columns ordered by (run, step), step fastest."""

    data: np.ndarray
    n_runs: int
    n_steps: int

    def __post_init__(self):
        object.__setattr__(self, "data", np.asarray(self.data, dtype=np.float64))
        if self.data.ndim != 2:
            raise DimensionMismatchError("snapshot data must be 2-D")
        if self.data.shape[1] != self.n_runs * self.n_steps:
            raise DimensionMismatchError(
                f"expected {self.n_runs * self.n_steps} columns, "
                f"got {self.data.shape[1]}"
            )

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def m(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class InputMatrix:
    """``(1 + d_lambda, m)`` input matrix; row 0 is time, rows 1.. are params."""

    data: np.ndarray
    n_runs: int
    n_steps: int

    def __post_init__(self):
        object.__setattr__(self, "data", np.asarray(self.data, dtype=np.float64))
        if self.data.ndim != 2 or self.data.shape[0] < 2:
            raise DimensionMismatchError("input data must be 2-D with >= 2 rows")
        if self.data.shape[1] != self.n_runs * self.n_steps:
            raise DimensionMismatchError(
                f"expected {self.n_runs * self.n_steps} columns, "
                f"got {self.data.shape[1]}"
            )

    @property
    def d_lambda(self) -> int:
        return self.data.shape[0] - 1

    @property
    def m(self) -> int:
        return self.data.shape[1]


def build_snapshot_matrix(runs: list[SimulationRun]) -> tuple[SnapshotMatrix, InputMatrix]:
    """Flatten an ensemble of runs into paired snapshot and input matrices.

    Column ``k*T + j`` of the snapshot matrix is run ``k``'s frame ``j``;
    the same column of the input matrix is ``(t_j, lambda_k)``.  All runs
    must share n, T and d_lambda.
    """
    if not runs:
        raise EmptyInputError("cannot build a snapshot matrix from zero runs")
    first = runs[0]
    T, n, d = first.n_steps, first.n_cells, first.d_lambda
    for i, run in enumerate(runs):
        if (run.n_steps, run.n_cells, run.d_lambda) != (T, n, d):
            raise DimensionMismatchError(
                f"run {i} has (T, n, d_lambda)="
                f"{(run.n_steps, run.n_cells, run.d_lambda)}, "
                f"expected {(T, n, d)}"
            )
    N = len(runs)
    X = np.empty((n, N * T))
    x = np.empty((1 + d, N * T))
    for k, run in enumerate(runs):
        cols = slice(k * T, (k + 1) * T)
        X[:, cols] = run.fields.T
        x[0, cols] = run.times
        x[1:, cols] = run.params[:, None]
    return (SnapshotMatrix(X, N, T), InputMatrix(x, N, T))


@dataclass(frozen=True)
class SyntheticConfig:
    """Configuration of the rank-2 synthetic field generator.

    Fields live on a ``G x G`` unit-square grid (n = G^2 cells).  Each run
    draws ``lambda = (I, alpha, beta)`` uniformly from the given ranges and
    evaluates, at t_j = j/(T-1),

        u_i = mu(|I|) * sin(2*pi*t) * exp(-((x_i-.5)^2 + (y_i-.5)^2)/0.1)
              + 0.2 * I * cos(2*pi*t) * x_i

    with the saturation law mu(H) = mu0 + alpha/(beta + H).  Every frame is
    a combination of the same two spatial profiles, so the ensemble's
    snapshot matrix has rank <= 2 by construction.

    Point ranges (lo == hi) are allowed; reversed ranges are not.
    """

    grid_side: int = 8
    n_steps: int = 10
    n_runs: int = 20
    i_range: tuple[float, float] = (0.5, 2.0)
    alpha_range: tuple[float, float] = (0.05, 0.5)
    beta_range: tuple[float, float] = (0.1, 1.0)
    mu0: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.grid_side < 2:
            raise GeneratorConfigError("grid_side must be >= 2")
        if self.n_steps < 2:
            raise GeneratorConfigError("n_steps must be >= 2")
        if self.n_runs < 4:
            raise GeneratorConfigError("n_runs must be >= 4")
        for name, (lo, hi) in (("i_range", self.i_range),
                               ("alpha_range", self.alpha_range),
                               ("beta_range", self.beta_range)):
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
                raise GeneratorConfigError(f"{name} must be a finite (lo, hi) with lo <= hi")
        # mu's denominator is beta + |I|; it must stay positive over the box.
        h_min = min(abs(self.i_range[0]), abs(self.i_range[1]))
        if self.i_range[0] <= 0.0 <= self.i_range[1]:
            h_min = 0.0
        if self.beta_range[0] + h_min <= 0.0:
            raise GeneratorConfigError(
                "beta + |I| can reach a non-positive value over the configured ranges"
            )

    @property
    def n_cells(self) -> int:
        return self.grid_side ** 2


def grid_coordinates(grid_side: int) -> tuple[np.ndarray, np.ndarray]:
    """(x_i, y_i) coordinates of the G x G cells, row-major, on [0, 1]^2."""
    idx = np.arange(grid_side ** 2)
    xs = (idx % grid_side) / (grid_side - 1)
    ys = (idx // grid_side) / (grid_side - 1)
    return xs, ys


def generate_synthetic(cfg: SyntheticConfig) -> list[SimulationRun]:
    """Generate a deterministic rank-2 ensemble from ``cfg``.

    The two spatial profiles are a centered Gaussian bump and the x
    coordinate; all time/parameter dependence enters through their two
    scalar weights, which is what makes the matrix rank exactly <= 2.
    """
    xs, ys = grid_coordinates(cfg.grid_side)
    bump = np.exp(-((xs - 0.5) ** 2 + (ys - 0.5) ** 2) / 0.1)
    times = np.arange(cfg.n_steps) / (cfg.n_steps - 1)
    sin_t = np.sin(2 * np.pi * times)
    cos_t = np.cos(2 * np.pi * times)

    rng = np.random.default_rng(cfg.seed)
    lows = np.array([cfg.i_range[0], cfg.alpha_range[0], cfg.beta_range[0]])
    highs = np.array([cfg.i_range[1], cfg.alpha_range[1], cfg.beta_range[1]])
    runs = []
    for _ in range(cfg.n_runs):
        current, alpha, beta = rng.uniform(lows, highs)
        h = abs(current)
        if beta + h <= 0.0:
            raise GeneratorConfigError(f"non-positive mu denominator beta+H = {beta + h}")
        mu = cfg.mu0 + alpha / (beta + h)
        fields = (mu * np.outer(sin_t, bump)
                  + 0.2 * current * np.outer(cos_t, xs))
        runs.append(SimulationRun(np.array([current, alpha, beta]), times, fields))
    return runs


def choose_validation_runs(n_runs: int, val_fraction: float, seed: int) -> np.ndarray:
    """Indices of the runs assigned to validation (sorted, deterministic)."""
    if not (0.0 < val_fraction < 1.0):
        raise ValueError(f"val_fraction must be in (0, 1), got {val_fraction}")
    if n_runs < 2:
        raise CannotSplitError("need at least 2 runs to split")
    n_val = int(np.ceil(val_fraction * n_runs))
    if n_val >= n_runs:
        raise CannotSplitError(
            f"validation would take all {n_runs} runs (ceil({val_fraction} * {n_runs}))"
        )
    rng = np.random.default_rng(seed)
    return np.sort(rng.permutation(n_runs)[:n_val])


def split_by_run(X: SnapshotMatrix, x: InputMatrix, val_fraction: float,
                 seed: int) -> tuple[tuple[SnapshotMatrix, InputMatrix],
                                     tuple[SnapshotMatrix, InputMatrix]]:
    """Partition paired matrices into train/validation by whole runs.

    Whole runs (all T consecutive columns) go to one side or the other, so
    no trajectory leaks across the split.  ``ceil(val_fraction * N)`` runs
    land in validation; the assignment is deterministic under ``seed``.
    """
    if (X.n_runs, X.n_steps) != (x.n_runs, x.n_steps):
        raise DimensionMismatchError("snapshot and input matrices disagree on (N, T)")
    val_runs = choose_validation_runs(X.n_runs, val_fraction, seed)
    return _take_runs(X, x, np.setdiff1d(np.arange(X.n_runs), val_runs)), \
        _take_runs(X, x, val_runs)


def run_columns(run_indices: np.ndarray, n_steps: int) -> np.ndarray:
    """Column indices covered by the given runs."""
    run_indices = np.asarray(run_indices)
    return (run_indices[:, None] * n_steps + np.arange(n_steps)).ravel()


def _take_runs(X: SnapshotMatrix, x: InputMatrix,
               run_indices: np.ndarray) -> tuple[SnapshotMatrix, InputMatrix]:
    cols = run_columns(run_indices, X.n_steps)
    return (SnapshotMatrix(X.data[:, cols], len(run_indices), X.n_steps),
            InputMatrix(x.data[:, cols], len(run_indices), X.n_steps))


# ----------------------------------------------------------------------------
# RBSD v1 on-disk format: magic, u64 N/T/n/d_lambda header, then per run
# d_lambda params, T times, T*n frame values, all little-endian f64.
# A sidecar <stem>.meta.json carries free-form metadata.

def save_dataset(runs: list[SimulationRun], path: str | Path,
                 metadata: dict | None = None) -> None:
    """Write runs to ``path`` in RBSD v1; metadata goes to the JSON sidecar."""
    if not runs:
        raise EmptyInputError("refusing to save an empty dataset")
    first = runs[0]
    T, n, d = first.n_steps, first.n_cells, first.d_lambda
    for i, run in enumerate(runs):
        if (run.n_steps, run.n_cells, run.d_lambda) != (T, n, d):
            raise DimensionMismatchError(f"run {i} does not match run 0's dimensions")
    path = Path(path)
    with open(path, "wb") as f:
        f.write(DATASET_MAGIC)
        f.write(_HEADER.pack(len(runs), T, n, d))
        for run in runs:
            f.write(run.params.tobytes())
            f.write(run.times.tobytes())
            f.write(np.ascontiguousarray(run.fields).tobytes())
    if metadata is not None:
        sidecar_path(path).write_text(json.dumps(metadata, indent=2, sort_keys=True))


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def load_dataset(path: str | Path) -> list[SimulationRun]:
    """Read an RBSD v1 file back into runs (bit-exact round trip)."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:8] != DATASET_MAGIC:
        raise FormatError(
            f"bad magic {raw[:8]!r}, expected {DATASET_MAGIC!r}", offset=0)
    if len(raw) < 8 + _HEADER.size:
        raise FormatError("truncated header", offset=len(raw))
    N, T, n, d = _HEADER.unpack_from(raw, 8)
    if T < 1 or n < 1 or d < 1 or N < 1:
        raise FormatError(f"invalid header dimensions N={N} T={T} n={n} d={d}", offset=8)
    offset = 8 + _HEADER.size
    per_run = 8 * (d + T + T * n)
    runs = []
    for k in range(N):
        if len(raw) < offset + per_run:
            raise FormatError(
                f"file truncated inside run {k}: header promises {N} runs of "
                f"{per_run} bytes each", offset=len(raw))
        params = np.frombuffer(raw, dtype="<f8", count=d, offset=offset)
        offset += 8 * d
        times = np.frombuffer(raw, dtype="<f8", count=T, offset=offset)
        offset += 8 * T
        fields = np.frombuffer(raw, dtype="<f8", count=T * n,
                               offset=offset).reshape(T, n)
        offset += 8 * T * n
        runs.append(SimulationRun(params.copy(), times.copy(), fields.copy()))
    if offset != len(raw):
        raise FormatError(f"{len(raw) - offset} trailing bytes after last run",
                          offset=offset)
    return runs


def load_dataset_metadata(path: str | Path) -> dict:
    """Sidecar metadata for a dataset file; empty dict when absent."""
    sp = sidecar_path(path)
    if not sp.exists():
        return {}
    return json.loads(sp.read_text())
