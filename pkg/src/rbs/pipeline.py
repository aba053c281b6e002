"""End-to-end surrogate training, real-time inference, and model files.

Training chains the other modules: snapshot assembly, basis truncation,
coefficient projection, a run-level train/validation split, coefficient
and input standardization (training statistics only), joint
hyperparameter tuning, final per-mode regressor training, and the
per-cell bound constants.  The result is a single immutable artifact
that maps (t, lambda) straight to a field vector.
"""

from __future__ import annotations

import json
import struct
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from .dataset import build_snapshot_matrix, choose_validation_runs, run_columns
from .errors import (
    ChecksumError,
    DimensionMismatchError,
    FormatError,
    NumericError,
    UnsupportedVersionError,
)
from .evaluate import compute_Kp
from .pod import PodBasis, accumulated_energy, pod_basis
from .svr import SvrHyperparams, SvrModel, train_svr, validation_rmse
from .tuner import GAMMA, N_CANDIDATES, N_STARTUP, Trial, tune

DEGENERATE_REL = 1e-12

MODEL_MAGIC = b"RBSM0001"
MODEL_VERSION = 1
_HEADER = struct.Struct("<8sHQQQ")
_SECTION = struct.Struct("<12sQQI")
_COUNT = struct.Struct("<I")
_SVR_HEAD = struct.Struct("<3dQ")
_F64 = struct.Struct("<d")


@dataclass(frozen=True)
class Standardizer:
    """Center/reduce transforms for coefficients (per mode) and inputs.

    Degenerate directions (std below 1e-12 of the largest) store std 1,
    so applying the transform maps them to exact zeros and the inverse
    reproduces the mean.
    """

    coeff_means: np.ndarray
    coeff_stds: np.ndarray
    input_means: np.ndarray
    input_stds: np.ndarray

    def __post_init__(self):
        if self.coeff_means.shape != self.coeff_stds.shape or self.coeff_means.ndim != 1:
            raise DimensionMismatchError("coefficient stats must be matching 1-D vectors")
        if self.input_means.shape != self.input_stds.shape or self.input_means.ndim != 1:
            raise DimensionMismatchError("input stats must be matching 1-D vectors")
        if not (np.all(self.coeff_stds > 0) and np.all(self.input_stds > 0)):
            raise ValueError("standard deviations must be strictly positive")

    @property
    def r(self) -> int:
        return self.coeff_means.shape[0]

    @property
    def d(self) -> int:
        return self.input_means.shape[0]

    def apply_coeffs(self, C: np.ndarray) -> np.ndarray:
        return (C - self.coeff_means[:, None]) / self.coeff_stds[:, None]

    def invert_coeffs(self, c: np.ndarray) -> np.ndarray:
        return c * self.coeff_stds[:, None] + self.coeff_means[:, None]

    def apply_inputs(self, rows: np.ndarray) -> np.ndarray:
        return (rows - self.input_means) / self.input_stds


def _guard_stds(stds: np.ndarray) -> np.ndarray:
    mx = stds.max() if stds.size else 0.0
    if mx <= 0.0:
        return np.ones_like(stds)
    return np.where(stds < DEGENERATE_REL * mx, 1.0, stds)


def fit_standardizer(C_train: np.ndarray, input_rows: np.ndarray) -> Standardizer:
    """Statistics from the training split only."""
    C_train = np.asarray(C_train, dtype=np.float64)
    input_rows = np.asarray(input_rows, dtype=np.float64)
    return Standardizer(
        coeff_means=C_train.mean(axis=1),
        coeff_stds=_guard_stds(C_train.std(axis=1)),
        input_means=input_rows.mean(axis=0),
        input_stds=_guard_stds(input_rows.std(axis=0)),
    )


@dataclass(frozen=True)
class FitConfig:
    energy_threshold: float = 0.98
    val_fraction: float = 0.2
    n_trials: int = 50
    split_seed: int = 0
    tuner_seed: int = 0
    n_startup: int = N_STARTUP
    gamma: float = GAMMA
    n_candidates: int = N_CANDIDATES
    svr_tol: float = 1e-3
    # per-trial training budget; keeps one bad hyperparameter draw from
    # eating the whole tuning run (such trials fail and are skipped)
    svr_max_iter: int = 300_000
    # per-mode tuning is the pipeline default: with n_trials in the tens,
    # searching r separate 3-D boxes reaches materially lower worst-mode
    # error than one 3r-D search on the same budget
    independent_tuning: bool = True

    def __post_init__(self):
        if not (0.0 < self.energy_threshold <= 1.0):
            raise ValueError(
                f"energy_threshold must be in (0, 1], got {self.energy_threshold}")
        if not (0.0 < self.val_fraction < 1.0):
            raise ValueError(
                f"val_fraction must be in (0, 1), got {self.val_fraction}")
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be >= 1, got {self.n_trials}")


@dataclass(frozen=True)
class SurrogateModel:
    """The deployable artifact: basis + standardizer + regressors + bounds."""

    basis: PodBasis
    standardizer: Standardizer
    svrs: tuple[SvrModel, ...]
    bound_constants: np.ndarray
    e: float
    e_k: tuple[float, ...]
    metadata: dict
    tuning_history: tuple[Trial, ...] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        r = self.basis.rank
        if len(self.svrs) != r or len(self.e_k) != r:
            raise DimensionMismatchError(
                f"need {r} regressors and errors, got {len(self.svrs)} and {len(self.e_k)}")
        if self.bound_constants.shape != (self.basis.n,):
            raise DimensionMismatchError(
                f"bound constants must be ({self.basis.n},), got {self.bound_constants.shape}")
        if np.any(self.bound_constants < 0):
            raise ValueError("bound constants must be non-negative")

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def r(self) -> int:
        return self.basis.rank

    @property
    def d_lambda(self) -> int:
        return self.standardizer.d - 1

    @property
    def input_ranges(self) -> np.ndarray:
        return np.asarray(self.metadata["input_ranges"], dtype=np.float64)


def fit(runs, cfg: FitConfig = FitConfig(), metadata: dict | None = None) -> SurrogateModel:
    """Train a surrogate on a run ensemble.  Deterministic under cfg seeds.

    ``metadata`` entries (e.g. parameter names from a dataset sidecar)
    are merged into the model metadata; computed keys win.
    """
    X, xin = build_snapshot_matrix(runs)
    N, T = X.n_runs, X.n_steps
    basis = pod_basis(X.data, cfg.energy_threshold)
    C = basis.project(X.data)
    rows = np.ascontiguousarray(xin.data.T)

    val_runs = choose_validation_runs(N, cfg.val_fraction, cfg.split_seed)
    val_set = set(val_runs)
    train_runs = [i for i in range(N) if i not in val_set]
    cols_tr = run_columns(train_runs, T)
    cols_va = run_columns(val_runs, T)

    std = fit_standardizer(C[:, cols_tr], rows[cols_tr])
    Z_tr = std.apply_inputs(rows[cols_tr])
    Z_va = std.apply_inputs(rows[cols_va])
    c_tr = std.apply_coeffs(C[:, cols_tr])
    c_va = std.apply_coeffs(C[:, cols_va])

    best_params, _, history = tune(
        (Z_tr, c_tr), (Z_va, c_va), cfg.n_trials, cfg.tuner_seed,
        independent=cfg.independent_tuning,
        n_startup=cfg.n_startup, gamma=cfg.gamma, n_candidates=cfg.n_candidates,
        tol=cfg.svr_tol, max_iter=cfg.svr_max_iter)

    svrs = []
    e_k = []
    for k in range(basis.rank):
        hyper = SvrHyperparams(*best_params[3 * k: 3 * k + 3])
        model_k = train_svr(Z_tr, c_tr[k], hyper,
                            tol=cfg.svr_tol, max_iter=cfg.svr_max_iter)
        svrs.append(model_k)
        e_k.append(validation_rmse(model_k, Z_va, c_va[k]))

    d = rows.shape[1]
    meta = dict(metadata or {})
    meta.setdefault("parameter_names", [f"p{i}" for i in range(1, d)])
    meta.update({
        "d_lambda": d - 1,
        "n_runs": int(N),
        "n_steps": int(T),
        "input_ranges": [[float(lo), float(hi)]
                         for lo, hi in zip(rows.min(axis=0), rows.max(axis=0))],
        "energy_threshold": float(cfg.energy_threshold),
        "energy_at_rank": float(accumulated_energy(basis.singular_values, basis.rank)),
        "e": float(max(e_k)),
        "e_k": [float(v) for v in e_k],
        "val_runs": [int(i) for i in val_runs],
        "n_trials": int(cfg.n_trials),
        "split_seed": int(cfg.split_seed),
        "tuner_seed": int(cfg.tuner_seed),
    })
    return SurrogateModel(
        basis=basis,
        standardizer=std,
        svrs=tuple(svrs),
        bound_constants=compute_Kp(basis, std),
        e=float(max(e_k)),
        e_k=tuple(float(v) for v in e_k),
        metadata=meta,
        tuning_history=tuple(history),
    )


def infer(model: SurrogateModel, t: float, lam) -> np.ndarray:
    """Field at one (t, lambda): standardize, predict r coefficients,
    de-standardize, reconstruct.  Pure; no time stepping."""
    lam = np.asarray(lam, dtype=np.float64).ravel()
    if lam.shape[0] != model.d_lambda:
        raise DimensionMismatchError(
            f"lambda has {lam.shape[0]} components, expected {model.d_lambda}")
    row = np.empty(model.standardizer.d)
    row[0] = t
    row[1:] = lam
    if not np.all(np.isfinite(row)):
        raise NumericError("inference input contains non-finite values")
    z = (row - model.standardizer.input_means) / model.standardizer.input_stds
    c_hat = np.array([svr.predict(z) for svr in model.svrs])
    C_hat = model.standardizer.coeff_stds * c_hat + model.standardizer.coeff_means
    return model.basis.modes @ C_hat


def infer_batch(model: SurrogateModel, inputs: np.ndarray) -> np.ndarray:
    """Rows of (t, lambda...) -> rows of fields; row i equals
    infer(model, inputs[i, 0], inputs[i, 1:]) exactly."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if inputs.shape[1] != model.standardizer.d:
        raise DimensionMismatchError(
            f"batch rows have {inputs.shape[1]} values, expected {model.standardizer.d}")
    out = np.empty((inputs.shape[0], model.n))
    for i, row in enumerate(inputs):
        out[i] = infer(model, row[0], row[1:])
    return out


def is_extrapolated(model: SurrogateModel, t: float, lam) -> bool:
    """True iff any input component leaves the range seen during fitting."""
    lam = np.asarray(lam, dtype=np.float64).ravel()
    row = np.concatenate(([float(t)], lam))
    ranges = model.input_ranges
    if row.shape[0] != ranges.shape[0]:
        raise DimensionMismatchError(
            f"input has {row.shape[0]} components, expected {ranges.shape[0]}")
    return bool(np.any(row < ranges[:, 0]) or np.any(row > ranges[:, 1]))


def bench_latency(model: SurrogateModel, n_queries: int, rng=None) -> dict:
    """Wall-time statistics of single-query inference, microseconds.

    Queries are drawn inside the training input ranges; three warmup
    calls precede measurement.
    """
    if n_queries < 1:
        raise ValueError(f"n_queries must be >= 1, got {n_queries}")
    rng = np.random.default_rng() if rng is None else rng
    ranges = model.input_ranges
    queries = rng.uniform(ranges[:, 0], ranges[:, 1], size=(n_queries + 3, ranges.shape[0]))
    samples = np.empty(n_queries)
    for i, q in enumerate(queries):
        t0 = time.perf_counter_ns()
        infer(model, q[0], q[1:])
        dt = (time.perf_counter_ns() - t0) / 1000.0
        if i >= 3:
            samples[i - 3] = dt
    return {
        "n_samples": int(n_queries),
        "mean_us": float(samples.mean()),
        "std_us": float(samples.std()),
        "min_us": float(samples.min()),
        "max_us": float(samples.max()),
        "p50_us": float(np.percentile(samples, 50)),
        "p99_us": float(np.percentile(samples, 99)),
        "n": model.n,
        "r": model.r,
        "d_lambda": model.d_lambda,
        "samples_us": [float(v) for v in samples],
    }


def _np_json(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _svr_payload(svr: SvrModel, d: int) -> bytes:
    sv = np.ascontiguousarray(svr.support_inputs, dtype=np.float64)
    if svr.n_support and sv.shape[1] != d:
        raise DimensionMismatchError(
            f"support inputs have {sv.shape[1]} features, expected {d}")
    return b"".join([
        _SVR_HEAD.pack(svr.hyper.epsilon, svr.hyper.c_reg, svr.hyper.sigma,
                       svr.n_support),
        sv.tobytes(),
        np.ascontiguousarray(svr.dual_coefs, dtype=np.float64).tobytes(),
        _F64.pack(svr.bias),
    ])


def serialize_model(model: SurrogateModel, created: str | None = None) -> bytes:
    """RBSM v1 bytes: header, crc32-checked section table, payloads."""
    n, r, d = model.n, model.r, model.standardizer.d
    meta = dict(model.metadata)
    if created is not None:
        meta["created"] = created
    sections: list[tuple[bytes, bytes]] = [
        (b"BASIS", np.asarray(model.basis.modes, dtype=np.float64).tobytes(order="F")),
        (b"SIGMA", np.asarray(model.basis.singular_values, dtype=np.float64).tobytes()),
        (b"COEFF_STD", np.concatenate([model.standardizer.coeff_means,
                                       model.standardizer.coeff_stds]).tobytes()),
        (b"INPUT_STD", np.concatenate([model.standardizer.input_means,
                                      model.standardizer.input_stds]).tobytes()),
        (b"BOUND", np.asarray(model.bound_constants, dtype=np.float64).tobytes()),
    ]
    for k, svr in enumerate(model.svrs, start=1):
        sections.append((f"SVR{k:04d}".encode(), _svr_payload(svr, d)))
    sections.append((b"META", json.dumps(meta, sort_keys=True,
                                         separators=(",", ":"),
                                         default=_np_json).encode()))

    header = _HEADER.pack(MODEL_MAGIC, MODEL_VERSION, n, r, d)
    table_size = _COUNT.size + len(sections) * _SECTION.size
    offset = len(header) + table_size
    table = [_COUNT.pack(len(sections))]
    payloads = []
    for name, payload in sections:
        table.append(_SECTION.pack(name.ljust(12, b"\0"), offset, len(payload),
                                   zlib.crc32(payload)))
        payloads.append(payload)
        offset += len(payload)
    return b"".join([header, *table, *payloads])


def save_model(model: SurrogateModel, path, created: str | None = None) -> None:
    with open(path, "wb") as f:
        f.write(serialize_model(model, created=created))


def _take(raw: bytes, fmt: struct.Struct, offset: int, what: str):
    if offset + fmt.size > len(raw):
        raise FormatError(f"truncated while reading {what}", offset=offset)
    return fmt.unpack_from(raw, offset), offset + fmt.size


def _floats(payload: bytes, count: int, name: str) -> np.ndarray:
    if len(payload) != count * 8:
        raise FormatError(
            f"expected {count * 8} bytes, found {len(payload)}", section=name)
    return np.frombuffer(payload, dtype="<f8").copy()


def deserialize_model(raw: bytes) -> SurrogateModel:
    (magic, version, n, r, d), pos = _take(raw, _HEADER, 0, "header")
    if magic != MODEL_MAGIC:
        raise FormatError(
            f"bad magic {magic!r}, expected {MODEL_MAGIC!r}", offset=0)
    if version != MODEL_VERSION:
        raise UnsupportedVersionError(
            f"unsupported model version {version}, this build reads {MODEL_VERSION}")
    (count,), pos = _take(raw, _COUNT, pos, "section count")
    sections: dict[str, bytes] = {}
    for s in range(count):
        (name_raw, offset, length, crc), pos = _take(raw, _SECTION, pos, f"section table entry {s}")
        name = name_raw.rstrip(b"\0").decode("ascii", errors="replace")
        if offset + length > len(raw):
            raise FormatError(
                f"section {name} runs past end of file", offset=offset, section=name)
        payload = raw[offset: offset + length]
        if zlib.crc32(payload) != crc:
            raise ChecksumError("checksum mismatch", section=name)
        sections[name] = payload

    def need(name: str) -> bytes:
        if name not in sections:
            raise FormatError(f"missing required section {name}")
        return sections[name]

    meta_raw = need("META")
    try:
        meta = json.loads(meta_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable metadata: {exc}", section="META") from None
    for key in ("e", "e_k", "energy_threshold", "input_ranges"):
        if key not in meta:
            raise FormatError(f"metadata missing key {key!r}", section="META")

    # Column-major on disk; C-contiguous in memory so matrix products take
    # the same BLAS path (and round identically) as freshly fitted models.
    modes = np.ascontiguousarray(
        _floats(need("BASIS"), n * r, "BASIS").reshape((n, r), order="F"))
    sigma = _floats(need("SIGMA"), len(need("SIGMA")) // 8, "SIGMA")
    coeff_std = _floats(need("COEFF_STD"), 2 * r, "COEFF_STD")
    input_std = _floats(need("INPUT_STD"), 2 * d, "INPUT_STD")
    kp = _floats(need("BOUND"), n, "BOUND")

    svrs = []
    for k in range(1, r + 1):
        name = f"SVR{k:04d}"
        payload = need(name)
        if len(payload) < _SVR_HEAD.size + _F64.size:
            raise FormatError("section too short", section=name)
        eps, c_reg, sig, n_sv = _SVR_HEAD.unpack_from(payload, 0)
        body = payload[_SVR_HEAD.size:-_F64.size]
        expected = n_sv * d * 8 + n_sv * 8
        if len(body) != expected:
            raise FormatError(
                f"expected {expected} bytes of support data, found {len(body)}",
                section=name)
        sv = np.frombuffer(body[: n_sv * d * 8], dtype="<f8").copy().reshape((n_sv, d))
        coefs = np.frombuffer(body[n_sv * d * 8:], dtype="<f8").copy()
        (bias,) = _F64.unpack_from(payload, len(payload) - _F64.size)
        svrs.append(SvrModel(
            hyper=SvrHyperparams(eps, c_reg, sig),
            support_inputs=sv, dual_coefs=coefs, bias=bias))

    basis = PodBasis(modes, sigma, int(r), float(meta["energy_threshold"]))
    std = Standardizer(
        coeff_means=coeff_std[:r], coeff_stds=coeff_std[r:],
        input_means=input_std[:d], input_stds=input_std[d:])
    return SurrogateModel(
        basis=basis, standardizer=std, svrs=tuple(svrs),
        bound_constants=kp,
        e=float(meta["e"]), e_k=tuple(float(v) for v in meta["e_k"]),
        metadata=meta)


def load_model(path) -> SurrogateModel:
    with open(path, "rb") as f:
        raw = f.read()
    return deserialize_model(raw)
