"""Epsilon-insensitive support vector regression with a Gaussian kernel.

The trainer solves the dual problem in the difference variables
``beta_i = alpha_i - alpha_i*``:

    maximize  W(beta) = y.beta - epsilon*||beta||_1 - 0.5*beta.K.beta
    s.t.      sum(beta) = 0,  -c_reg <= beta_i <= c_reg

by sequential minimal optimization on maximal violating pairs.  Each
step moves one pair (i, j) by +delta/-delta, which keeps the equality
constraint satisfied exactly at all times.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DimensionMismatchError, EmptyInputError, NumericError

ETA_MIN = 1e-12  # below this the pair direction is treated as linear


@dataclass(frozen=True)
class SvrHyperparams:
    """Tube half-width, box bound, and kernel width (standardized units)."""

    epsilon: float
    c_reg: float
    sigma: float

    def __post_init__(self):
        for name in ("epsilon", "c_reg", "sigma"):
            v = getattr(self, name)
            if not (v > 0.0 and np.isfinite(v)):
                raise ValueError(f"{name} must be finite and > 0, got {v}")


def gaussian_kernel(A: np.ndarray, B: np.ndarray, sigma: float) -> np.ndarray:
    """Pairwise kernel matrix exp(-||a - b||^2 / (2 sigma^2)), shape (ma, mb)."""
    if not sigma > 0.0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatchError(
            f"kernel inputs have {A.shape[1]} and {B.shape[1]} features")
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    np.clip(sq, 0.0, None, out=sq)
    return np.exp(-sq / (2.0 * sigma * sigma))


def kernel(a: np.ndarray, b: np.ndarray, sigma: float) -> float:
    """Gaussian kernel value for a single pair of input vectors."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"kernel inputs have lengths {a.size} and {b.size}")
    return float(gaussian_kernel(a[None, :], b[None, :], sigma)[0, 0])


class KernelCache:
    """LRU cache of kernel rows over a fixed training set.

    ``row(i)`` returns the full i-th row of the kernel matrix, computing
    it on a miss and evicting the least recently used row once more than
    ``capacity`` rows are held.  Pure caching: results do not depend on
    the capacity.
    """

    def __init__(self, X: np.ndarray, sigma: float, capacity: int = 512):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self._X = np.ascontiguousarray(X, dtype=np.float64)
        self._sq = np.einsum("ij,ij->i", self._X, self._X)
        self._inv = 1.0 / (2.0 * sigma * sigma)
        self._capacity = capacity
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()
        self.hits = 0
        self.misses = 0

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            self.hits += 1
            return cached
        self.misses += 1
        d2 = self._sq + self._sq[i] - 2.0 * (self._X @ self._X[i])
        np.clip(d2, 0.0, None, out=d2)
        r = np.exp(-d2 * self._inv)
        r[i] = 1.0
        self._rows[i] = r
        if len(self._rows) > self._capacity:
            self._rows.popitem(last=False)
        return r


@dataclass(frozen=True)
class SvrModel:
    """Trained regressor: f(x) = sum_s dual_coefs_s k(sv_s, x) + bias.

    Only support vectors (nonzero dual coefficients) are stored.
    ``n_iter`` and ``violation`` record how training ended;
    ``support_indices`` maps support rows back into the training set and
    is absent on models loaded from disk.
    """

    hyper: SvrHyperparams
    support_inputs: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    n_iter: int = 0
    violation: float = 0.0
    support_indices: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_support(self) -> int:
        return self.support_inputs.shape[0]

    def predict(self, Z: np.ndarray) -> float | np.ndarray:
        """Prediction at one input vector (d,) or a batch (m, d)."""
        Z = np.asarray(Z, dtype=np.float64)
        single = Z.ndim == 1
        if single:
            Z = Z[None, :]
        if Z.ndim != 2 or (self.n_support and Z.shape[1] != self.support_inputs.shape[1]):
            raise DimensionMismatchError(
                f"expected inputs with {self.support_inputs.shape[1]} features, "
                f"got shape {Z.shape}")
        if self.n_support == 0:
            out = np.full(Z.shape[0], self.bias)
        else:
            K = gaussian_kernel(Z, self.support_inputs, self.hyper.sigma)
            out = K @ self.dual_coefs + self.bias
        return float(out[0]) if single else out


def predict(model: SvrModel, x: np.ndarray) -> float | np.ndarray:
    return model.predict(x)


def validation_rmse(model: SvrModel, inputs: np.ndarray, targets: np.ndarray) -> float:
    """sqrt((1/m) sum (y - f(x))^2) over the given set."""
    targets = np.asarray(targets, dtype=np.float64)
    if targets.size == 0:
        raise EmptyInputError("validation set is empty")
    resid = targets - model.predict(np.atleast_2d(inputs))
    return float(np.sqrt(np.mean(resid * resid)))


def dual_objective(K: np.ndarray, y: np.ndarray, beta: np.ndarray, epsilon: float) -> float:
    """W(beta) = y.beta - epsilon*||beta||_1 - 0.5*beta.K.beta."""
    beta = np.asarray(beta, dtype=np.float64)
    return float(y @ beta - epsilon * np.abs(beta).sum() - 0.5 * beta @ (K @ beta))


def train_svr(
    X: np.ndarray,
    y: np.ndarray,
    hyper: SvrHyperparams,
    tol: float = 1e-3,
    max_iter: int = 1_000_000,
    cache_rows: int = 512,
) -> SvrModel:
    """Fit by SMO until the maximal KKT violation drops to ``tol``.

    Convergence certificate: when the largest feasible ascent value minus
    the smallest feasible descent value is <= tol, every training point
    satisfies the optimality conditions within tol (with the bias taken
    as the midpoint of the two).  Raises ConvergenceError carrying the
    final violation if ``max_iter`` pair updates are not enough.

    The first index of each working pair is the maximal ascent candidate;
    its partner is the descent candidate with the largest second-order
    gain (gap^2 / curvature) along the pair direction.  Pairing by gain
    instead of by gap avoids the near-flat directions that make plain
    maximal-pair updates crawl on smooth kernels, without changing the
    stopping rule above or the optimum it certifies.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise DimensionMismatchError(
            f"need X (m, d) and y (m,), got {X.shape} and {y.shape}")
    if X.shape[0] == 0:
        raise EmptyInputError("cannot train on zero samples")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NumericError("training data contains non-finite values")
    if not tol > 0.0:
        raise ValueError(f"tol must be > 0, got {tol}")

    m = y.shape[0]
    eps, C = hyper.epsilon, hyper.c_reg
    beta = np.zeros(m)
    cache = KernelCache(X, hyper.sigma, capacity=min(cache_rows, m))

    # Residual F = y - K@beta is kept current across updates.  The feasible
    # ascent/descent value at a point is F plus a per-point offset: the value
    # jumps by 2*epsilon across beta_p = 0, so each side of the kink gets its
    # own candidate, and a box wall removes the candidate entirely (+-inf).
    # Only entries i and j of the offsets change per update.
    F = y.copy()
    off_up = np.full(m, -eps)
    off_dn = np.full(m, eps)

    def _refresh_offsets(p: int) -> None:
        b = beta[p]
        off_up[p] = -np.inf if b >= C else (eps if b < 0.0 else -eps)
        off_dn[p] = np.inf if b <= -C else (-eps if b > 0.0 else eps)

    up = np.empty(m)
    dn = np.empty(m)
    gap = np.empty(m)
    work = np.empty(m)
    gain = np.empty(m)

    n_iter = 0
    while True:
        np.add(F, off_up, out=up)
        np.add(F, off_dn, out=dn)
        i = int(np.argmax(up))
        dn_min = float(np.min(dn))
        violation = up[i] - dn_min
        if violation <= tol:
            bias = float((up[i] + dn_min) / 2.0)
            break
        if n_iter >= max_iter:
            raise ConvergenceError(
                f"SMO did not converge in {max_iter} iterations "
                f"(violation {violation:.3e} > tol {tol:.3e})", violation)

        Ki = cache.row(i)
        # Partner = descent candidate with the best second-order gain
        # gap^2 / curvature.  The Gaussian kernel has unit diagonal, so the
        # pair curvature is K_ii + 1 - 2*K_ij.  Candidates must strictly
        # improve on i (gap > 0); i itself never qualifies (its own gap is
        # 0 or -2*epsilon).  Pairing by gain instead of raw gap avoids the
        # near-flat directions that stall plain maximal-pair updates.  The
        # signed square gap*|gap| keeps every invalid candidate negative,
        # so the argmax needs no mask.
        np.subtract(up[i], dn, out=gap)
        np.multiply(Ki, -2.0, out=work)
        work += Ki[i] + 1.0
        np.maximum(work, ETA_MIN, out=work)
        np.abs(gap, out=gain)
        gain *= gap
        gain /= work
        j = int(np.argmax(gain))
        Kj = cache.row(j)
        eta = Ki[i] + Kj[j] - 2.0 * Ki[j]
        pair_gap = gap[j]
        # Step stops at the nearest of: curvature optimum, a box wall, the
        # kink at zero (the gradient changes there, so re-evaluate next pass).
        room_i = -beta[i] if beta[i] < 0.0 else C - beta[i]
        room_j = beta[j] if beta[j] > 0.0 else C + beta[j]
        delta = pair_gap / eta if eta > ETA_MIN else np.inf
        delta = min(delta, room_i, room_j)
        if delta == room_i:
            beta[i] = 0.0 if beta[i] < 0.0 else C
        else:
            beta[i] += delta
        if delta == room_j:
            beta[j] = 0.0 if beta[j] > 0.0 else -C
        else:
            beta[j] -= delta
        _refresh_offsets(i)
        _refresh_offsets(j)
        np.subtract(Kj, Ki, out=work)
        work *= delta
        F += work
        n_iter += 1

    sv = beta != 0.0
    return SvrModel(
        hyper=hyper,
        support_inputs=np.ascontiguousarray(X[sv]),
        dual_coefs=beta[sv].copy(),
        bias=bias,
        n_iter=n_iter,
        violation=float(violation),
        support_indices=np.flatnonzero(sv),
    )
