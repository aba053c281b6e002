"""Independent reference implementations used as test oracles.

Everything here is written the slow, obvious way (explicit loops,
exhaustive enumeration, library calls) so that agreement with the
package's optimized code is meaningful evidence of correctness.
"""

import numpy as np


def loop_snapshot_matrices(runs):
    """Column-by-column assembly of the paired snapshot/input matrices."""
    N = len(runs)
    T = runs[0].times.size
    n = runs[0].fields.shape[1]
    d = runs[0].params.size
    X = np.zeros((n, N * T))
    x = np.zeros((1 + d, N * T))
    for i in range(N):
        for j in range(T):
            col = i * T + j
            for p in range(n):
                X[p, col] = runs[i].fields[j, p]
            x[0, col] = runs[i].times[j]
            for q in range(d):
                x[1 + q, col] = runs[i].params[q]
    return X, x


def loop_rel_rmse(pred, ref, n_runs, n_steps):
    """Triple-loop relative squared error: runs, then steps, then cells."""
    num = 0.0
    den = 0.0
    for i in range(n_runs):
        for j in range(n_steps):
            col = i * n_steps + j
            for p in range(pred.shape[0]):
                num += (pred[p, col] - ref[p, col]) ** 2
                den += ref[p, col] ** 2
    m = n_runs * n_steps
    return (num / m) / (den / m)


def loop_rel_ame(pred, ref, n_runs, n_steps):
    num = 0.0
    den = 0.0
    for i in range(n_runs):
        for j in range(n_steps):
            col = i * n_steps + j
            for p in range(pred.shape[0]):
                num += abs(pred[p, col] - ref[p, col])
                den += abs(ref[p, col])
    m = n_runs * n_steps
    return (num / m) / (den / m)


def loop_kp(modes, stds):
    """K_p from the explicit square-plus-cross-terms formula."""
    n, r = modes.shape
    out = np.zeros(n)
    for p in range(n):
        a = 0.0
        for k in range(r):
            a += (stds[k] * modes[p, k]) ** 2
        b = 0.0
        for h in range(r):
            for l in range(h + 1, r):
                b += abs(stds[h] * modes[p, h]) * abs(stds[l] * modes[p, l])
        out[p] = np.sqrt(a + 2.0 * b)
    return out


def dual_objective(K, y, beta, epsilon):
    return float(y @ beta - epsilon * np.abs(beta).sum() - 0.5 * beta @ (K @ beta))


def _lattice_pass(K, y, epsilon, C, grids):
    """Best feasible beta with beta[i] drawn from grids[i] (last coord forced).

    The equality constraint sum(beta) = 0 removes one degree of freedom:
    enumerate the first m-1 coordinates and solve for the last, keeping
    only combinations where it lands inside the box.
    """
    m = y.size
    mesh = np.meshgrid(*grids, indexing="ij")
    free = np.stack([g.ravel() for g in mesh], axis=1)
    last = -free.sum(axis=1)
    ok = np.abs(last) <= C + 1e-12
    if not np.any(ok):
        return None, -np.inf
    beta = np.concatenate([free[ok], last[ok, None]], axis=1)
    obj = (beta @ y
           - epsilon * np.abs(beta).sum(axis=1)
           - 0.5 * np.einsum("ij,jk,ik->i", beta, K, beta))
    best = int(np.argmax(obj))
    return beta[best], float(obj[best])


def lattice_best_dual(K, y, epsilon, C, n_grid=9, n_zoom=3):
    """Exhaustive lattice maximization of the collapsed epsilon-SVR dual.

    A coarse pass over [-C, C]^(m-1), then ``n_zoom`` passes on shrinking
    windows around the incumbent.  Every pass force-includes 0, the box
    walls, and the incumbent coordinate, because the optimum routinely
    sits exactly on the loss kink or the box.
    """
    m = y.size
    grids = [np.linspace(-C, C, n_grid)] * (m - 1)
    best_beta, best_obj = _lattice_pass(K, y, epsilon, C, grids)
    half = C
    for _ in range(n_zoom):
        half /= (n_grid - 1) / 2.0
        grids = []
        for i in range(m - 1):
            center = best_beta[i]
            lo = max(-C, center - half)
            hi = min(C, center + half)
            g = np.linspace(lo, hi, n_grid)
            extra = [v for v in (0.0, -C, C, center) if lo <= v <= hi]
            grids.append(np.unique(np.concatenate([g, extra])))
        cand_beta, cand_obj = _lattice_pass(K, y, epsilon, C, grids)
        if cand_obj > best_obj:
            best_beta, best_obj = cand_beta, cand_obj
    return best_beta, best_obj


def kkt_max_violation(model, X, y):
    """Largest violation of the epsilon-SVR optimality conditions.

    In the collapsed variables beta = alpha - alpha*, with residual
    err_i = y_i - f(x_i), optimality at tolerance 0 is:
      beta <  C  =>  err <=  eps   (room to ascend, no gain available)
      beta > -C  =>  err >= -eps
      beta >  0  =>  err >=  eps   (a positive beta needs full tube tension)
      beta <  0  =>  err <= -eps
    The returned value is the largest amount by which any trained point
    breaks any applicable inequality.
    """
    eps, C = model.hyper.epsilon, model.hyper.c_reg
    beta = np.zeros(X.shape[0])
    if model.support_indices is not None:
        beta[model.support_indices] = model.dual_coefs
    err = y - model.predict(X)
    worst = 0.0
    for i in range(X.shape[0]):
        b, e = beta[i], err[i]
        if b < C:
            worst = max(worst, e - eps)
        if b > -C:
            worst = max(worst, -eps - e)
        if b > 0:
            worst = max(worst, eps - e)
        if b < 0:
            worst = max(worst, e + eps)
    return float(worst)


def minimal_rank_scan(singular_values, threshold):
    """Smallest r meeting the energy threshold, by linear scan."""
    s = np.asarray(singular_values, dtype=np.float64)
    total = s.sum()
    for r in range(1, s.size + 1):
        if s[:r].sum() / total >= threshold - 1e-15:
            return r
    return s.size
