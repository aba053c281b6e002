# How fast is one reconstruction as the field grows?  Build models of
# increasing cell count with realistic regressor sizes and time single queries.

import numpy as np

from rbs import (PodBasis, Standardizer, SurrogateModel, SvrHyperparams,
                 SvrModel, bench_latency, compute_Kp)

rng = np.random.default_rng(7)
r, d_lambda, n_sv = 10, 3, 40


def padded_model(n):
    modes = np.ascontiguousarray(np.linalg.qr(rng.normal(size=(n, r)))[0])
    basis = PodBasis(modes, np.linspace(100.0, 1.0, r), r, 0.98)
    std = Standardizer(np.zeros(r), np.ones(r),
                       np.zeros(d_lambda + 1), np.ones(d_lambda + 1))
    svrs = tuple(
        SvrModel(SvrHyperparams(0.05, 10.0, 1.0),
                 rng.normal(size=(n_sv, d_lambda + 1)),
                 0.1 * rng.normal(size=n_sv), bias=float(rng.normal()))
        for _ in range(r))
    return SurrogateModel(basis=basis, standardizer=std, svrs=svrs,
                          bound_constants=compute_Kp(basis, std),
                          e=0.1, e_k=(0.1,) * r,
                          metadata={"input_ranges": [[0.0, 1.0]] * (d_lambda + 1)})


print(f"r={r} modes, {n_sv} support vectors per mode, 100 timed queries per size")
print(f"{'cells':>9}  {'mean':>9}  {'p50':>9}  {'p99':>9}")
for n in (1_000, 10_000, 100_000, 400_000):
    stats = bench_latency(padded_model(n), 100, rng=rng)
    print(f"{n:>9}  {stats['mean_us']:>7.0f}us  "
          f"{stats['p50_us']:>7.0f}us  {stats['p99_us']:>7.0f}us")
