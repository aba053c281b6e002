"""End-to-end acceptance gates for the surrogate toolkit.

One test per shipping criterion; each prints a single [PASS]/[FAIL] line
with the measured numbers before asserting, so a bare ``pytest -v`` gives
one verdict line per gate and ``-s`` shows the margins.
"""

import math
import time
from types import SimpleNamespace

import numpy as np
from fastapi.testclient import TestClient

from rbs.cli import main as cli_main
from rbs.dataset import (
    SyntheticConfig,
    build_snapshot_matrix,
    generate_synthetic,
    run_columns,
)
from rbs.evaluate import compute_Kp, rel_ame, rel_rmse, verify_bound
from rbs.pipeline import (
    FitConfig,
    Standardizer,
    SurrogateModel,
    bench_latency,
    fit,
    infer,
    load_model,
    save_model,
)
from rbs.pod import PodBasis, compute_svd, select_rank
from rbs.server import create_app
from rbs.svr import SvrHyperparams, SvrModel, gaussian_kernel, train_svr
from rbs.tuner import Dimension, SearchSpace, optimize

from .oracles import (
    dual_objective,
    kkt_max_violation,
    lattice_best_dual,
    loop_rel_ame,
    loop_rel_rmse,
)


def _gate(description: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {description}: {detail}", flush=True)
    assert ok, f"{description}: {detail}"


def _validation_columns(model, runs):
    X, xin = build_snapshot_matrix(runs)
    cols = run_columns(np.array(model.metadata["val_runs"]), X.n_steps)
    return X.data[:, cols], xin.data[:, cols].T


def test_error_bound_holds_on_twenty_models():
    t0 = time.monotonic()
    total_violations = 0
    worst_ratio = 0.0
    for i in range(20):
        cfg = SyntheticConfig(grid_side=4 if i % 2 == 0 else 8,
                              n_steps=10, n_runs=20, seed=1000 + i)
        runs = generate_synthetic(cfg)
        model = fit(runs, FitConfig(n_trials=6, svr_max_iter=60_000,
                                    split_seed=i, tuner_seed=i))
        X_val, rows_val = _validation_columns(model, runs)
        report = verify_bound(model, rows_val, model.basis.project(X_val))
        total_violations += len(report.violations)
        worst_ratio = max(worst_ratio, report.max_ratio)
    elapsed = time.monotonic() - t0
    _gate("per-cell error bound holds on 20 fitted models",
          total_violations == 0 and elapsed < 300.0,
          f"violations={total_violations}, worst lhs/rhs ratio "
          f"{worst_ratio:.6f}, {elapsed:.1f}s (< 300s)")


def test_bound_constant_identity_on_ten_thousand_draws():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(10_000):
        n, r = int(rng.integers(1, 16)), int(rng.integers(1, 8))
        basis = SimpleNamespace(modes=rng.normal(size=(n, r)))
        std = SimpleNamespace(coeff_stds=rng.uniform(0.1, 3.0, size=r))
        diff = np.abs(compute_Kp(basis, std, method="cross")
                      - compute_Kp(basis, std, method="sum")).max()
        worst = max(worst, float(diff))
    _gate("cross-term and absolute-sum bound constants agree",
          worst <= 1e-12, f"max |difference| {worst:.3e} over 10000 draws "
          "(<= 1e-12)")


def test_rank_recovery_on_reference_dataset():
    runs = generate_synthetic(SyntheticConfig(seed=42))
    X, _ = build_snapshot_matrix(runs)
    _, s, _ = compute_svd(X.data)
    ratio = float(s[2] / s[0])
    rank = select_rank(s, 0.98)
    _gate("reference dataset recovers exact rank 2",
          ratio <= 1e-8 and rank == 2,
          f"sigma3/sigma1 {ratio:.3e} (<= 1e-8), selected rank {rank}")


def test_single_query_latency_at_hundred_thousand_cells():
    rng = np.random.default_rng(7)
    n, r, d_lambda = 100_000, 10, 3
    modes = np.ascontiguousarray(np.linalg.qr(rng.normal(size=(n, r)))[0])
    basis = PodBasis(modes, np.linspace(100.0, 1.0, r), r, 0.98)
    std = Standardizer(np.zeros(r), np.ones(r),
                       np.zeros(d_lambda + 1), np.ones(d_lambda + 1))
    svrs = tuple(
        SvrModel(SvrHyperparams(0.05, 10.0, 1.0),
                 rng.normal(size=(40, d_lambda + 1)),
                 0.1 * rng.normal(size=40), bias=float(rng.normal()))
        for _ in range(r))
    model = SurrogateModel(
        basis=basis, standardizer=std, svrs=svrs,
        bound_constants=compute_Kp(basis, std),
        e=0.1, e_k=(0.1,) * r,
        metadata={"input_ranges": [[0.0, 1.0]] * (d_lambda + 1)})
    stats = bench_latency(model, 100, rng=rng)
    mean_ms = stats["mean_us"] / 1000.0
    _gate("mean single-query latency at n=100000, r=10",
          mean_ms <= 100.0,
          f"mean {mean_ms:.3f} ms over 100 queries (<= 100 ms), "
          f"p99 {stats['p99_us'] / 1000.0:.3f} ms")


def test_smo_matches_brute_force_lattice():
    rng = np.random.default_rng(0)
    worst_gap = 0.0
    worst_kkt = 0.0
    for _ in range(25):
        m = int(rng.integers(4, 8))
        d = int(rng.integers(1, 3))
        X = rng.uniform(-2.0, 2.0, size=(m, d))
        y = rng.normal(size=m)
        eps = float(rng.uniform(0.02, 0.3))
        c_reg = float(rng.uniform(0.3, 3.0))
        sigma = float(rng.uniform(0.5, 2.0))
        model = train_svr(X, y, SvrHyperparams(eps, c_reg, sigma), tol=1e-6)
        beta = np.zeros(m)
        beta[model.support_indices] = model.dual_coefs
        K = gaussian_kernel(X, X, sigma)
        w_solver = dual_objective(K, y, beta, eps)
        _, w_lattice = lattice_best_dual(K, y, eps, c_reg)
        worst_gap = max(worst_gap, abs(w_solver - w_lattice))
        worst_kkt = max(worst_kkt, kkt_max_violation(model, X, y))
    _gate("dual solver matches lattice enumeration on 25 sets",
          worst_gap <= 1e-4 and worst_kkt <= 1e-3,
          f"max objective gap {worst_gap:.3e} (<= 1e-4), "
          f"max KKT violation {worst_kkt:.3e} (<= 1e-3)")


def test_snapshot_svd_matches_dense_oracle():
    rng = np.random.default_rng(2)
    worst_sigma = 0.0
    worst_residual = 0.0
    for _ in range(50):
        m = int(rng.integers(2, 51))
        n = int(rng.integers(m, 201))
        X = rng.normal(size=(n, m))
        U, s, Vt = compute_svd(X, method="gram")
        s_ref = np.linalg.svd(X, compute_uv=False)
        worst_sigma = max(worst_sigma,
                          float(np.abs(s - s_ref).max() / s_ref[0]))
        recon = (U * s[: U.shape[1]]) @ Vt
        worst_residual = max(worst_residual,
                             float(np.linalg.norm(X - recon)
                                   / np.linalg.norm(X)))
    _gate("snapshot-method SVD matches dense decomposition on 50 matrices",
          worst_sigma <= 1e-8 and worst_residual <= 1e-9,
          f"max sigma error {worst_sigma:.3e} (<= 1e-8), "
          f"max residual {worst_residual:.3e} (<= 1e-9)")


def test_tuner_beats_random_search():
    space = SearchSpace((Dimension("x", 1e-4, 1.0),))

    def objective(p):
        return (math.log10(p[0]) + 2.0) ** 2

    wins = 0
    for seed in range(10):
        _, best, _ = optimize(objective, space, 60, seed)
        rng = np.random.default_rng(seed)
        draws = np.exp(rng.uniform(math.log(1e-4), 0.0, size=60))
        random_best = min(objective([x]) for x in draws)
        wins += int(best.objective < random_best)
    _gate("guided search beats random search on the 1-D benchmark",
          wins >= 8, f"{wins}/10 paired seeds with 60-trial budgets (>= 8)")


def test_metrics_match_triple_loop_oracles():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        n_runs = int(rng.integers(1, 6))
        n_steps = int(rng.integers(1, 8))
        n = int(rng.integers(1, 30))
        ref = rng.normal(size=(n, n_runs * n_steps))
        pred = ref + 0.1 * rng.normal(size=ref.shape)
        grouping = (n_runs, n_steps)
        worst = max(
            worst,
            abs(rel_rmse(pred, ref, grouping)
                - loop_rel_rmse(pred, ref, n_runs, n_steps)),
            abs(rel_ame(pred, ref, grouping)
                - loop_rel_ame(pred, ref, n_runs, n_steps)))
    _gate("vectorized metrics equal triple-loop oracles",
          worst <= 1e-12, f"max |difference| {worst:.3e} over 100 instances "
          "(<= 1e-12)")


def test_determinism_and_round_trips(tmp_path):
    runs = generate_synthetic(
        SyntheticConfig(grid_side=4, n_steps=6, n_runs=8, seed=7))
    cfg = FitConfig(n_trials=4, svr_max_iter=50_000, tuner_seed=3)
    first = fit(runs, cfg)
    path_a, path_b = tmp_path / "a.rbsm", tmp_path / "b.rbsm"
    save_model(first, path_a)
    save_model(fit(runs, cfg), path_b)
    files_identical = path_a.read_bytes() == path_b.read_bytes()

    loaded = load_model(path_a)
    rng = np.random.default_rng(11)
    queries = np.column_stack([rng.uniform(0.0, 1.0, 100),
                               rng.uniform(0.5, 2.0, 100),
                               rng.uniform(0.05, 0.5, 100),
                               rng.uniform(0.1, 1.0, 100)])
    reload_exact = all(
        np.array_equal(infer(loaded, q[0], q[1:]), infer(first, q[0], q[1:]))
        for q in queries)

    client = TestClient(create_app(loaded))
    out = tmp_path / "field.f64"
    cli_matches_server = True
    for q in queries:
        lam = [float(v) for v in q[1:]]
        code = cli_main(["infer", str(path_a), "--t", repr(float(q[0])),
                         "--lambda", ",".join(repr(v) for v in lam),
                         "--binary", "-o", str(out)])
        resp = client.post("/infer", json={"t": float(q[0]), "lambda": lam},
                           headers={"Accept": "application/octet-stream"})
        if code != 0 or out.read_bytes() != resp.content:
            cli_matches_server = False
            break
    _gate("fits, files, and transports are deterministic",
          files_identical and reload_exact and cli_matches_server,
          f"repeat fits byte-identical={files_identical}, "
          f"reload inference bit-identical over 100 queries={reload_exact}, "
          f"CLI == HTTP bytes over 100 queries={cli_matches_server}")


def test_validation_accuracy_within_five_percent():
    runs = generate_synthetic(SyntheticConfig(seed=42))
    t0 = time.monotonic()
    model = fit(runs, FitConfig())
    elapsed = time.monotonic() - t0
    X_val, rows_val = _validation_columns(model, runs)
    pred = np.column_stack([infer(model, row[0], row[1:])
                            for row in rows_val])
    n_val = len(model.metadata["val_runs"])
    rooted = math.sqrt(rel_rmse(pred, X_val,
                                (n_val, model.metadata["n_steps"])))
    _gate("held-out field error within 5 percent at default budget",
          rooted <= 0.05 and elapsed < 600.0,
          f"rooted relative RMSE {rooted:.4f} (<= 0.05) on {n_val} held-out "
          f"runs, fit took {elapsed:.1f}s (< 600s)")
