import json
from types import SimpleNamespace

import numpy as np
import pytest

from rbs.dataset import build_snapshot_matrix, run_columns
from rbs.errors import DimensionMismatchError, UndefinedMetricError
from rbs.evaluate import (
    BoundReport,
    compute_Kp,
    make_report,
    rel_ame,
    rel_rmse,
    verify_bound,
)
from rbs.pod import PodBasis
from rbs.pipeline import Standardizer
from rbs.svr import SvrHyperparams, SvrModel

from .oracles import loop_kp, loop_rel_ame, loop_rel_rmse


class TestRelativeMetrics:
    def test_perfect_prediction_is_zero(self, rng):
        ref = rng.normal(size=(5, 6))
        assert rel_rmse(ref, ref, (2, 3)) == 0.0
        assert rel_ame(ref, ref, (2, 3)) == 0.0

    def test_hand_example_rmse(self):
        ref = np.array([[3.0, 0.0], [4.0, 1.0]])
        pred = np.array([[3.0, 1.0], [4.0, 3.0]])
        # squared errors per column: 0, 1+4=5 -> mean 2.5
        # squared refs per column: 25, 1 -> mean 13
        assert rel_rmse(pred, ref, (2, 1)) == pytest.approx(2.5 / 13.0,
                                                            abs=1e-15)

    def test_hand_example_ame(self):
        ref = np.array([[3.0, 0.0], [4.0, 1.0]])
        pred = np.array([[3.0, 1.0], [4.0, 3.0]])
        # absolute errors per column: 0, 3 -> mean 1.5; refs: 7, 1 -> mean 4
        assert rel_ame(pred, ref, (2, 1)) == pytest.approx(1.5 / 4.0,
                                                           abs=1e-15)

    def test_matches_triple_loop_oracle(self, rng):
        n_runs, n_steps, n = 3, 4, 7
        ref = rng.normal(size=(n, n_runs * n_steps))
        pred = ref + 0.1 * rng.normal(size=ref.shape)
        assert rel_rmse(pred, ref, (n_runs, n_steps)) == pytest.approx(
            loop_rel_rmse(pred, ref, n_runs, n_steps), rel=1e-12)
        assert rel_ame(pred, ref, (n_runs, n_steps)) == pytest.approx(
            loop_rel_ame(pred, ref, n_runs, n_steps), rel=1e-12)

    def test_zero_reference_rejected(self):
        with pytest.raises(UndefinedMetricError):
            rel_rmse(np.ones((2, 2)), np.zeros((2, 2)), (1, 2))
        with pytest.raises(UndefinedMetricError):
            rel_ame(np.ones((2, 2)), np.zeros((2, 2)), (1, 2))

    def test_shape_and_grouping_mismatch_rejected(self):
        with pytest.raises(DimensionMismatchError):
            rel_rmse(np.ones((2, 3)), np.ones((2, 2)), (1, 2))
        with pytest.raises(DimensionMismatchError):
            rel_rmse(np.ones((2, 4)), np.ones((2, 4)), (1, 3))


def _kp_inputs(modes, stds):
    basis = SimpleNamespace(modes=np.asarray(modes, dtype=np.float64))
    std = SimpleNamespace(coeff_stds=np.asarray(stds, dtype=np.float64))
    return basis, std


class TestBoundConstants:
    def test_rank_one_absolute_value(self):
        basis, std = _kp_inputs([[2.0], [-3.0]], [4.0])
        np.testing.assert_allclose(compute_Kp(basis, std), [8.0, 12.0],
                                   atol=0.0)

    def test_three_four_five_square(self):
        # weights 3 and 4: A = 9 + 16 = 25, cross term B = 12,
        # sqrt(25 + 24) = 7 = 3 + 4: the quadratic form is a perfect square
        basis, std = _kp_inputs([[3.0, -4.0]], [1.0, 1.0])
        assert compute_Kp(basis, std)[0] == pytest.approx(7.0, abs=1e-12)
        assert compute_Kp(basis, std, method="sum")[0] == 7.0

    def test_cross_equals_sum_randomized(self, rng):
        for _ in range(5):
            n, r = int(rng.integers(2, 40)), int(rng.integers(1, 8))
            basis, std = _kp_inputs(rng.normal(size=(n, r)),
                                    np.abs(rng.normal(size=r)) + 0.1)
            cross = compute_Kp(basis, std, method="cross")
            direct = compute_Kp(basis, std, method="sum")
            np.testing.assert_allclose(cross, direct, rtol=1e-12, atol=1e-12)

    def test_matches_loop_oracle(self, rng):
        modes = rng.normal(size=(6, 3))
        stds = np.array([0.5, 2.0, 1.3])
        basis, std = _kp_inputs(modes, stds)
        np.testing.assert_allclose(compute_Kp(basis, std),
                                   loop_kp(modes, stds), rtol=1e-12)

    def test_rank_mismatch_rejected(self):
        basis, std = _kp_inputs(np.ones((3, 2)), np.ones(3))
        with pytest.raises(DimensionMismatchError):
            compute_Kp(basis, std)

    def test_unknown_method_rejected(self):
        basis, std = _kp_inputs(np.ones((2, 1)), np.ones(1))
        with pytest.raises(ValueError):
            compute_Kp(basis, std, method="exact")


def _tiny_model(bound_constants=None):
    """Rank-1, one-cell model whose regressor always predicts 0."""
    basis = PodBasis(np.array([[2.0]]), np.array([1.0]), 1, 1.0)
    std = Standardizer(np.array([0.0]), np.array([1.5]),
                       np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    svr = SvrModel(SvrHyperparams(0.1, 1.0, 1.0),
                   np.zeros((0, 2)), np.zeros(0), bias=0.0)
    kp = compute_Kp(basis, std) if bound_constants is None else bound_constants
    return SimpleNamespace(basis=basis, standardizer=std, svrs=[svr],
                           bound_constants=kp)


class TestVerifyBound:
    def test_rank_one_bound_is_tight(self):
        # with r = 1 the bound collapses to an identity, so the measured
        # ratio must sit at exactly 1 whenever the residual is nonzero
        model = _tiny_model()
        inputs = np.array([[0.0, 1.0], [0.5, 1.0], [1.0, 1.0]])
        C_val = np.array([[1.0, -2.0, 3.0]])
        report = verify_bound(model, inputs, C_val)
        assert report.violations == ()
        assert report.max_ratio == pytest.approx(1.0, rel=1e-12)
        assert report.e == max(report.e_k)

    def test_halved_constants_violate(self):
        good = _tiny_model()
        bad = _tiny_model(bound_constants=good.bound_constants / 2.0)
        inputs = np.array([[0.0, 1.0], [1.0, 1.0]])
        C_val = np.array([[1.0, -1.0]])
        report = verify_bound(bad, inputs, C_val)
        assert report.violations == (0,)
        assert report.max_ratio == pytest.approx(2.0, rel=1e-12)

    def test_fitted_model_has_no_violations(self, small_model, small_runs):
        X, x = build_snapshot_matrix(small_runs)
        cols = run_columns(np.array(small_model.metadata["val_runs"]),
                           X.n_steps)
        C_val = small_model.basis.project(X.data[:, cols])
        report = verify_bound(small_model, x.data[:, cols].T, C_val)
        assert report.violations == ()
        assert report.max_ratio <= 1.0 + 1e-9
        rec = json.loads(report.to_json())
        assert rec["n_cells"] == small_model.n
        assert rec["violations"] == []

    def test_shape_errors(self):
        model = _tiny_model()
        with pytest.raises(DimensionMismatchError):
            verify_bound(model, np.zeros((2, 2)), np.zeros((2, 2)))  # r != 2
        with pytest.raises(DimensionMismatchError):
            verify_bound(model, np.zeros((0, 2)), np.zeros((1, 0)))

    def test_report_is_dataclass_with_tol(self):
        r = BoundReport(np.zeros(1), np.ones(1), 0.0, (0.0,), (), 0.0)
        assert r.tol == 1e-9


class TestMakeReport:
    def test_structure_and_consistency(self, rng):
        n_runs, n_steps, n = 2, 3, 5
        raw = rng.normal(size=(n, n_runs * n_steps))
        projected = raw + 0.01 * rng.normal(size=raw.shape)
        pred = projected + 0.01 * rng.normal(size=raw.shape)
        rep = make_report(pred, raw, projected, (n_runs, n_steps),
                          run_indices=[4, 1])
        assert rep.delta_rmse == rel_rmse(pred, raw, (n_runs, n_steps))
        assert rep.delta_rmse_sqrt == pytest.approx(np.sqrt(rep.delta_rmse))
        assert rep.proj_delta_rmse == rel_rmse(pred, projected,
                                               (n_runs, n_steps))
        assert [p["run"] for p in rep.per_run] == [4, 1]
        first = rep.per_run[0]
        assert first["delta_rmse"] == rel_rmse(pred[:, :3], raw[:, :3], (1, 3))
        d = json.loads(rep.to_json())
        assert set(d) == {"raw", "projected", "per_run"}
        assert set(d["raw"]) == {"delta_rmse", "delta_rmse_sqrt", "delta_ame"}
