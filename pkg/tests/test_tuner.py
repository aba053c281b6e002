import json
import math

import numpy as np
import pytest

from rbs.errors import ConvergenceError, DimensionMismatchError, TuningFailedError
from rbs.svr import SvrHyperparams, train_svr, validation_rmse
from rbs.tuner import (
    DEFAULT_RANGES,
    Dimension,
    SearchSpace,
    Trial,
    default_space,
    history_to_jsonl,
    objective_worst_error,
    optimize,
    tpe_suggest,
    tune,
)

SPACE_1D = SearchSpace((Dimension("x", 1e-4, 1.0),))
SPACE_2D = SearchSpace((Dimension("x", 1e-4, 1.0), Dimension("y", 1e-2, 1e2)))


def quadratic(p):
    # minimum at x = 1e-2, objective 0
    return (math.log10(p[0]) + 2.0) ** 2


class TestSpace:
    def test_dimension_validation(self):
        for lo, hi in ((0.0, 1.0), (-1.0, 1.0), (2.0, 1.0), (1.0, 1.0),
                       (1.0, np.inf)):
            with pytest.raises(ValueError):
                Dimension("x", lo, hi)

    def test_contains(self):
        assert SPACE_2D.contains(np.array([0.5, 1.0]))
        assert SPACE_2D.contains(np.array([1e-4, 1e2]))  # boundary included
        assert not SPACE_2D.contains(np.array([0.5, 200.0]))
        assert not SPACE_2D.contains(np.array([0.5]))

    def test_default_space_names(self):
        sp = default_space(2)
        assert sp.names == ("epsilon_1", "c_reg_1", "sigma_1",
                            "epsilon_2", "c_reg_2", "sigma_2")
        assert sp.dimensions[1].low == DEFAULT_RANGES["c_reg"][0]
        assert sp.dimensions[1].high == DEFAULT_RANGES["c_reg"][1]
        with pytest.raises(ValueError):
            default_space(0)


class TestSuggest:
    def test_empty_history_stays_in_box(self, rng):
        for _ in range(50):
            p = tpe_suggest([], SPACE_2D, rng)
            assert SPACE_2D.contains(p)

    def test_rich_history_stays_in_box(self, rng):
        history = []
        for i in range(30):
            p = np.exp(rng.uniform(np.log([1e-4, 1e-2]), np.log([1.0, 1e2])))
            history.append(Trial(i, p, quadratic(p), (quadratic(p),),
                                 "completed"))
        for _ in range(50):
            p = tpe_suggest(history, SPACE_2D, rng)
            assert SPACE_2D.contains(p)

    def test_identical_objectives_degenerate_split(self, rng):
        p0 = np.array([0.3, 1.0])
        history = [Trial(i, p0, 1.0, (1.0,), "completed") for i in range(12)]
        p = tpe_suggest(history, SPACE_2D, rng)
        assert SPACE_2D.contains(p)

    def test_failed_trials_excluded(self, rng):
        history = [Trial(i, np.array([1e-4, 1e-2]), None, None, "failed",
                         "boom") for i in range(40)]
        # all failed: still below startup count, so random fallback
        p = tpe_suggest(history, SPACE_2D, rng)
        assert SPACE_2D.contains(p)

    def test_zero_startup_empty_history(self, rng):
        p = tpe_suggest([], SPACE_2D, rng, n_startup=0)
        assert SPACE_2D.contains(p)


class TestOptimize:
    def test_single_trial(self):
        best_p, best, history = optimize(quadratic, SPACE_1D, 1, seed=0)
        assert len(history) == 1
        assert best is history[0]
        assert best.objective == quadratic(best_p)

    def test_deterministic_under_seed(self):
        a = optimize(quadratic, SPACE_1D, 15, seed=11)
        b = optimize(quadratic, SPACE_1D, 15, seed=11)
        for ta, tb in zip(a[2], b[2], strict=True):
            np.testing.assert_array_equal(ta.params, tb.params)
            assert ta.objective == tb.objective
        np.testing.assert_array_equal(a[0], b[0])

    def test_best_is_minimum_of_completed(self):
        best_p, best, history = optimize(quadratic, SPACE_1D, 20, seed=3)
        completed = [t for t in history if t.status == "completed"]
        assert len(completed) == 20
        assert best.objective == min(t.objective for t in completed)
        assert best.objective == quadratic(best_p)

    def test_startup_block_is_stratified(self):
        _, _, history = optimize(quadratic, SPACE_2D, 10, seed=7)
        P = np.array([t.params for t in history])
        for d, dim in enumerate(SPACE_2D.dimensions):
            lo, hi = math.log(dim.low), math.log(dim.high)
            frac = (np.log(P[:, d]) - lo) / (hi - lo) * 10.0
            strata = sorted(int(np.floor(f + 1e-9)) for f in frac)
            assert strata == list(range(10))

    def test_failures_recorded_not_fatal(self):
        def sometimes(p):
            if p[0] > 1e-2:
                raise ConvergenceError("upper half rejected")
            return quadratic(p)

        best_p, best, history = optimize(sometimes, SPACE_1D, 20, seed=1)
        failed = [t for t in history if t.status == "failed"]
        assert failed and all(t.objective is None for t in failed)
        assert all("upper half" in t.message for t in failed)
        assert best_p[0] <= 1e-2
        assert len(history) == 20

    def test_nonfinite_objective_becomes_failed_trial(self):
        def bad(p):
            return math.inf

        with pytest.raises(TuningFailedError):
            optimize(bad, SPACE_1D, 3, seed=0)
        calls = []

        def flaky(p):
            calls.append(0)
            return math.nan if len(calls) % 2 else quadratic(p)

        _, _, history = optimize(flaky, SPACE_1D, 6, seed=0)
        msgs = [t.message for t in history if t.status == "failed"]
        assert msgs and all("non-finite" in m for m in msgs)

    def test_all_failed_raises(self):
        def boom(p):
            raise ConvergenceError("no luck")

        with pytest.raises(TuningFailedError, match="no luck"):
            optimize(boom, SPACE_1D, 4, seed=0)

    def test_zero_startup_supported(self):
        _, best, history = optimize(quadratic, SPACE_1D, 5, seed=2, n_startup=0)
        assert len(history) == 5 and best.status == "completed"

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            optimize(quadratic, SPACE_1D, 0, seed=0)


@pytest.fixture(scope="module")
def toy_coeff_data():
    rng = np.random.default_rng(9)
    X_tr = rng.normal(size=(10, 3))
    C_tr = rng.normal(size=(2, 10))
    X_va = rng.normal(size=(5, 3))
    C_va = rng.normal(size=(2, 5))
    return (X_tr, C_tr), (X_va, C_va)


class TestObjectiveWorstError:
    def test_matches_per_mode_recomputation(self, toy_coeff_data):
        train, val = toy_coeff_data
        params = np.array([0.1, 5.0, 1.0, 0.2, 2.0, 0.8])
        obj, e_k = objective_worst_error(train, val, params)
        assert obj == max(e_k)
        assert len(e_k) == 2
        for k in range(2):
            eps, c_reg, sigma = params[3 * k: 3 * k + 3]
            model = train_svr(train[0], train[1][k],
                              SvrHyperparams(eps, c_reg, sigma))
            assert e_k[k] == validation_rmse(model, val[0], val[1][k])

    def test_wrong_param_count_rejected(self, toy_coeff_data):
        train, val = toy_coeff_data
        with pytest.raises(DimensionMismatchError):
            objective_worst_error(train, val, np.ones(5))

    def test_nonconvergence_names_the_mode(self, toy_coeff_data):
        train, val = toy_coeff_data
        params = np.array([1e-4, 1e4, 0.1, 0.2, 2.0, 0.8])
        with pytest.raises(ConvergenceError, match="mode 1:"):
            objective_worst_error(train, val, params, max_iter=1)


class TestTune:
    def test_joint_history_and_names(self, toy_coeff_data):
        train, val = toy_coeff_data
        best_p, best, history = tune(train, val, n_trials=6, seed=0,
                                     max_iter=50_000)
        assert len(history) == 6
        assert best_p.shape == (6,)
        assert best.names == default_space(2).names
        assert best.objective == min(
            t.objective for t in history if t.status == "completed")

    def test_independent_history_layout(self, toy_coeff_data):
        train, val = toy_coeff_data
        n = 4
        best_p, best, history = tune(train, val, n_trials=n, seed=0,
                                     independent=True, max_iter=50_000)
        assert len(history) == 2 * n + 1
        assert history[0].names == ("epsilon_1", "c_reg_1", "sigma_1")
        assert history[n].names == ("epsilon_2", "c_reg_2", "sigma_2")
        final = history[-1]
        assert final is best
        assert final.number == 2 * n
        assert final.status == "completed"
        assert final.names == default_space(2).names
        np.testing.assert_array_equal(final.params, best_p)
        assert final.objective == max(final.per_mode_errors)

    def test_independent_per_mode_optimality(self, toy_coeff_data):
        # each mode's entry in the combined evaluation must equal the best
        # objective its own sub-search found: modes do not interact
        train, val = toy_coeff_data
        n = 5
        _, best, history = tune(train, val, n_trials=n, seed=1,
                                independent=True, max_iter=50_000)
        for k in range(2):
            sub = [t for t in history[k * n:(k + 1) * n]
                   if t.status == "completed"]
            assert best.per_mode_errors[k] == min(t.objective for t in sub)

    def test_independent_deterministic(self, toy_coeff_data):
        train, val = toy_coeff_data
        a = tune(train, val, n_trials=3, seed=4, independent=True,
                 max_iter=50_000)
        b = tune(train, val, n_trials=3, seed=4, independent=True,
                 max_iter=50_000)
        np.testing.assert_array_equal(a[0], b[0])
        assert a[1].objective == b[1].objective


class TestHistoryJsonl:
    def test_round_trip(self):
        _, _, history = optimize(quadratic, SPACE_2D, 12, seed=5)
        text = history_to_jsonl(history)
        assert text.endswith("\n")
        lines = text.strip().split("\n")
        assert len(lines) == 12
        for line, trial in zip(lines, history, strict=True):
            rec = json.loads(line)
            assert rec["index"] == trial.number
            assert rec["status"] == trial.status
            assert rec["params"] == {"x": trial.params[0], "y": trial.params[1]}
            assert rec["objective"] == trial.objective
            assert rec["per_mode_errors"] == list(trial.per_mode_errors)

    def test_failed_trials_serialize_null(self):
        t = Trial(0, np.array([0.5]), None, None, "failed", "boom", ("x",))
        rec = json.loads(history_to_jsonl([t]).strip())
        assert rec["objective"] is None
        assert rec["per_mode_errors"] is None

    def test_fallback_names(self):
        t = Trial(0, np.array([0.5, 2.0]), 1.0, (1.0,), "completed")
        rec = json.loads(history_to_jsonl([t]).strip())
        assert set(rec["params"]) == {"x0", "x1"}
        rec2 = json.loads(history_to_jsonl([t], space=SPACE_2D).strip())
        assert set(rec2["params"]) == {"x", "y"}
