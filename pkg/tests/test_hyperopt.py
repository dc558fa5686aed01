import importlib
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import simulate_arma
from dspforecast import hyperopt
from dspforecast.errors import SearchFailedError
from dspforecast.hyperopt import (Budget, Choice, IntRange, LogUniform, MedianPruner,
                                  NeuralSettings, SearchSpace, default_space, search_classical,
                                  search_neural)

FAST = NeuralSettings(batch_size=32, max_epochs=6, early_stop_patience=2, checkpoints=(2, 4))


def tiny_space(arch):
    return SearchSpace(arch, {"num_layers": IntRange(1, 2), "width": Choice((2, 4)),
                              "learning_rate": LogUniform(1e-3, 3e-2),
                              "dropout_rate": Choice((0.0, 0.1)),
                              "input_periods": Choice((1, 2))})


@pytest.fixture(scope="module")
def sinusoid():
    t = np.arange(24 * 12)
    y = 100 + 15 * np.sin(2 * np.pi * t / 24) + np.random.default_rng(0).normal(0, 1, t.size)
    return y[:173], y[173:230]


# spaces

def test_dimension_validation():
    with pytest.raises(ValueError):
        IntRange(3, 2)
    with pytest.raises(ValueError):
        LogUniform(0.0, 1.0)
    with pytest.raises(ValueError):
        Choice(())
    with pytest.raises(ValueError):
        SearchSpace("x", {})
    with pytest.raises(TypeError):
        LogUniform(1e-3, 1e-2).values()
    with pytest.raises(ValueError):
        Budget(max_trials=None, max_wall_clock=None)


@given(st.floats(1e-6, 1.0), st.floats(1.0, 100.0), st.integers(0, 1000))
def test_log_uniform_stays_in_bounds(low, factor, seed):
    dim = LogUniform(low, low * factor)
    v = dim.sample(np.random.default_rng(seed))
    assert low * (1 - 1e-12) <= v <= low * factor * (1 + 1e-12)


def test_sarima_grid_has_all_d_D_pairs():
    grid = list(default_space("sarima", 24).grid())
    assert {(c["d"], c["D"]) for c in grid} == {(0, 0), (0, 1), (1, 0), (1, 1)}
    assert len(grid) == 6 * 2 * 6 * 3 * 2 * 3
    assert {c["m"] for c in grid} == {24}


def test_default_spaces():
    assert len(list(default_space("arima").grid())) == 72
    assert len(list(default_space("ses").grid())) == 50
    assert default_space("gru").dims["width"].options == (16, 32, 64, 128)
    with pytest.raises(ValueError):
        default_space("tes")
    with pytest.raises(ValueError):
        default_space("prophet")


# classical search

def test_single_point_space_returns_that_order():
    y = simulate_arma(400, ar=[0.5], seed=1)
    space = SearchSpace("arima", {"p": Choice((2,)), "d": Choice((1,)), "q": Choice((1,))})
    state = search_classical("arima", y, space)
    assert (state.order.base.p, state.order.base.d, state.order.base.q) == (2, 1, 1)


def test_classical_search_is_deterministic_and_minimal():
    y = simulate_arma(300, ar=[0.6], ma=[0.3], seed=2)
    space = SearchSpace("arima", {"p": IntRange(0, 2), "d": Choice((0, 1)), "q": IntRange(0, 2)})
    trace = []
    a = search_classical("arima", y, space, trace=trace)
    b = search_classical("arima", y, space)
    assert a.aic == b.aic and a.order == b.order
    completed = [t.objective for t in trace if t.status == "completed"]
    assert len(trace) == 18
    assert a.aic == min(completed)


def test_aic_ties_prefer_smaller_orders(monkeypatch):
    y = simulate_arma(200, seed=3)
    real = hyperopt._arima.fit_sarima

    def flat_aic(train, order, n_cond=None):
        state = real(train, order, n_cond=n_cond)
        object.__setattr__(state, "aic", 1.0)
        return state

    monkeypatch.setattr(hyperopt._arima, "fit_sarima", flat_aic)
    space = SearchSpace("arima", {"p": IntRange(0, 1), "d": Choice((1, 0)), "q": IntRange(0, 1)})
    state = search_classical("arima", y, space)
    assert state.order.label() == "(0,0,0)"


def test_all_failed_raises():
    space = SearchSpace("arima", {"p": Choice((5,)), "d": Choice((1,)), "q": Choice((5,))})
    with pytest.raises(SearchFailedError):
        search_classical("arima", np.arange(15.0), space)


def test_ses_and_tes_search():
    y = 10 + np.sin(np.arange(96) * 2 * np.pi / 12)
    assert search_classical("ses", y).alpha in default_space("ses").dims["alpha"].options
    state = search_classical("tes", y, period=12)
    assert state.period == 12


@pytest.fixture(scope="module")
def ar1_selected_orders():
    orders = []
    for seed in range(20):
        y = simulate_arma(2000, ar=[0.8], seed=seed)
        o = search_classical("arima", y).order.base
        orders.append((o.p, o.d, o.q))
    return orders


@pytest.mark.slow
def test_ar1_selects_autoregressive_terms(ar1_selected_orders):
    hits = sum(p >= 1 for p, _, _ in ar1_selected_orders)
    assert hits >= 16, ar1_selected_orders


@pytest.mark.slow
def test_aic_order_recovery_rate(ar1_selected_orders):
    # statistical sanity check; see the README on AIC over a wide grid
    hits = sum(o == (1, 0, 0) for o in ar1_selected_orders)
    assert hits >= 12, f"true order recovered in {hits}/20 simulations: {ar1_selected_orders}"


# pruning

def test_median_pruner():
    pruner = MedianPruner({5: [1.0, 3.0]}, checkpoints=(5, 10), min_completed=2)
    assert not pruner(4, 100.0)
    assert not pruner(5, 2.0)
    assert pruner(5, 2.5)
    assert not pruner(10, 100.0)  # no completed trials at this checkpoint yet
    assert pruner.seen == {5: 2.5, 10: 100.0}


def test_pruner_warm_up():
    assert not MedianPruner({5: [1.0]}, min_completed=2)(5, 50.0)
    assert MedianPruner({5: [1.0]}, min_completed=1)(5, 50.0)


# neural search

def test_single_trial_budget(sinusoid):
    train, val = sinusoid
    result = search_neural("cnn", train, val, 4, 24, space=tiny_space("cnn"),
                           budget=Budget(max_trials=1), settings=FAST)
    assert len(result.trials) == 1
    assert result.best_trial.trial_id == 0
    assert result.model.val_smape == result.trials[0].objective


def test_failed_trial_does_not_stop_search(sinusoid, monkeypatch):
    from dspforecast.errors import TrainingDivergedError
    train_mod = importlib.import_module("dspforecast.neural.train")
    real = train_mod.fit_model
    calls = []

    def flaky(*args, **kwargs):
        calls.append(1)
        if len(calls) == 1:
            raise TrainingDivergedError("non-finite training loss", {"epoch": 1})
        return real(*args, **kwargs)

    monkeypatch.setattr(train_mod, "fit_model", flaky)
    train, val = sinusoid
    result = search_neural("gru", train, val, 2, 24, space=tiny_space("gru"),
                           budget=Budget(max_trials=3), settings=FAST)
    assert [t.status for t in result.trials][0] == "failed"
    assert "TrainingDivergedError" in result.trials[0].message
    assert result.best_trial.trial_id in (1, 2)


def test_no_completed_trial_raises(sinusoid, monkeypatch):
    train_mod = importlib.import_module("dspforecast.neural.train")

    def broken(*args, **kwargs):
        raise FloatingPointError("boom")

    monkeypatch.setattr(train_mod, "fit_model", broken)
    train, val = sinusoid
    with pytest.raises(SearchFailedError):
        search_neural("gru", train, val, 2, 24, space=tiny_space("gru"),
                      budget=Budget(max_trials=2), settings=FAST)


@pytest.fixture(scope="module")
def ten_trials(sinusoid, tmp_path_factory):
    train, val = sinusoid
    trace = tmp_path_factory.mktemp("trace") / "trials.jsonl"
    settings = NeuralSettings(batch_size=32, max_epochs=6, early_stop_patience=2,
                              checkpoints=(2, 4), min_completed_for_pruning=1)
    result = search_neural("cnn", train, val, 4, 24, space=tiny_space("cnn"),
                           budget=Budget(max_trials=10), seed=5, settings=settings,
                           trace_path=trace)
    return result, trace, settings


def test_best_is_argmin_of_completed(ten_trials):
    result, _, _ = ten_trials
    completed = [t for t in result.trials if t.status == "completed"]
    assert completed
    assert result.model.val_smape == min(t.objective for t in completed)
    assert result.best_trial.objective <= max(t.objective for t in completed)
    assert all(np.isfinite(t.objective) for t in completed)


def test_trace_records_every_trial(ten_trials):
    result, trace, _ = ten_trials
    lines = [json.loads(x) for x in trace.read_text().splitlines()]
    assert [r["trial_id"] for r in lines] == list(range(10))
    assert {r["status"] for r in lines} <= {"completed", "pruned", "failed"}
    assert all({"config", "objective", "duration"} <= set(r) for r in lines)


def test_neural_search_is_reproducible(ten_trials, sinusoid):
    result, _, settings = ten_trials
    train, val = sinusoid
    again = search_neural("cnn", train, val, 4, 24, space=tiny_space("cnn"),
                          budget=Budget(max_trials=10), seed=5, settings=settings)
    assert [(t.config, t.status, t.objective) for t in again.trials] == \
        [(t.config, t.status, t.objective) for t in result.trials]
    for k in result.model.params:
        np.testing.assert_array_equal(again.model.params[k], result.model.params[k])


def test_input_length_restricted_to_half_training(sinusoid):
    train, val = sinusoid
    result = search_neural("cnn", train[:100], val, 4, 24, space=tiny_space("cnn"),
                           budget=Budget(max_trials=4), settings=FAST)
    assert all(t.config["input_periods"] * 24 <= 50 for t in result.trials)
