import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import simulate_arma
from dspforecast.classical import (SES, TES, Arima, ArimaOrder, LastDay, LastObservation,
                                   Sarima, SarimaOrder, filter_arima, filter_ses, filter_tes,
                                   fit_arima, fit_sarima, fit_ses, fit_tes, is_invertible,
                                   is_stationary, last_day_forecast, last_observation_forecast)
from dspforecast.classical.smoothing import TESState
from dspforecast.errors import (FitFailedError, InfeasibleOrderError, InsufficientDataError,
                                NotFittedError)
from dspforecast.metrics import smape

values = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=40)


def daily(days=10, period=24, amplitude=5.0, level=10.0):
    t = np.arange(days * period)
    return level + amplitude * np.sin(2 * np.pi * t / period)


# baselines

def test_last_observation_examples():
    assert last_observation_forecast([1, 5, 42], 3).tolist() == [42, 42, 42]
    assert last_observation_forecast([7, 7], 1).tolist() == [7]
    assert last_observation_forecast([1, 2, 3], 12).tolist() == [3] * 12
    with pytest.raises(InsufficientDataError):
        last_observation_forecast([], 1)


def test_last_day_examples():
    history = np.arange(48.0)
    assert last_day_forecast(history, 12, 24).tolist() == list(range(24, 36))
    assert last_day_forecast(np.arange(5.0), 1, 5).tolist() == [0.0]
    assert last_day_forecast(np.arange(4.0), 6, 4).tolist() == [0, 1, 2, 3, 0, 1]
    with pytest.raises(InsufficientDataError):
        last_day_forecast(np.arange(3.0), 1, 4)


@given(st.integers(2, 30), st.integers(1, 5), st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_last_day_exact_on_periodic(period, days, h, seed):
    pattern = np.random.default_rng(seed).uniform(1, 10, period)
    y = np.tile(pattern, days + 3 + h // period)
    cut = period * days + seed % period
    model = LastDay(period).fit(y[:cut])
    assert smape(y[cut:cut + h], model.predict(h)) == 0


def test_baselines_keep_only_needed_history():
    model = LastObservation().fit([1.0, 2.0]).update([3.0, 4.0])
    assert model.predict(2).tolist() == [4.0, 4.0]
    day = LastDay(3).fit([1.0, 2.0, 3.0]).update([4.0])
    assert day.predict(3).tolist() == [2.0, 3.0, 4.0]


@pytest.mark.parametrize("model", [LastObservation(), LastDay(4), SES(), TES(4), Arima((1, 0, 0))])
def test_predict_before_fit(model):
    with pytest.raises(NotFittedError):
        model.predict(1)


@pytest.mark.parametrize("h", [0, -1])
def test_bad_horizon(h):
    with pytest.raises(ValueError):
        LastObservation().fit([1.0]).predict(h)


# single exponential smoothing

def test_ses_hand_recursion():
    state = filter_ses([0.0, 1.0], 0.5)
    assert state.level == 0.5
    assert state.forecast(3).tolist() == [0.5] * 3


@given(values)
def test_ses_alpha_one_is_naive(y):
    state = filter_ses(y, 1.0)
    assert state.forecast(4).tolist() == last_observation_forecast(y, 4).tolist()


@given(st.floats(-1e3, 1e3), st.floats(0, 1), st.integers(1, 30))
def test_ses_constant_fixed_point(c, alpha, n):
    assert np.allclose(filter_ses(np.full(n, c), alpha).forecast(5), c)


def test_ses_constant_series_is_flagged():
    state = fit_ses(np.full(10, 3.0))
    assert state.degenerate and state.alpha == 0.0
    assert state.forecast(2).tolist() == [3.0, 3.0]


def test_ses_single_update():
    state = filter_ses([1.0, 4.0, 2.0], 0.3)
    assert state.update([5.0]).level == pytest.approx(0.3 * 5.0 + 0.7 * state.level, abs=1e-15)
    assert state.update([]) is state


@given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=60), st.integers(1, 3))
def test_ses_update_matches_refilter(y, k):
    k = min(k, len(y) - 3)
    state = fit_ses(y[:-k])
    alpha = state.alpha
    updated = state.update(y[-k:])
    direct = filter_ses(y, alpha) if not state.degenerate else state.update(y[-k:])
    assert updated.forecast(1)[0] == pytest.approx(direct.forecast(1)[0], abs=1e-9)


def test_ses_selects_high_alpha_on_random_walk():
    y = np.cumsum(np.random.default_rng(0).normal(size=500))
    assert fit_ses(y).alpha > 0.8


# triple exponential smoothing

def test_tes_reduces_to_ses_without_trend_and_season():
    rng = np.random.default_rng(1)
    period = 6
    y = np.r_[np.full(2 * period, 20.0), 20 + rng.normal(size=50)]
    tes = filter_tes(y, period, alpha=0.4, beta=0.0, gamma=0.0)
    ses = filter_ses(y, 0.4)
    np.testing.assert_allclose(tes.forecast(9), ses.forecast(9), atol=1e-6)


def test_tes_linear_trend_formula():
    state = TESState(0.5, 0.1, 0.0, "additive", 4, level=10.0, trend=2.0,
                     seasonal=np.zeros(4), aic=0.0, n_obs=8)
    assert state.forecast(5).tolist() == [12.0, 14.0, 16.0, 18.0, 20.0]


def test_tes_initial_states():
    y = np.r_[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]
    state = filter_tes(y, 3, 0.0, 0.0, 0.0)
    # alpha = beta = gamma = 0: states stay at their initial values
    assert state.trend == pytest.approx(1.0)
    assert state.level == pytest.approx(2.0 + 6 * 1.0)


def test_tes_periodic_forecast():
    y = daily(days=8)
    state = fit_tes(y[:-24], 24)
    forecast = state.forecast(24)
    np.testing.assert_allclose(forecast, y[-24:], rtol=1e-3)
    assert smape(y[-24:], forecast) < 0.5


def test_tes_excludes_multiplicative_for_non_positive_data():
    y = daily(days=4, level=0.0)
    assert fit_tes(y, 24, refine=False).mode == "additive"
    with pytest.raises(FitFailedError):
        filter_tes(y, 24, 0.5, 0.1, 0.1, "multiplicative")


def test_tes_needs_two_seasons():
    with pytest.raises(InsufficientDataError):
        fit_tes(np.arange(30.0), 24)


@pytest.mark.parametrize("mode", ["additive", "multiplicative"])
def test_tes_update_matches_refilter(mode):
    y = daily(days=6) + np.random.default_rng(2).normal(0, 0.2, 144)
    state = filter_tes(y[:120], 24, 0.3, 0.05, 0.2, mode)
    direct = filter_tes(y, 24, 0.3, 0.05, 0.2, mode)
    np.testing.assert_allclose(state.update(y[120:]).forecast(30), direct.forecast(30),
                               rtol=1e-9, atol=1e-9)


def test_tes_refinement_never_worse_than_grid():
    y = daily(days=6) + np.random.default_rng(3).normal(0, 0.3, 144)
    assert fit_tes(y, 24).aic <= fit_tes(y, 24, refine=False).aic


# ARIMA / SARIMA

def test_random_walk_forecasts_last_value():
    y = np.r_[np.random.default_rng(0).normal(size=50).cumsum(), 9.0]
    state = filter_arima(y, (0, 1, 0))
    assert state.forecast(5).tolist() == [9.0] * 5


def test_fitted_random_walk_drift_is_mean_difference():
    y = np.random.default_rng(0).normal(size=200).cumsum()
    state = fit_arima(y, (0, 1, 0))
    assert state.intercept == pytest.approx(np.diff(y).mean(), abs=1e-12)
    np.testing.assert_allclose(state.forecast(3), y[-1] + np.arange(1, 4) * state.intercept,
                               atol=1e-9)


@given(st.floats(-0.99, 0.99), st.integers(1, 20), st.integers(0, 1000))
def test_ar1_closed_form(phi, h, seed):
    y = simulate_arma(50, ar=[phi], seed=seed)
    forecast = filter_arima(y, (1, 0, 0), 0.0, ar=[phi]).forecast(h)
    np.testing.assert_allclose(forecast, y[-1] * phi ** np.arange(1, h + 1), rtol=0, atol=1e-9)


def test_ar1_recovery_single_seed():
    y = simulate_arma(2000, ar=[0.8], seed=0)
    state = fit_arima(y, (1, 0, 0))
    assert 0.7 <= state.ar[0] <= 0.9


def test_arma11_recovery():
    y = simulate_arma(2000, ar=[0.6], ma=[0.3], seed=4)
    state = fit_arima(y, (1, 0, 1))
    assert state.ar[0] == pytest.approx(0.6, abs=0.1)
    assert state.ma[0] == pytest.approx(0.3, abs=0.1)


def test_seasonal_random_walk_repeats_last_day():
    y = daily(days=10)
    state = fit_sarima(y, SarimaOrder(ArimaOrder(0, 0, 0), 0, 1, 0, 24))
    np.testing.assert_allclose(state.forecast(30), last_day_forecast(y, 30, 24), atol=1e-9)


def test_white_noise_model_forecasts_mean():
    y = np.random.default_rng(5).normal(3.0, 1.0, 300)
    state = fit_arima(y, (0, 0, 0))
    np.testing.assert_allclose(state.forecast(4), y.mean(), atol=1e-9)


def test_seasonal_ar_recovery():
    y = simulate_arma(2400, ar=[0] * 23 + [0.7], seed=0)
    state = fit_sarima(y, SarimaOrder(ArimaOrder(0, 0, 0), 1, 0, 0, 24))
    assert 0.6 <= state.sar[0] <= 0.8


@pytest.mark.parametrize("order", [
    (2, 0, 1),
    (1, 1, 1),
    SarimaOrder(ArimaOrder(1, 0, 1), 1, 0, 1, 12),
    SarimaOrder(ArimaOrder(1, 1, 0), 0, 1, 1, 12),
])
def test_arima_filter_consistency(order):
    y = np.cumsum(simulate_arma(400, ar=[0.5], ma=[0.2], seed=7)) / 5
    y += 2 * np.sin(2 * np.pi * np.arange(400) / 12)
    state = fit_sarima(y[:380], order)
    coefs = dict(ar=state.ar, ma=state.ma, sar=state.sar, sma=state.sma)
    direct = filter_arima(y, state.order, state.intercept, **coefs)
    np.testing.assert_allclose(state.update(y[380:]).forecast(12), direct.forecast(12),
                               rtol=1e-9, atol=1e-9)
    assert state.update([]) is state


def test_infeasible_seasonal_order():
    y = np.random.default_rng(0).normal(size=100)
    with pytest.raises(InfeasibleOrderError):
        fit_sarima(y, SarimaOrder(ArimaOrder(0, 0, 0), 2, 0, 0, 60))


def test_too_short_for_order():
    with pytest.raises(InsufficientDataError):
        fit_arima(np.arange(12.0), (1, 1, 1))


def test_order_validation():
    with pytest.raises(ValueError):
        ArimaOrder(1, 2, 0)
    with pytest.raises(ValueError):
        SarimaOrder(ArimaOrder(0, 0, 0), 1, 0, 0, 0)


@pytest.mark.parametrize("coeffs, stationary", [
    ([], True), ([0.5], True), ([0.999], True), ([1.0], False), ([-1.2], False),
    ([0.5, 0.3], True), ([0.5, 0.6], False), ([1.8, -0.9], True),
])
def test_stationarity_examples(coeffs, stationary):
    assert is_stationary(coeffs) == stationary


@given(st.lists(st.floats(-0.95, 0.95).map(lambda v: round(v, 3)), min_size=1, max_size=5))
def test_stationarity_matches_roots(coeffs):
    # 1 - a1 z - ... - ap z^p must have all roots outside the unit circle
    roots = np.roots(np.r_[-np.asarray(coeffs)[::-1], 1.0])
    if np.any(np.abs(np.abs(roots) - 1) < 1e-6):
        return
    assert is_stationary(coeffs) == bool(np.all(np.abs(roots) > 1))


@given(st.integers(0, 50))
def test_accepted_fits_are_stationary(seed):
    y = simulate_arma(300, ar=[0.9, -0.2], ma=[0.4], seed=seed)
    try:
        state = fit_arima(y, (2, 0, 2))
    except FitFailedError:
        return
    assert is_stationary(state.ar) and is_invertible(state.ma)


def test_forecaster_outputs_are_finite():
    y = daily(days=12) + np.random.default_rng(8).normal(0, 0.3, 288)
    for model in [SES(), TES(24), Arima((1, 1, 1)), Sarima(SarimaOrder(ArimaOrder(1, 0, 0),
                                                                        0, 1, 1, 24))]:
        out = model.fit(y).update(y[-3:]).predict(12)
        assert out.shape == (12,) and np.all(np.isfinite(out))


def test_refit_every_reestimates():
    y = np.cumsum(np.random.default_rng(9).normal(size=300))
    model = SES(refit_every=2).fit(y[:100])
    before = model.state.alpha
    for v in y[100:110]:
        model.update([v])
    assert model.state.n_obs == 110
    assert model.state == fit_ses(y[:110]) or before == model.state.alpha

