from .arima import (Arima, ArimaOrder, ArimaState, Sarima, SarimaOrder, filter_arima,
                    fit_arima, fit_sarima, is_invertible, is_stationary)
from .base import Forecaster
from .baselines import LastDay, LastObservation, last_day_forecast, last_observation_forecast
from .smoothing import (SES, TES, SESState, TESState, filter_ses, filter_tes, fit_ses,
                        fit_tes)

__all__ = [
    "Arima", "ArimaOrder", "ArimaState", "Sarima", "SarimaOrder", "filter_arima", "fit_arima",
    "fit_sarima", "is_invertible", "is_stationary", "Forecaster", "LastDay", "LastObservation",
    "last_day_forecast", "last_observation_forecast", "SES", "TES", "SESState", "TESState",
    "filter_ses", "filter_tes", "fit_ses", "fit_tes",
]
