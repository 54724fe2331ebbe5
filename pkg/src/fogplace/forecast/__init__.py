"""Per-region traffic forecasting: ARIMA, a numpy LSTM and error metrics."""
from .arima import ArimaModel, AutoArimaResult, auto_arima, fit_arima, one_step_forecasts, predict_arima
from .lstm import LstmHyperparams, LstmModel, lstm_forward, lstm_gradient_check, lstm_train
from .metrics import ForecastMetrics, evaluate, naive_last_value

__all__ = [
    "ArimaModel", "AutoArimaResult", "auto_arima", "fit_arima", "one_step_forecasts", "predict_arima",
    "LstmHyperparams", "LstmModel", "lstm_forward", "lstm_gradient_check", "lstm_train",
    "ForecastMetrics", "evaluate", "naive_last_value",
]
