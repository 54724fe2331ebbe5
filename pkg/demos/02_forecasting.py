"""Forecasting per-region traffic one slot ahead.

A synthetic diurnal series stands in for the CDR traffic. ARIMA(1,1,1),
a small LSTM and the last-value forecast are compared on the holdout.

Run: python demos/02_forecasting.py   (about half a minute)
"""
# %%
import numpy as np

from fogplace.forecast import evaluate, naive_last_value
from fogplace.forecast.arima import auto_arima, fit_arima, one_step_forecasts
from fogplace.forecast.lstm import LstmHyperparams, init_lstm, lstm_evaluate, lstm_gradient_check, lstm_train
from fogplace.workload import SynthConfig, classify_intensity, synth_workload

series = synth_workload(SynthConfig(regions=4, days=10), seed=3)
y = series[0].values
cut = int(len(y) * 40 / 62)
print(f"{len(y)} ten-minute slots, training on the first {cut}")

# %% Slot intensity classes from 1-D k-means
labels = classify_intensity(series, per_slot=True)
print("slots per class:", {c: sum(1 for (r, _), v in labels.items() if r == 0 and v == c)
                           for c in ("low", "medium", "high")})

# %% ARIMA: a fixed order, then the holdout-MAE order search
arima = fit_arima(y[:cut], 1, 1, 1)
print(f"ARIMA(1,1,1): phi {arima.phi[0]:.3f} theta {arima.theta[0]:.3f}")
best = auto_arima(y[:cut])
print("auto order:", best.order, "from", len(best.scores), "candidates")

# %% LSTM: check backprop first, then train
probe = init_lstm(6, 4, seed=0, scale=0.5)
print(f"gradient check: {lstm_gradient_check(probe, np.linspace(0, 1, 6), 0.3):.2e} max relative error")
result = lstm_train(y[:cut], LstmHyperparams(epochs=150), seed=3)
print(f"training loss {result.losses[0]:.4f} -> {result.losses[-1]:.4f}")

# %% Holdout comparison
for name, m in (("naive", evaluate(naive_last_value(y, cut), y[cut:])),
                ("ARIMA(1,1,1)", evaluate(one_step_forecasts(arima, y, cut), y[cut:])),
                ("LSTM", lstm_evaluate(result.model, y, cut))):
    print(f"{name:>13}: MAE {m.mae:7.3f}  RMSE {m.rmse:7.3f}")
