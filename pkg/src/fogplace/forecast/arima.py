"""ARIMA(p, d, q) fitted by conditional sum of squares.

The model on the d-times differenced series ``w`` is

    w_t = alpha + phi_1 w_{t-1} + ... + phi_p w_{t-p} + e_t - theta_1 e_{t-1} - ... - theta_q e_{t-q}

with the MA terms entering with a minus sign.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy import optimize, signal

from ..errors import ConvergenceError, FormatError, InvalidInputError
from .metrics import ForecastMetrics, evaluate

ARIMA_SCHEMA = "fogplace.arima/1"
_PACF_BOUND = 6.0  # tanh(6) ~ 0.99999


def difference(series, d: int) -> np.ndarray:
    s = np.asarray(series, dtype=float)
    if d < 0:
        raise InvalidInputError("d must be >= 0")
    if s.size <= d:
        raise InvalidInputError(f"series of length {s.size} cannot be differenced {d} times")
    return np.diff(s, n=d) if d else s.copy()


def difference_anchors(series, d: int) -> list[float]:
    """First value of each differencing level 0..d-1 (what undifference needs)."""
    s = np.asarray(series, dtype=float)
    out = []
    for _ in range(d):
        out.append(float(s[0]))
        s = np.diff(s)
    return out


def undifference(diffed, d: int, anchors) -> np.ndarray:
    """Invert ``difference`` given the leading value of each level."""
    x = np.asarray(diffed, dtype=float)
    if len(anchors) != d:
        raise InvalidInputError("need one anchor per differencing level")
    for level in range(d - 1, -1, -1):
        x = np.concatenate(([anchors[level]], anchors[level] + np.cumsum(x)))
    return x


def _integrate_forward(forecasts: np.ndarray, tails: list[float]) -> np.ndarray:
    """Turn forecasts of the differenced series into level forecasts.

    ``tails[k]`` is the last observed value of the k-th differencing level.
    """
    x = forecasts
    for level in range(len(tails) - 1, -1, -1):
        x = tails[level] + np.cumsum(x)
    return x


@dataclass
class ArimaModel:
    p: int
    d: int
    q: int
    alpha: float
    phi: np.ndarray
    theta: np.ndarray
    residual_variance: float
    last_values: np.ndarray = field(default_factory=lambda: np.zeros(0))  # tail of differenced series
    last_residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    level_tails: list[float] = field(default_factory=list)  # last value of each level 0..d-1
    stationary: bool = True
    invertible: bool = True
    n_obs: int = 0

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float).reshape(-1)
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if self.phi.size != self.p or self.theta.size != self.q:
            raise InvalidInputError("coefficient counts must match (p, q)")

    @property
    def order(self) -> tuple[int, int, int]:
        return (self.p, self.d, self.q)


def _residuals(w: np.ndarray, alpha: float, phi: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Conditional residuals for t >= p with pre-sample errors set to zero."""
    p = phi.size
    u = w[p:] - alpha
    for i in range(p):
        u = u - phi[i] * w[p - 1 - i:w.size - 1 - i]
    if theta.size:
        return signal.lfilter([1.0], np.concatenate(([1.0], -theta)), u)
    return u


def _roots_outside(coefs: np.ndarray) -> bool:
    """True when 1 - c_1 z - ... - c_k z^k has every root outside the unit circle."""
    if coefs.size == 0 or not np.any(coefs):
        return True
    poly = np.concatenate(([1.0], -coefs))[::-1]
    return bool(np.all(np.abs(np.roots(poly)) > 1.0))


def _start_values(w: np.ndarray, p: int, q: int) -> np.ndarray:
    """Hannan-Rissanen two-stage regression start."""
    n = w.size
    m = min(max(10, 2 * (p + q) + 5), n // 4) if q else 0
    if m:
        xs = np.column_stack([np.ones(n - m)] + [w[m - k:n - k] for k in range(1, m + 1)])
        beta, *_ = np.linalg.lstsq(xs, w[m:], rcond=None)
        e = np.zeros(n)
        e[m:] = w[m:] - xs @ beta
    else:
        e = np.zeros(n)
    start = max(p, q) + m
    cols = [np.ones(n - start)]
    cols += [w[start - k:n - k] for k in range(1, p + 1)]
    cols += [-e[start - k:n - k] for k in range(1, q + 1)]
    beta, *_ = np.linalg.lstsq(np.column_stack(cols), w[start:], rcond=None)
    beta = np.asarray(beta, dtype=float)
    # Pull an explosive or non-invertible start back inside the admissible region.
    if p and not _roots_outside(beta[1:1 + p]):
        beta[1:1 + p] *= 0.5
    if q and not _roots_outside(beta[1 + p:]):
        beta[1 + p:] = 0.0
    return beta


def _pacf_to_coefs(raw: np.ndarray) -> np.ndarray:
    """Map unconstrained values to the coefficients of an invertible polynomial."""
    r = np.tanh(raw)
    c = np.zeros(0)
    for k, rk in enumerate(r):
        c = np.concatenate((c - rk * c[::-1], [rk])) if k else np.array([rk])
    return c


def _coefs_to_pacf(c: np.ndarray) -> np.ndarray:
    """Inverse of ``_pacf_to_coefs`` for an invertible polynomial."""
    c = np.asarray(c, dtype=float).copy()
    r = np.zeros(c.size)
    for k in range(c.size - 1, -1, -1):
        rk = float(np.clip(c[k], -0.999, 0.999))
        r[k] = rk
        if k:
            c = (c[:k] + rk * c[:k][::-1]) / (1.0 - rk * rk)
    return np.arctanh(r)


def fit_arima(series, p: int, d: int, q: int, seed: int = 0, max_iter: int = 4000) -> ArimaModel:
    """Conditional-sum-of-squares fit with a Nelder-Mead simplex search."""
    y = np.asarray(series, dtype=float)
    if min(p, d, q) < 0:
        raise InvalidInputError("orders must be non-negative")
    if y.size < 10 * (p + q + 1) + d:
        raise InvalidInputError(f"series too short for ARIMA({p},{d},{q})")
    w = difference(y, d)

    if p == 0 and q == 0:
        alpha = float(w.mean())
        params = np.array([alpha])
    else:
        scale = float(np.mean((w - w.mean()) ** 2)) or 1.0

        # MA coefficients are searched through partial autocorrelations, which
        # keeps every candidate invertible.
        def unpack(par):
            return par[0], par[1:1 + p], _pacf_to_coefs(par[1 + p:]) if q else np.zeros(0)

        def css(par):
            e = _residuals(w, *unpack(par))
            val = float(np.mean(e**2)) / scale
            return val if np.isfinite(val) else 1e12

        rng = np.random.default_rng(seed)
        x0 = _start_values(w, p, q)
        x0 = np.concatenate((x0[:1 + p], _coefs_to_pacf(x0[1 + p:]))) if q else x0
        bounds = [(None, None)] * (1 + p) + [(-_PACF_BOUND, _PACF_BOUND)] * q
        best = None
        for attempt in range(3):
            start = x0 if attempt == 0 else x0 + rng.normal(0.0, 0.05, x0.size)
            res = optimize.minimize(css, start, method="Nelder-Mead", bounds=bounds,
                                    options={"xatol": 1e-7, "fatol": 1e-11, "maxiter": max_iter,
                                             "maxfev": 2 * max_iter})
            if best is None or res.fun < best.fun:
                best = res
            if res.success:
                break
        if not best.success:
            raise ConvergenceError(f"ARIMA({p},{d},{q}) did not converge: {best.message}",
                                   best={"params": best.x.tolist(), "css": float(best.fun)})
        params = np.concatenate(([best.x[0]], best.x[1:1 + p], _pacf_to_coefs(best.x[1 + p:]) if q else []))
    alpha, phi, theta = float(params[0]), params[1:1 + p], params[1 + p:]
    e = _residuals(w, alpha, phi, theta)
    stationary = _roots_outside(phi)
    if not stationary:
        warnings.warn(f"ARIMA({p},{d},{q}) fit has a non-stationary AR polynomial", RuntimeWarning)
    tails, level = [], y
    for _ in range(d):
        tails.append(float(level[-1]))
        level = np.diff(level)
    return ArimaModel(p=p, d=d, q=q, alpha=alpha, phi=phi, theta=theta,
                      residual_variance=float(np.mean(e**2)),
                      last_values=w[w.size - p:].copy() if p else np.zeros(0),
                      last_residuals=e[e.size - q:].copy() if q else np.zeros(0),
                      level_tails=tails, stationary=stationary,
                      invertible=_roots_outside(theta), n_obs=int(y.size))


def in_sample_residuals(model: ArimaModel, series) -> np.ndarray:
    return _residuals(difference(series, model.d), model.alpha, model.phi, model.theta)


def predict_arima(model: ArimaModel, horizon: int) -> np.ndarray:
    """Recursive multi-step forecast with future shocks set to zero."""
    if horizon < 1:
        raise InvalidInputError("horizon must be >= 1")
    w = list(model.last_values)
    e = list(model.last_residuals)
    out = np.empty(horizon)
    for h in range(horizon):
        val = model.alpha
        for i in range(model.p):
            val += model.phi[i] * w[-1 - i]
        for j in range(model.q):
            val -= model.theta[j] * e[-1 - j]
        out[h] = val
        w.append(val)
        e.append(0.0)
    return _integrate_forward(out, model.level_tails) if model.d else out


def one_step_forecasts(model: ArimaModel, series, start: int) -> np.ndarray:
    """Rolling one-step predictions of ``series[start:]`` with fixed coefficients.

    Each prediction uses observations strictly before its target.
    """
    y = np.asarray(series, dtype=float)
    lead = model.d + model.p
    if start < lead + 1 or start > y.size:
        raise InvalidInputError(f"start must lie in [{lead + 1}, {y.size}]")
    e = _residuals(difference(y, model.d), model.alpha, model.phi, model.theta)
    # e[k] is the error on y[k + lead]; the level error equals the differenced one.
    return y[start:] - e[start - lead:]


@dataclass
class AutoArimaResult:
    order: tuple[int, int, int]
    model: ArimaModel
    scores: dict[tuple[int, int, int], ForecastMetrics]
    failures: dict[tuple[int, int, int], str]


def candidate_orders(max_p: int = 2, max_d: int = 2, max_q: int = 2, max_order: int = 2):
    for p, d, q in product(range(max_p + 1), range(max_d + 1), range(max_q + 1)):
        if p + q <= max_order:
            yield (p, d, q)


def auto_arima(series, max_p: int = 2, max_q: int = 2, max_d: int = 2, holdout_fraction: float = 0.2,
               max_order: int = 2, seed: int = 0) -> AutoArimaResult:
    """Grid search over (p, d, q) scored by one-step holdout MAE.

    Ties fall to RMSE, then to fewer coefficients, then to the smaller order.
    The winner is refitted on the whole series.
    """
    y = np.asarray(series, dtype=float)
    if not 0.0 < holdout_fraction < 1.0:
        raise InvalidInputError("holdout_fraction must lie in (0, 1)")
    n_train = int(round(y.size * (1.0 - holdout_fraction)))
    scores, failures = {}, {}
    for order in candidate_orders(max_p, max_d, max_q, max_order):
        p, d, q = order
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                model = fit_arima(y[:n_train], p, d, q, seed=seed)
            pred = one_step_forecasts(model, y, n_train)
        except (InvalidInputError, ConvergenceError) as exc:
            failures[order] = str(exc)
            continue
        if not np.all(np.isfinite(pred)):
            failures[order] = "non-finite forecasts"
            continue
        scores[order] = evaluate(pred, y[n_train:])
    if not scores:
        raise ConvergenceError("every candidate ARIMA fit failed", best=failures)
    best = min(scores, key=lambda o: (scores[o].mae, scores[o].rmse, o[0] + o[2], o))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        final = fit_arima(y, *best, seed=seed)
    return AutoArimaResult(order=best, model=final, scores=scores, failures=failures)


def arima_to_json(model: ArimaModel) -> str:
    doc = {
        "schema": ARIMA_SCHEMA, "p": model.p, "d": model.d, "q": model.q,
        "alpha": model.alpha, "phi": model.phi.tolist(), "theta": model.theta.tolist(),
        "residual_variance": model.residual_variance,
        "last_values": model.last_values.tolist(), "last_residuals": model.last_residuals.tolist(),
        "level_tails": list(model.level_tails), "stationary": model.stationary,
        "invertible": model.invertible, "n_obs": model.n_obs,
    }
    return json.dumps(doc, indent=1) + "\n"


def arima_from_json(text: str) -> ArimaModel:
    doc = json.loads(text)
    if doc.get("schema") != ARIMA_SCHEMA:
        raise FormatError(f"unsupported ARIMA schema {doc.get('schema')!r}")
    doc.pop("schema")
    doc["last_values"] = np.asarray(doc["last_values"], dtype=float)
    doc["last_residuals"] = np.asarray(doc["last_residuals"], dtype=float)
    return ArimaModel(**doc)
