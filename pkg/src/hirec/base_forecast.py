"""Per-series base forecasters.

Base forecasts ignore the aggregation structure entirely: each series is
fit and extrapolated on its own.  The in-sample panel holds fitted values
over the observation period; the future panel holds the horizon forecasts.
External forecasts can be substituted by loading forecast panels directly.
"""

from __future__ import annotations

import numpy as np

from .dataset import SeriesPanel, make_panel

METHODS = ("mean", "seasonal_naive", "linear_trend_seasonal")


def _fit_one(
    y: np.ndarray, method: str, horizon: int, period: int
) -> tuple[np.ndarray, np.ndarray]:
    """Fitted values and horizon forecasts for a single series."""
    T = y.shape[0]
    if method == "mean":
        mu = float(np.mean(y))
        return np.full(T, mu), np.full(horizon, mu)

    if method == "seasonal_naive":
        fitted = y.copy()
        fitted[period:] = y[:-period]
        last_cycle = y[T - period :]
        future = np.array([last_cycle[hh % period] for hh in range(horizon)])
        return fitted, future

    if method == "linear_trend_seasonal":
        # OLS on [1, t, period-1 seasonal dummies].
        def design(t: np.ndarray) -> np.ndarray:
            X = np.zeros((t.shape[0], 1 + 1 + (period - 1)))
            X[:, 0] = 1.0
            X[:, 1] = t
            for k in range(period - 1):
                X[t % period == k, 2 + k] = 1.0
            return X

        t_obs = np.arange(T)
        X = design(t_obs)
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        fitted = X @ beta
        t_fut = np.arange(T, T + horizon)
        future = design(t_fut) @ beta
        return fitted, future

    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def fit_predict(
    panel: SeriesPanel, method: str, horizon: int, period: int = 4
) -> tuple[SeriesPanel, SeriesPanel]:
    """Fit each series independently; return (insample, future) panels.

    The in-sample panel contains the model's fitted values at each
    observed time point (not rolling-origin forecasts); the future panel
    contains the ``horizon`` forecasts after the observation period.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if method in ("seasonal_naive", "linear_trend_seasonal"):
        if period < 2:
            raise ValueError(f"period must be >= 2, got {period}")
        if panel.T < 2 * period:
            raise ValueError(
                f"seasonal methods need T >= 2*period ({2 * period}), got T={panel.T}"
            )

    T = panel.T
    insample = np.empty((panel.h.n, T))
    future = np.empty((panel.h.n, horizon))
    for i in range(panel.h.n):
        insample[i], future[i] = _fit_one(panel.values[i], method, horizon, period)

    last = panel.timestamps[-1]
    fut_ts = _extend_timestamps(last, horizon)
    ins = make_panel(panel.h, insample, panel.timestamps, "forecasts")
    fut = make_panel(panel.h, future, fut_ts, "forecasts")
    return ins, fut


def _extend_timestamps(last: str, horizon: int) -> list[str]:
    """Continue integer-style timestamps; fall back to h+k labels."""
    if last.startswith("t") and last[1:].isdigit():
        start = int(last[1:]) + 1
        width = len(last) - 1
        return [f"t{start + k:0{width}d}" for k in range(horizon)]
    return [f"h{k + 1}" for k in range(horizon)]
