"""Aligned observation/forecast panels and a synthetic data generator.

Panels are stored wide: one CSV column per series plus a leading ``time``
column.  Observation panels must be coherent column by column; forecast
panels need not be.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .hierarchy import Hierarchy, check_coherent


class PanelError(ValueError):
    """Raised for malformed or incoherent panel data."""


@dataclass(frozen=True)
class SeriesPanel:
    """n x T value matrix aligned to a hierarchy's row order.

    ``kind`` is either ``"observations"`` (validated for coherence) or
    ``"forecasts"`` (possibly incoherent base forecasts).
    """

    h: Hierarchy
    values: np.ndarray = field(repr=False)
    timestamps: tuple[str, ...]
    kind: str = "observations"

    @property
    def T(self) -> int:
        return self.values.shape[1]


def make_panel(
    h: Hierarchy,
    values: np.ndarray,
    timestamps: list[str] | tuple[str, ...],
    kind: str = "observations",
) -> SeriesPanel:
    """Validate and wrap a value matrix as a panel.

    Observation panels require T >= 2 and per-column coherence at
    tolerance ``1e-6 * ||column||_inf``; forecast panels only require
    T >= 1.
    """
    values = np.asarray(values, dtype=float)
    if kind not in ("observations", "forecasts"):
        raise PanelError(f"unknown panel kind {kind!r}")
    if values.ndim != 2 or values.shape[0] != h.n:
        raise PanelError(f"expected {h.n} rows, got shape {values.shape}")
    T = values.shape[1]
    min_T = 2 if kind == "observations" else 1
    if T < min_T:
        raise PanelError(f"{kind} panel needs T >= {min_T}, got T={T}")
    if len(timestamps) != T:
        raise PanelError("timestamps do not match number of columns")
    if not np.all(np.isfinite(values)):
        raise PanelError("non-numeric or non-finite cell in panel")
    if kind == "observations":
        resid = np.max(np.abs(values - h.S @ values[h.bottom_idx]), axis=0)
        tol = 1e-6 * np.max(np.abs(values), axis=0)
        bad = np.nonzero(resid > tol)[0]
        if bad.size:
            t = int(bad[0])
            raise PanelError(
                f"coherence violation at t={timestamps[t]} (column {t})"
            )
    return SeriesPanel(h=h, values=values, timestamps=tuple(timestamps), kind=kind)


def panel_coherence_residual(panel: SeriesPanel) -> np.ndarray:
    """Per-column infinity-norm of ``values - S @ values[bottom]``."""
    h = panel.h
    return np.max(np.abs(panel.values - h.S @ panel.values[h.bottom_idx]), axis=0)


def load_panel(h: Hierarchy, path: str, kind: str = "observations") -> SeriesPanel:
    """Load a wide CSV (``time,<label1>,...``) aligned to ``h``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "time":
            raise PanelError(f"{path}: first column must be 'time'")
        col_of = {lab: i for i, lab in enumerate(header)}
        for lab in h.labels:
            if lab not in col_of:
                raise PanelError(f"{path}: missing series column {lab!r}")
        rows = [row for row in reader if row]
    timestamps = [row[0] for row in rows]
    values = np.empty((h.n, len(rows)))
    for t, row in enumerate(rows):
        for i, lab in enumerate(h.labels):
            cell = row[col_of[lab]]
            try:
                values[i, t] = float(cell)
            except ValueError as exc:
                raise PanelError(
                    f"{path}: non-numeric cell {cell!r} for series {lab!r} "
                    f"at t={timestamps[t]}"
                ) from exc
    return make_panel(h, values, timestamps, kind)


def save_panel(panel: SeriesPanel, path: str) -> None:
    """Write the panel as a wide CSV with 17-significant-digit decimals."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time", *panel.h.labels])
        for t in range(panel.T):
            writer.writerow(
                [panel.timestamps[t]]
                + [format(v, ".17g") for v in panel.values[:, t]]
            )


def _noise_chol(sigma_b: np.ndarray, phi: float) -> tuple[np.ndarray, np.ndarray]:
    """Cholesky factors for the stationary start and the AR innovations."""
    start = np.linalg.cholesky(sigma_b)
    innov = np.linalg.cholesky((1.0 - phi**2) * sigma_b)
    return start, innov


def _ar1_noise(
    rng: np.random.Generator, sigma_b: np.ndarray, phi: float, T: int
) -> np.ndarray:
    """AR(1) noise (m x T) whose stationary covariance is ``sigma_b``."""
    m = sigma_b.shape[0]
    start, innov = _noise_chol(sigma_b, phi)
    x = np.empty((m, T))
    x[:, 0] = start @ rng.standard_normal(m)
    for t in range(1, T):
        x[:, t] = phi * x[:, t - 1] + innov @ rng.standard_normal(m)
    return x


def synth_generate(
    h: Hierarchy,
    T: int,
    T_prime: int,
    seed: int,
    shift: float = 0.0,
    period: int = 4,
) -> tuple[SeriesPanel, SeriesPanel]:
    """Generate (train, test) panels with a controllable covariance shift.

    Bottom series are level + linear trend + seasonal cycle + AR(1) noise.
    Train-segment noise has a fixed bottom covariance ``sigma_b``; the test
    segment uses ``(1 + shift) * R @ sigma_b @ R.T`` with ``R`` a seeded
    rotation that reduces to the identity at ``shift = 0``.  Upper levels
    are exact sums via ``S``; everything is deterministic per seed.
    """
    if T < 8:
        raise ValueError(f"need T >= 8, got {T}")
    if T_prime < 1:
        raise ValueError(f"need T_prime >= 1, got {T_prime}")
    if shift < 0:
        raise ValueError(f"shift must be nonnegative, got {shift}")

    m = h.m
    rng = np.random.default_rng(seed)

    # Bottom covariance: random correlation with heterogeneous scales.
    A = rng.standard_normal((m, m + 2))
    C = A @ A.T + 0.5 * m * np.eye(m)
    d = np.sqrt(np.diag(C))
    corr = C / np.outer(d, d)
    scales = rng.uniform(0.6, 1.8, size=m)
    sigma_b = corr * np.outer(scales, scales)

    # Seeded rotation for the test-segment covariance; expm(0) = I.
    B = rng.standard_normal((m, m))
    K = B - B.T
    K /= max(np.linalg.norm(K), 1e-12)
    R = expm(shift * K)
    sigma_test = (1.0 + shift) * R @ sigma_b @ R.T

    level = rng.uniform(20.0, 60.0, size=m)
    slope = rng.uniform(-0.05, 0.10, size=m)
    amp = rng.uniform(1.0, 5.0, size=m)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=m)
    phi = 0.6

    def deterministic(t0: int, length: int) -> np.ndarray:
        t = np.arange(t0, t0 + length)
        return (
            level[:, None]
            + slope[:, None] * t[None, :]
            + amp[:, None] * np.sin(2.0 * np.pi * t[None, :] / period + phase[:, None])
        )

    b_train = deterministic(0, T) + _ar1_noise(rng, sigma_b, phi, T)
    b_test = deterministic(T, T_prime) + _ar1_noise(rng, sigma_test, phi, T_prime)

    ts_train = [f"t{t:05d}" for t in range(T)]
    ts_test = [f"t{t:05d}" for t in range(T, T + T_prime)]
    train = make_panel(h, h.S @ b_train, ts_train, "observations")
    if T_prime >= 2:
        test = make_panel(h, h.S @ b_test, ts_test, "observations")
    else:
        # A single-column test segment is allowed here even though loaded
        # observation panels require T >= 2.
        test = SeriesPanel(
            h=h, values=h.S @ b_test, timestamps=tuple(ts_test), kind="observations"
        )
    return train, test
