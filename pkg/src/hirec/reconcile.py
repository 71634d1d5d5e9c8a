"""Classical reconciliation matrices and their application.

Every method produces an m x n matrix ``P``; coherent forecasts are
``S @ P @ yhat`` column by column.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .covariance import CovEstimate
from .dataset import SeriesPanel, make_panel
from .hierarchy import Hierarchy


@dataclass(frozen=True)
class ReconciliationMatrix:
    """m x n mapping from base forecasts to bottom-level values."""

    P: np.ndarray = field(repr=False)
    method: str


def bottom_up(h: Hierarchy) -> ReconciliationMatrix:
    """Keep the bottom-level base forecasts; discard the rest."""
    P = np.zeros((h.m, h.n))
    P[np.arange(h.m), h.bottom_idx] = 1.0
    return ReconciliationMatrix(P=P, method="bu")


def top_down(h: Hierarchy, obs: SeriesPanel) -> ReconciliationMatrix:
    """Disaggregate the top-level base forecast by average historical shares.

    The share of bottom series X is the mean over t of y_X(t) / y_total(t);
    time points where the total is zero are skipped (with renormalization
    by the count kept).
    """
    top = obs.values[0]
    keep = top != 0.0
    if not np.any(keep):
        raise ValueError("top-down: top-level observation is zero at every t")
    bottom = obs.values[h.bottom_idx][:, keep]
    p = np.mean(bottom / top[keep][None, :], axis=1)
    P = np.zeros((h.m, h.n))
    P[:, 0] = p
    return ReconciliationMatrix(P=P, method="td")


def ols(h: Hierarchy) -> ReconciliationMatrix:
    """Orthogonal projection onto the coherent subspace: (S'S)^-1 S'."""
    c, low = cho_factor(h.S.T @ h.S)
    P = cho_solve((c, low), h.S.T)
    return ReconciliationMatrix(P=P, method="ols")


def mint(h: Hierarchy, cov: CovEstimate) -> ReconciliationMatrix:
    """Trace-minimizing reconciliation: (S' W^-1 S)^-1 S' W^-1.

    Requires a positive definite W; pass a shrunk estimate if the raw
    sample covariance is singular.
    """
    try:
        cw, low = cho_factor(cov.W)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "mint: covariance is not positive definite; apply shrink() first"
        ) from exc
    Winv_S = cho_solve((cw, low), h.S)
    cA, lowA = cho_factor(h.S.T @ Winv_S)
    P = cho_solve((cA, lowA), Winv_S.T)
    return ReconciliationMatrix(P=P, method="mint")


def apply_reconciliation(rm: ReconciliationMatrix, base: SeriesPanel) -> SeriesPanel:
    """Columnwise coherent forecasts S @ P @ yhat as a forecast panel."""
    h = base.h
    if rm.P.shape != (h.m, h.n):
        raise ValueError(
            f"P shape {rm.P.shape} does not match hierarchy ({h.m}, {h.n})"
        )
    values = h.S @ (rm.P @ base.values)
    return make_panel(h, values, base.timestamps, "forecasts")


def save_reconciliation_matrix(rm: ReconciliationMatrix, path: str) -> None:
    """CSV dump: one method-header line, then the m x n matrix."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", rm.method])
        for row in rm.P:
            writer.writerow([format(v, ".17g") for v in row])


def load_reconciliation_matrix(path: str) -> ReconciliationMatrix:
    """Inverse of :func:`save_reconciliation_matrix`."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows or rows[0][0] != "method":
        raise ValueError(f"{path}: missing method header")
    P = np.array([[float(v) for v in row] for row in rows[1:]])
    return ReconciliationMatrix(P=P, method=rows[0][1])
