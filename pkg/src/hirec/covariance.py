"""Forecast-error covariance estimation, shrinkage, and the bootstrap box.

The box uncertainty set is built by resampling observation-period
residual pairs with replacement, shrinking each resampled covariance
with a fixed intensity, and taking elementwise percentiles across the
resamples.  The hot loop is compiled (``_boot_cy``) when the extension
built; otherwise a vectorized numpy fallback is used.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

try:
    from . import _boot_cy as _boot

    COMPILED_KERNEL = True
except ImportError:  # pragma: no cover - depends on the build
    from . import _boot_py as _boot

    COMPILED_KERNEL = False

from . import _boot_py
from .dataset import SeriesPanel


@dataclass(frozen=True)
class CovEstimate:
    """Symmetric n x n covariance with shrinkage metadata.

    ``lam`` is the shrinkage intensity in [0, 1] (0 before shrinkage).
    ``residuals`` keeps the n x T residual matrix the estimate came from,
    which the shrinkage intensity and the bootstrap need.
    """

    W: np.ndarray = field(repr=False)
    lam: float
    T_used: int
    residuals: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class UncertaintySet:
    """Elementwise covariance bounds [lower, upper], both symmetric."""

    lower: np.ndarray = field(repr=False)
    upper: np.ndarray = field(repr=False)
    alpha: float
    n_boot: int
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    def is_singleton(self, rtol: float = 1e-12) -> bool:
        scale = max(np.max(np.abs(self.upper)), 1.0)
        return bool(np.max(self.upper - self.lower) <= rtol * scale)


def estimate_cov(obs: SeriesPanel, insample: SeriesPanel) -> CovEstimate:
    """Unbiased sample covariance of the base-forecast residuals.

    Residuals are ``y_t - yhat_t`` over the observation period, centered
    at their sample mean; the divisor is T - 1.
    """
    if obs.values.shape != insample.values.shape:
        raise ValueError(
            f"panel shapes differ: {obs.values.shape} vs {insample.values.shape}"
        )
    resid = obs.values - insample.values
    T = resid.shape[1]
    if T < 2:
        raise ValueError(f"need T >= 2 residual columns, got {T}")
    centered = resid - resid.mean(axis=1, keepdims=True)
    W = centered @ centered.T / (T - 1)
    W = 0.5 * (W + W.T)
    return CovEstimate(W=W, lam=0.0, T_used=T, residuals=resid)


def shrinkage_intensity(resid: np.ndarray) -> float:
    """Off-diagonal shrinkage intensity (Schafer-Strimmer style).

    lambda = sum_{i != j} Var_hat(r_ij) / sum_{i != j} r_ij^2, clipped to
    [0, 1]; a zero denominator yields 1 (full shrinkage to the diagonal).
    Series with zero variance contribute nothing to either sum.
    """
    resid = np.asarray(resid, dtype=float)
    T = resid.shape[1]
    centered = resid - resid.mean(axis=1, keepdims=True)
    s = centered.std(axis=1, ddof=1)
    valid = s > 0
    V = centered[valid] / s[valid, None]
    if V.shape[0] < 2:
        return 1.0
    r = V @ V.T / (T - 1)
    w_bar = r * (T - 1) / T
    mean_w2 = (V**2) @ (V**2).T / T
    var_r = (T**2 / (T - 1) ** 3) * np.maximum(mean_w2 - w_bar**2, 0.0)
    offdiag = ~np.eye(V.shape[0], dtype=bool)
    den = float(np.sum(r[offdiag] ** 2))
    if den <= 0.0:
        return 1.0
    num = float(np.sum(var_r[offdiag]))
    return float(np.clip(num / den, 0.0, 1.0))


def _shrink_matrix(W: np.ndarray, lam: float) -> np.ndarray:
    """lam * diag(W) + (1 - lam) * W; the diagonal is unchanged."""
    out = (1.0 - lam) * W
    np.fill_diagonal(out, np.diag(W))
    return out


def shrink(cov: CovEstimate) -> CovEstimate:
    """Shrink the off-diagonal toward zero with the estimated intensity."""
    if cov.residuals is None:
        raise ValueError("CovEstimate carries no residuals; use estimate_cov")
    lam = shrinkage_intensity(cov.residuals)
    return replace(cov, W=_shrink_matrix(cov.W, lam), lam=lam)


def bootstrap_cov_samples(
    obs: SeriesPanel,
    insample: SeriesPanel,
    n_boot: int,
    seed: int,
    use_compiled: bool | None = None,
) -> tuple[np.ndarray, float]:
    """Shrunk covariance per bootstrap resample.

    The intensity ``lam`` is computed once from the full-sample residuals
    and reused for every resample.  Resample ``s`` draws its T time
    indices from an RNG stream keyed by (seed, s), so results do not
    depend on execution order.  Returns ``(samples, lam)`` with samples
    of shape (n_boot, n, n).
    """
    if n_boot < 1:
        raise ValueError(f"n_boot must be >= 1, got {n_boot}")
    cov = estimate_cov(obs, insample)
    lam = shrinkage_intensity(cov.residuals)
    resid = np.ascontiguousarray(cov.residuals)
    T = cov.T_used
    idx = np.empty((n_boot, T), dtype=np.int64)
    for s in range(n_boot):
        idx[s] = np.random.default_rng([seed, s]).integers(0, T, size=T)
    if use_compiled is None:
        kernel = _boot
    else:
        kernel = _boot if use_compiled and COMPILED_KERNEL else _boot_py
    samples = kernel.bootstrap_covariances(resid, idx, lam)
    return samples, lam


def bounds_from_samples(samples: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise percentile bounds over the resampled covariances.

    Upper bound at the 100*(1+alpha)/2 percentile, lower at
    100*(1-alpha)/2, with linear interpolation between order statistics.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    lower = np.quantile(samples, (1.0 - alpha) / 2.0, axis=0)
    upper = np.quantile(samples, (1.0 + alpha) / 2.0, axis=0)
    lower = 0.5 * (lower + lower.T)
    upper = 0.5 * (upper + upper.T)
    return lower, upper


def ensure_strict_feasibility(
    uset: UncertaintySet, W_ref: np.ndarray, max_steps: int = 10
) -> UncertaintySet:
    """Verify a positive definite matrix fits strictly inside the box.

    The witness is ``W_ref`` clipped into [lower + eps, upper - eps].  If
    it is not positive definite, the box is inflated symmetrically about
    its center in 5% steps (at most ``max_steps``) with a warning.
    """
    lower, upper = uset.lower.copy(), uset.upper.copy()
    for step in range(max_steps + 1):
        eps = 1e-9 * max(float(np.max(np.diag(upper))), 0.0)
        C = np.clip(W_ref, np.minimum(lower + eps, upper), np.maximum(upper - eps, lower))
        C = 0.5 * (C + C.T)
        if np.linalg.eigvalsh(C)[0] > 0.0:
            if step > 0:
                warnings.warn(
                    f"uncertainty box inflated {step} time(s) to admit a strictly "
                    "interior positive definite matrix",
                    stacklevel=2,
                )
                return replace(uset, lower=lower, upper=upper)
            return uset
        center = 0.5 * (upper + lower)
        half = 0.5 * (upper - lower)
        half = 1.05 * half + 1e-12 * max(float(np.max(np.abs(center))), 1.0)
        lower, upper = center - half, center + half
    warnings.warn(
        "uncertainty box may not contain a strictly interior positive definite "
        "matrix even after inflation",
        stacklevel=2,
    )
    return replace(uset, lower=lower, upper=upper)


def build_uncertainty_set(
    obs: SeriesPanel,
    insample: SeriesPanel,
    n_boot: int,
    alpha: float,
    seed: int,
    guard: bool = True,
) -> UncertaintySet:
    """Bootstrap box uncertainty set for the residual covariance.

    Steps: fix the shrinkage intensity from the full sample, resample T
    paired (y, yhat) time points with replacement ``n_boot`` times,
    shrink each resampled covariance with the fixed intensity, then take
    elementwise percentile bounds at width ``alpha``.
    """
    samples, lam = bootstrap_cov_samples(obs, insample, n_boot, seed)
    lower, upper = bounds_from_samples(samples, alpha)
    uset = UncertaintySet(lower=lower, upper=upper, alpha=alpha, n_boot=n_boot, seed=seed)
    if guard:
        W_ref = _shrink_matrix(estimate_cov(obs, insample).W, lam)
        uset = ensure_strict_feasibility(uset, W_ref)
    return uset


def save_uncertainty_set(uset: UncertaintySet, path: str) -> None:
    """Write the two bound matrices with a small metadata header."""
    n = uset.n
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "alpha", "n_boot", "seed"])
        writer.writerow([n, format(uset.alpha, ".17g"), uset.n_boot,
                         "" if uset.seed is None else uset.seed])
        for row in uset.lower:
            writer.writerow([format(v, ".17g") for v in row])
        for row in uset.upper:
            writer.writerow([format(v, ".17g") for v in row])


def load_uncertainty_set(path: str) -> UncertaintySet:
    """Inverse of :func:`save_uncertainty_set`."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if rows[0] != ["n", "alpha", "n_boot", "seed"]:
        raise ValueError(f"{path}: not an uncertainty-set bundle")
    n = int(rows[1][0])
    alpha = float(rows[1][1])
    n_boot = int(rows[1][2])
    seed = int(rows[1][3]) if rows[1][3] != "" else None
    mat = np.array([[float(v) for v in row] for row in rows[2 : 2 + 2 * n]])
    if mat.shape != (2 * n, n):
        raise ValueError(f"{path}: expected {2 * n} matrix rows")
    return UncertaintySet(
        lower=mat[:n], upper=mat[n:], alpha=alpha, n_boot=n_boot, seed=seed
    )
