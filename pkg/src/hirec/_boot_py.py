"""Pure-numpy bootstrap kernel (fallback when the compiled one is absent).

Computes, for each row of ``idx``, the shrunk covariance of the resampled
residual columns.  Must agree with ``_boot_cy`` up to float roundoff.
"""

from __future__ import annotations

import numpy as np


def bootstrap_covariances(
    resid: np.ndarray, idx: np.ndarray, lam: float, chunk: int = 256
) -> np.ndarray:
    """Shrunk covariance per resample.

    Parameters
    ----------
    resid : (n, T) residual matrix.
    idx : (n_boot, T) integer time indices, one resample per row.
    lam : shrinkage intensity applied to off-diagonal entries.

    Returns
    -------
    (n_boot, n, n) array of shrunk covariance matrices.
    """
    resid = np.ascontiguousarray(resid, dtype=np.float64)
    n, T = resid.shape
    n_boot = idx.shape[0]
    out = np.empty((n_boot, n, n))
    off = 1.0 - lam
    for start in range(0, n_boot, chunk):
        sel = idx[start : start + chunk]
        # (k, n, T): gather columns per resample, then center per resample.
        R = resid[:, sel].transpose(1, 0, 2)
        R = R - R.mean(axis=2, keepdims=True)
        W = R @ R.transpose(0, 2, 1) / (T - 1)
        d = np.einsum("kii->ki", W).copy()
        W *= off
        np.einsum("kii->ki", W)[:] = d
        out[start : start + chunk] = W
    return out
