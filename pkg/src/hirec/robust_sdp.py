"""Worst-case reconciliation over a box of covariance matrices.

The min-max problem (worst covariance in the box, best reconciliation
matrix) is solved as a single semidefinite program via duality of the
inner maximization and a Schur-complement lift.  A projected-gradient
oracle for the inner maximization is included for verification.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from io import StringIO

import cvxpy as cp
import numpy as np

from .covariance import UncertaintySet
from .dataset import SeriesPanel
from .hierarchy import Hierarchy


class SolverError(RuntimeError):
    """Raised when the conic solver fails to return a usable solution."""


@dataclass(frozen=True)
class RobustProblem:
    """Data for the robust reconciliation solve.

    ``scale`` rescales residual columns for conditioning (auto-chosen
    when None); ``window`` restricts the residual matrix to the last L
    observation columns.
    """

    h: Hierarchy
    obs: SeriesPanel
    insample: SeriesPanel
    uset: UncertaintySet
    scale: float | None = None
    window: int | None = None

    def __post_init__(self) -> None:
        if self.obs.values.shape != self.insample.values.shape:
            raise ValueError("observation and in-sample panels are misaligned")
        if self.uset.lower.shape != (self.h.n, self.h.n):
            raise ValueError("uncertainty set dimension does not match hierarchy")


@dataclass(frozen=True)
class RobustSolution:
    P: np.ndarray = field(repr=False)
    X_upper: np.ndarray = field(repr=False)
    X_lower: np.ndarray = field(repr=False)
    objective: float
    solver_status: str
    duality_gap_cert: float


@dataclass
class ConicProgram:
    """Assembled conic program plus the data needed to undo the scaling."""

    problem: cp.Problem
    P_var: cp.Variable
    Xu_var: cp.Variable
    Xl_var: cp.Variable
    n: int
    m: int
    T: int
    r: int
    block_size: int
    unscale: float
    C_obs: np.ndarray
    C_base: np.ndarray

    def dump(self) -> str:
        """Plain-text listing of variable blocks, cones, and affine data."""
        out = StringIO()
        out.write("conic program\n")
        out.write(f"variables: P ({self.m}x{self.n}), "
                  f"X_upper sym ({self.n}x{self.n}), "
                  f"X_lower sym ({self.n}x{self.n})\n")
        out.write(f"cones: PSD block {self.block_size}x{self.block_size} "
                  f"(identity lower-right {self.r}x{self.r}), "
                  f"nonneg orthant {2 * self.n * self.n}\n")
        out.write(f"residual columns T={self.T}, factor rank r={self.r}, "
                  f"column scale {1.0 / np.sqrt(self.unscale):.6g}\n")
        out.write("affine map G = C_obs - S @ P @ C_base; sparse entries:\n")
        for name, mat in (("C_obs", self.C_obs), ("C_base", self.C_base)):
            nz = np.argwhere(mat != 0.0)
            out.write(f"{name}: {len(nz)} nonzeros\n")
            for i, j in nz[:200]:
                out.write(f"  {name}[{i},{j}] = {mat[i, j]:.12g}\n")
            if len(nz) > 200:
                out.write(f"  ... ({len(nz) - 200} more)\n")
        return out.getvalue()


def _windowed(rp: RobustProblem) -> tuple[np.ndarray, np.ndarray]:
    Y = rp.obs.values
    Yhat = rp.insample.values
    if rp.window is not None:
        if rp.window < 1:
            raise ValueError(f"window must be >= 1, got {rp.window}")
        Y = Y[:, -rp.window :]
        Yhat = Yhat[:, -rp.window :]
    return Y, Yhat


def residual_matrix(rp: RobustProblem, P: np.ndarray) -> np.ndarray:
    """Unscaled reconciliation residuals E = [y_t - S P yhat_t]."""
    Y, Yhat = _windowed(rp)
    return Y - rp.h.S @ (P @ Yhat)


def empirical_objective(rp: RobustProblem, P: np.ndarray, W: np.ndarray) -> float:
    """sum_t e_t' W e_t for the residuals at ``P``."""
    E = residual_matrix(rp, P)
    return float(np.sum(E * (W @ E)))


def build_sdp(rp: RobustProblem) -> ConicProgram:
    """Assemble the reconciliation SDP.

    The residual Gram matrix E E' is represented through a rank factor
    G (n x r, r = min(T, 2n)) that stays affine in P, so the PSD block
    is (n + r) x (n + r); for T <= 2n this is the plain (n + T) block.
    Residual columns are scaled by 1/(c*sqrt(T)) for conditioning; the
    objective and the dual matrices are rescaled on extraction.
    """
    h = rp.h
    n, m = h.n, h.m
    Y, Yhat = _windowed(rp)
    T = Y.shape[1]

    stacked = np.vstack([Y, Yhat])
    if T <= 2 * n:
        C = stacked
        r = T
    else:
        Q, Rfac = np.linalg.qr(stacked.T)
        C = Rfac.T
        r = 2 * n

    c = rp.scale if rp.scale is not None else float(np.sqrt(np.mean(Y**2)))
    c = max(c, 1e-8)
    d = 1.0 / (c * np.sqrt(T))
    C_obs = C[:n] * d
    C_base = C[n:] * d

    P = cp.Variable((m, n), name="P")
    Xu = cp.Variable((n, n), name="X_upper", symmetric=True)
    Xl = cp.Variable((n, n), name="X_lower", symmetric=True)
    G = C_obs - h.S @ P @ C_base
    block = cp.bmat([[Xu - Xl, G], [G.T, np.eye(r)]])
    constraints = [block >> 0, Xu >= 0, Xl >= 0]
    objective = cp.Minimize(
        cp.sum(cp.multiply(rp.uset.upper, Xu)) - cp.sum(cp.multiply(rp.uset.lower, Xl))
    )
    problem = cp.Problem(objective, constraints)
    return ConicProgram(
        problem=problem,
        P_var=P,
        Xu_var=Xu,
        Xl_var=Xl,
        n=n,
        m=m,
        T=T,
        r=r,
        block_size=n + r,
        unscale=1.0 / d**2,
        C_obs=C_obs,
        C_base=C_base,
    )


_STATUS_MAP = {
    cp.OPTIMAL: "optimal",
    cp.OPTIMAL_INACCURATE: "near_optimal",
}


def solve_robust(
    rp: RobustProblem, tol: float = 1e-7, solver: str | None = None
) -> RobustSolution:
    """Solve the reconciliation SDP and return P with its certificates."""
    prog = build_sdp(rp)
    solvers = [solver] if solver else []
    for cand in ("CLARABEL", "SCS"):
        if cand not in solvers and cand in cp.installed_solvers():
            solvers.append(cand)
    if not solvers:
        raise SolverError("no conic solver with PSD support is installed")

    verbose = os.environ.get("HIREC_SOLVER_VERBOSE", "") not in ("", "0")
    last_exc: Exception | None = None
    for name in solvers:
        try:
            if name == "CLARABEL":
                prog.problem.solve(
                    solver=name,
                    verbose=verbose,
                    tol_feas=tol,
                    tol_gap_abs=tol,
                    tol_gap_rel=tol,
                )
            elif name == "SCS":
                prog.problem.solve(solver=name, verbose=verbose, eps=tol, max_iters=100_000)
            else:
                prog.problem.solve(solver=name, verbose=verbose)
        except (cp.SolverError, Exception) as exc:  # solver-specific failures
            last_exc = exc
            continue
        status = _STATUS_MAP.get(prog.problem.status)
        if status is not None:
            gap = _duality_gap(prog)
            return RobustSolution(
                P=np.asarray(prog.P_var.value),
                X_upper=np.asarray(prog.Xu_var.value) * prog.unscale,
                X_lower=np.asarray(prog.Xl_var.value) * prog.unscale,
                objective=float(prog.problem.value) * prog.unscale,
                solver_status=status,
                duality_gap_cert=gap * prog.unscale,
            )
        last_exc = SolverError(
            f"{name} returned status {prog.problem.status!r}"
        )
    raise SolverError(f"robust solve failed: {last_exc}")


def _duality_gap(prog: ConicProgram) -> float:
    """|primal - dual| objective gap recovered from the PSD constraint dual."""
    Z = prog.problem.constraints[0].dual_value
    if Z is None:
        return float("nan")
    n = prog.n
    Z12 = Z[:n, n:]
    Z22 = Z[n:, n:]
    dual_obj = -2.0 * float(np.sum(Z12 * prog.C_obs)) - float(np.trace(Z22))
    return abs(float(prog.problem.value) - dual_obj)


def _project_box_psd(
    W: np.ndarray, lower: np.ndarray, upper: np.ndarray, rounds: int = 100
) -> np.ndarray:
    """Alternate box clipping and PSD eigenvalue clipping."""
    for _ in range(rounds):
        prev = W
        W = np.clip(W, lower, upper)
        W = 0.5 * (W + W.T)
        vals, vecs = np.linalg.eigh(W)
        if vals[0] >= 0.0:
            if np.max(np.abs(W - prev)) < 1e-14:
                break
        W = (vecs * np.maximum(vals, 0.0)) @ vecs.T
    return W


def _box_feasible_value(
    W: np.ndarray, M: np.ndarray, lower: np.ndarray, upper: np.ndarray, tol: float
) -> float | None:
    W = np.clip(0.5 * (W + W.T), lower, upper)
    if np.linalg.eigvalsh(W)[0] < -tol:
        return None
    return float(np.sum(M * W))


def inner_max_oracle(
    P: np.ndarray,
    uset: UncertaintySet,
    rp: RobustProblem,
    n_starts: int = 20,
    iters: int = 500,
    seed: int = 0,
) -> float:
    """Brute-force value of the inner maximization at a fixed P.

    Maximizes sum_t e_t' W e_t over the box intersected with the PSD
    cone by projected gradient ascent from seeded starts, plus box-vertex
    candidates (filtered for PSD) when n <= 3.  Intended for small n.
    """
    E = residual_matrix(rp, P)
    M = E @ E.T
    M = 0.5 * (M + M.T)
    lower, upper = uset.lower, uset.upper
    n = lower.shape[0]
    scale = max(float(np.max(np.abs(upper))), 1.0)
    feas_tol = 1e-9 * scale

    best = -np.inf

    def consider(W: np.ndarray) -> None:
        nonlocal best
        val = _box_feasible_value(W, M, lower, upper, feas_tol)
        if val is not None and val > best:
            best = val

    # Greedy corner (exact optimum whenever it happens to be PSD) and
    # a few deterministic candidates.
    consider(np.where(M >= 0.0, upper, lower))
    consider(upper.copy())
    consider(0.5 * (lower + upper))
    consider(_project_box_psd(np.where(M >= 0.0, upper, lower), lower, upper))

    if n <= 3:
        iu = np.triu_indices(n)
        k = len(iu[0])
        for mask in range(2**k):
            W = np.empty((n, n))
            for pos in range(k):
                i, j = iu[0][pos], iu[1][pos]
                v = upper[i, j] if (mask >> pos) & 1 else lower[i, j]
                W[i, j] = W[j, i] = v
            consider(W)

    width = float(np.max(upper - lower))
    grad_norm = max(float(np.linalg.norm(M)), 1e-12)
    for start in range(n_starts):
        rng = np.random.default_rng([seed, start])
        U = rng.uniform(size=(n, n))
        W = lower + 0.5 * (U + U.T) * (upper - lower)
        W = _project_box_psd(W, lower, upper)
        for k_it in range(iters):
            step = (0.5 * width / grad_norm) / np.sqrt(k_it + 1.0)
            W = _project_box_psd(W + step * M, lower, upper)
        consider(W)

    return best


def sample_feasible_covariances(
    uset: UncertaintySet, count: int, seed: int = 0, max_tries: int = 50
) -> list[np.ndarray]:
    """PSD matrices verified to lie inside the box, for dominance checks."""
    lower, upper = uset.lower, uset.upper
    n = lower.shape[0]
    scale = max(float(np.max(np.abs(upper))), 1.0)
    tol = 1e-9 * scale
    out: list[np.ndarray] = []
    rng = np.random.default_rng(seed)
    tries = 0
    while len(out) < count and tries < count * max_tries:
        tries += 1
        U = rng.uniform(size=(n, n))
        W = lower + 0.5 * (U + U.T) * (upper - lower)
        W = _project_box_psd(W, lower, upper, rounds=500)
        W = np.clip(0.5 * (W + W.T), lower, upper)
        if np.linalg.eigvalsh(W)[0] >= -tol:
            # Nudge onto the PSD cone exactly.
            vals, vecs = np.linalg.eigh(W)
            W_psd = (vecs * np.maximum(vals, 0.0)) @ vecs.T
            if np.all(W_psd >= lower - tol) and np.all(W_psd <= upper + tol):
                out.append(W_psd)
    return out
