import numpy as np
import pytest

from hirec import covariance as cov_mod
from hirec._boot_py import bootstrap_covariances as boot_py
from hirec.covariance import (
    UncertaintySet,
    bootstrap_cov_samples,
    bounds_from_samples,
    build_uncertainty_set,
    ensure_strict_feasibility,
    estimate_cov,
    shrink,
    shrinkage_intensity,
)
from hirec.dataset import make_panel


def panels_from_residuals(h, resid):
    """Observation/in-sample pair whose residual matrix is ``resid``."""
    T = resid.shape[1]
    ts = [f"t{t:04d}" for t in range(T)]
    obs = make_panel(h, resid, ts, "forecasts")
    ins = make_panel(h, np.zeros_like(resid), ts, "forecasts")
    return obs, ins


def reference_shrinkage(resid):
    """Independent loop-coded shrinkage reference.

    Standardize each series, form the products w_tij, estimate the
    correlations and their sampling variance, and combine them into the
    intensity; output is lam*diag(W) + (1-lam)*W.
    """
    n, T = resid.shape
    e = resid - resid.mean(axis=1, keepdims=True)
    W = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            W[i, j] = np.dot(e[i], e[j]) / (T - 1)
    s = np.array([np.sqrt(W[i, i]) for i in range(n)])
    num = 0.0
    den = 0.0
    for i in range(n):
        for j in range(n):
            if i == j or s[i] == 0.0 or s[j] == 0.0:
                continue
            w = np.array([e[i, t] / s[i] * e[j, t] / s[j] for t in range(T)])
            w_bar = w.mean()
            r_ij = T / (T - 1) * w_bar
            var_r = T / (T - 1) ** 3 * np.sum((w - w_bar) ** 2)
            num += var_r
            den += r_ij**2
    lam = 1.0 if den == 0.0 else min(max(num / den, 0.0), 1.0)
    out = (1.0 - lam) * W
    for i in range(n):
        out[i, i] = W[i, i]
    return out, lam


def test_zero_residuals(tiny_hierarchy):
    obs, ins = panels_from_residuals(tiny_hierarchy, np.zeros((3, 5)))
    est = estimate_cov(obs, ins)
    np.testing.assert_array_equal(est.W, np.zeros((3, 3)))
    assert est.lam == 0.0 and est.T_used == 5


def test_hand_computed_covariance():
    from hirec.hierarchy import build_hierarchy

    h = build_hierarchy([("T", "A")])
    resid = np.array([[1.0, -1.0, 0.0, 0.0], [0.0, 0.0, 1.0, -1.0]])
    obs, ins = panels_from_residuals(h, resid)
    est = estimate_cov(obs, ins)
    np.testing.assert_allclose(est.W, np.diag([2 / 3, 2 / 3]), atol=1e-15)


def test_covariance_scales_quadratically(tiny_hierarchy):
    rng = np.random.default_rng(0)
    resid = rng.standard_normal((3, 30))
    obs1, ins1 = panels_from_residuals(tiny_hierarchy, resid)
    obs2, ins2 = panels_from_residuals(tiny_hierarchy, 3.0 * resid)
    np.testing.assert_allclose(
        estimate_cov(obs2, ins2).W, 9.0 * estimate_cov(obs1, ins1).W, rtol=1e-12
    )


def test_covariance_brute_force_oracle(fig_hierarchy):
    rng = np.random.default_rng(1)
    resid = rng.standard_normal((8, 25))
    obs, ins = panels_from_residuals(fig_hierarchy, resid)
    est = estimate_cov(obs, ins)
    centered = resid - resid.mean(axis=1, keepdims=True)
    brute = sum(np.outer(centered[:, t], centered[:, t]) for t in range(25)) / 24
    np.testing.assert_allclose(est.W, brute, atol=1e-12)


def test_shrink_degenerate_no_correlation():
    from hirec.hierarchy import build_hierarchy

    h = build_hierarchy([("T", "A")])
    resid = np.array([[1.0, -1.0, 0.0, 0.0], [0.0, 0.0, 1.0, -1.0]])
    obs, ins = panels_from_residuals(h, resid)
    est = shrink(estimate_cov(obs, ins))
    assert est.lam == 1.0
    np.testing.assert_allclose(est.W, np.diag(np.diag(est.W)))


def test_shrink_stable_correlation_small_lambda():
    from hirec.hierarchy import build_hierarchy

    h = build_hierarchy([("T", "A")])
    rng = np.random.default_rng(3)
    x = rng.standard_normal(200)
    resid = np.vstack([x, x])
    obs, ins = panels_from_residuals(h, resid)
    est = shrink(estimate_cov(obs, ins))
    assert est.lam < 0.05


@pytest.mark.parametrize("seed", range(3))
def test_shrink_matches_reference(fig_hierarchy, seed):
    rng = np.random.default_rng(seed)
    resid = rng.standard_normal((8, 50)) * rng.uniform(0.5, 2.0, size=(8, 1))
    obs, ins = panels_from_residuals(fig_hierarchy, resid)
    est = shrink(estimate_cov(obs, ins))
    ref_W, ref_lam = reference_shrinkage(resid)
    assert est.lam == pytest.approx(ref_lam, abs=1e-12)
    np.testing.assert_allclose(est.W, ref_W, atol=1e-12)


def test_shrink_zero_variance_series_excluded(tiny_hierarchy):
    rng = np.random.default_rng(5)
    resid = rng.standard_normal((3, 40))
    resid[1] = 0.0
    lam = shrinkage_intensity(resid)
    assert 0.0 <= lam <= 1.0


def test_shrink_output_positive_definite(fig_hierarchy):
    rng = np.random.default_rng(6)
    # rank-deficient residuals: raw covariance singular, shrunk is PD
    resid = rng.standard_normal((8, 5))
    obs, ins = panels_from_residuals(fig_hierarchy, resid)
    est = shrink(estimate_cov(obs, ins))
    assert est.lam > 0.0
    assert np.linalg.eigvalsh(est.W)[0] > 0.0


def bootstrap_setup(h, seed=0, T=30):
    rng = np.random.default_rng(seed)
    resid = rng.standard_normal((h.n, T))
    return panels_from_residuals(h, resid)


def test_bounds_alpha_one_are_min_max(tiny_hierarchy):
    obs, ins = bootstrap_setup(tiny_hierarchy)
    samples, _ = bootstrap_cov_samples(obs, ins, n_boot=40, seed=2)
    lower, upper = bounds_from_samples(samples, 1.0)
    np.testing.assert_allclose(lower, samples.min(axis=0), atol=1e-14)
    np.testing.assert_allclose(upper, samples.max(axis=0), atol=1e-14)


def test_single_resample_collapses_bounds(tiny_hierarchy):
    obs, ins = bootstrap_setup(tiny_hierarchy)
    samples, _ = bootstrap_cov_samples(obs, ins, n_boot=1, seed=3)
    lower, upper = bounds_from_samples(samples, 0.5)
    np.testing.assert_allclose(lower, upper, atol=1e-14)
    np.testing.assert_allclose(lower, samples[0], atol=1e-14)


def test_alpha_monotonicity(tiny_hierarchy):
    obs, ins = bootstrap_setup(tiny_hierarchy)
    samples, _ = bootstrap_cov_samples(obs, ins, n_boot=60, seed=4)
    l1, u1 = bounds_from_samples(samples, 0.5)
    l2, u2 = bounds_from_samples(samples, 0.9)
    assert np.all(l2 <= l1 + 1e-15) and np.all(u2 >= u1 - 1e-15)


def test_bootstrap_deterministic(tiny_hierarchy):
    obs, ins = bootstrap_setup(tiny_hierarchy)
    a = build_uncertainty_set(obs, ins, n_boot=25, alpha=0.8, seed=9)
    b = build_uncertainty_set(obs, ins, n_boot=25, alpha=0.8, seed=9)
    np.testing.assert_array_equal(a.lower, b.lower)
    np.testing.assert_array_equal(a.upper, b.upper)


def test_bootstrap_symmetric_bounds(fig_hierarchy):
    obs, ins = bootstrap_setup(fig_hierarchy, seed=7)
    uset = build_uncertainty_set(obs, ins, n_boot=50, alpha=0.7, seed=1)
    np.testing.assert_allclose(uset.lower, uset.lower.T, atol=1e-14)
    np.testing.assert_allclose(uset.upper, uset.upper.T, atol=1e-14)
    assert np.all(uset.lower <= uset.upper + 1e-15)
    assert np.all(np.diag(uset.upper) > 0.0)


def test_median_within_bounds(tiny_hierarchy):
    obs, ins = bootstrap_setup(tiny_hierarchy, seed=8, T=40)
    samples, _ = bootstrap_cov_samples(obs, ins, n_boot=200, seed=5)
    lower, upper = bounds_from_samples(samples, 0.5)
    med = np.median(samples, axis=0)
    assert np.all(lower <= med + 1e-12) and np.all(med <= upper + 1e-12)


def test_feasibility_guard_inflates_degenerate_box(tiny_hierarchy):
    # a box that excludes every PD matrix: upper diagonal forced negative
    lower = np.full((3, 3), -2.0)
    upper = np.full((3, 3), -1.0)
    uset = UncertaintySet(lower=lower, upper=upper, alpha=0.5, n_boot=1)
    with pytest.warns(UserWarning):
        out = ensure_strict_feasibility(uset, np.eye(3))
    assert np.all(out.upper >= uset.upper)


def test_kernel_parity(fig_hierarchy):
    if not cov_mod.COMPILED_KERNEL:
        pytest.skip("compiled kernel not built")
    rng = np.random.default_rng(11)
    resid = rng.standard_normal((8, 33))
    idx = rng.integers(0, 33, size=(20, 33)).astype(np.int64)
    fast = cov_mod._boot.bootstrap_covariances(resid, idx, 0.3)
    slow = boot_py(resid, idx, 0.3)
    np.testing.assert_allclose(fast, slow, atol=1e-11)


def test_uncertainty_set_round_trip(tmp_path, tiny_hierarchy):
    obs, ins = bootstrap_setup(tiny_hierarchy)
    uset = build_uncertainty_set(obs, ins, n_boot=15, alpha=0.6, seed=12)
    path = tmp_path / "uset.csv"
    cov_mod.save_uncertainty_set(uset, str(path))
    again = cov_mod.load_uncertainty_set(str(path))
    np.testing.assert_array_equal(again.lower, uset.lower)
    np.testing.assert_array_equal(again.upper, uset.upper)
    assert again.alpha == uset.alpha
    assert again.n_boot == uset.n_boot
    assert again.seed == uset.seed
