import numpy as np
import pytest

from hirec.dataset import make_panel
from hirec.evaluation import (
    format_report,
    relative_report,
    save_report_csv,
    score,
)


def fpanel(h, values):
    T = values.shape[1]
    return make_panel(h, values, [f"t{t}" for t in range(T)], "forecasts")


def test_zero_error_scores(tiny_hierarchy):
    vals = np.arange(6, dtype=float).reshape(3, 2)
    s = score(fpanel(tiny_hierarchy, vals), fpanel(tiny_hierarchy, vals))
    assert s == {"T": (0.0, 0.0), "A": (0.0, 0.0), "B": (0.0, 0.0)}


def test_hand_computed_mae_rmse(tiny_hierarchy):
    actual = np.zeros((3, 2))
    fc = np.array([[1.0, -1.0], [0.0, 2.0], [3.0, 4.0]])
    s = score(fpanel(tiny_hierarchy, actual), fpanel(tiny_hierarchy, fc))
    # errors (+1,-1): mae 1, rmse 1
    assert s["T"] == (1.0, 1.0)
    # errors (0,2): mae 1, rmse sqrt(2)
    assert s["A"][0] == pytest.approx(1.0)
    assert s["A"][1] == pytest.approx(np.sqrt(2.0))
    assert s["B"][0] == pytest.approx(3.5)
    assert s["B"][1] == pytest.approx(np.sqrt(12.5))


def test_rmse_at_least_mae(fig_hierarchy):
    rng = np.random.default_rng(0)
    a = fpanel(fig_hierarchy, rng.standard_normal((8, 9)))
    f = fpanel(fig_hierarchy, rng.standard_normal((8, 9)))
    for mae, rmse in score(a, f).values():
        assert rmse >= mae - 1e-12


def test_score_shape_mismatch(tiny_hierarchy):
    a = fpanel(tiny_hierarchy, np.ones((3, 2)))
    f = fpanel(tiny_hierarchy, np.ones((3, 3)))
    with pytest.raises(ValueError, match="shapes differ"):
        score(a, f)


def make_scores(h, mae_map):
    return {lab: (mae_map[lab], mae_map[lab]) for lab in h.labels}


def test_relative_means_and_population_std(tiny_hierarchy):
    h = tiny_hierarchy
    base = make_scores(h, {"T": 1.0, "A": 1.0, "B": 1.0})
    # level 1 ratios (0.8, 1.2): mean 1.0, population std 0.2
    meth = make_scores(h, {"T": 0.5, "A": 0.8, "B": 1.2})
    rep = relative_report(base, {"m": meth}, h)
    st0 = rep.per_level["m"][0]
    st1 = rep.per_level["m"][1]
    assert st0.rel_mae_mean == pytest.approx(0.5)
    assert st0.rel_mae_std is None
    assert st1.rel_mae_mean == pytest.approx(1.0)
    assert st1.rel_mae_std == pytest.approx(0.2)
    assert st1.n_excluded == 0


def test_level_partition_sizes(fig_hierarchy):
    levels = fig_hierarchy.levels()
    assert [len(levels[k]) for k in sorted(levels)] == [1, 2, 5]


def test_method_equal_to_base_is_all_ones(fig_hierarchy):
    rng = np.random.default_rng(1)
    vals = {lab: float(v) for lab, v in
            zip(fig_hierarchy.labels, rng.uniform(0.5, 3.0, 8))}
    base = make_scores(fig_hierarchy, vals)
    rep = relative_report(base, {"same": dict(base)}, fig_hierarchy)
    for lvl, st in rep.per_level["same"].items():
        assert st.rel_mae_mean == pytest.approx(1.0)
        assert st.rel_rmse_mean == pytest.approx(1.0)
        if st.rel_mae_std is not None:
            assert st.rel_mae_std == pytest.approx(0.0)


def test_zero_base_series_excluded(tiny_hierarchy):
    h = tiny_hierarchy
    base = make_scores(h, {"T": 1.0, "A": 0.0, "B": 2.0})
    meth = make_scores(h, {"T": 1.0, "A": 1.0, "B": 1.0})
    rep = relative_report(base, {"m": meth}, h)
    st1 = rep.per_level["m"][1]
    assert st1.n_excluded == 1
    assert st1.rel_mae_mean == pytest.approx(0.5)


def test_best_method_flagged(tiny_hierarchy):
    h = tiny_hierarchy
    base = make_scores(h, {"T": 1.0, "A": 1.0, "B": 1.0})
    worse = make_scores(h, {"T": 2.0, "A": 2.0, "B": 2.0})
    better = make_scores(h, {"T": 0.5, "A": 0.5, "B": 0.5})
    rep = relative_report(base, {"w": worse, "b": better}, h)
    assert rep.best[("mae", 0)] == "b"
    assert rep.best[("rmse", 1)] == "b"
    text = format_report(rep)
    assert "*" in text and "relative MAE" in text and "±" in text


def test_label_set_mismatch(tiny_hierarchy):
    base = make_scores(tiny_hierarchy, {"T": 1.0, "A": 1.0, "B": 1.0})
    bad = {"T": (1.0, 1.0)}
    with pytest.raises(ValueError, match="different label set"):
        relative_report(base, {"m": bad}, tiny_hierarchy)


def test_csv_export(tmp_path, tiny_hierarchy):
    h = tiny_hierarchy
    base = make_scores(h, {"T": 1.0, "A": 1.0, "B": 1.0})
    meth = make_scores(h, {"T": 0.5, "A": 0.8, "B": 1.2})
    rep = relative_report(base, {"m": meth}, h)
    path = tmp_path / "report.csv"
    save_report_csv(rep, str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "metric,level,method,mean,std,n_excluded"
    # 2 metrics x 2 levels x 1 method
    assert len(lines) == 5
    row = lines[1].split(",")
    assert row[:3] == ["mae", "0", "m"] and float(row[3]) == 0.5 and row[4] == ""
