"""Command-line pipeline: simulate, forecast, tune-alpha, reconcile, evaluate.

Configuration comes from a flat ``key = value`` file plus flag overrides
(flags win).  Exit codes: 0 ok, 2 config/input error, 3 numeric or
solver failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from . import base_forecast, covariance, evaluation, reconcile, robust_sdp
from .dataset import PanelError, SeriesPanel, load_panel, make_panel, save_panel, synth_generate
from .hierarchy import HierarchyError, load_hierarchy

ALL_METHODS = ("bu", "td", "ols", "mint", "robust")
DEFAULT_ALPHAS = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


class ConfigError(ValueError):
    """Raised for unusable configuration."""


@dataclass(frozen=True)
class RunConfig:
    hierarchy_path: str = ""
    data_path: str = ""
    test_path: str = ""
    synth: bool = False
    synth_train: int = 96
    synth_test: int = 12
    synth_shift: float = 0.0
    base_method: str = "linear_trend_seasonal"
    period: int = 4
    methods: tuple[str, ...] = ALL_METHODS
    n_boot: int = 5000
    alpha_mode: str = "validate"
    alpha: float | None = None
    alpha_candidates: tuple[float, ...] = DEFAULT_ALPHAS
    split_ratio: float = 0.9
    seed: int = 0
    solver_tol: float = 1e-7
    window: int | None = None
    out_dir: str = "out"

    def __post_init__(self) -> None:
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError(f"split_ratio must be in (0, 1), got {self.split_ratio}")
        for a in self.alpha_candidates:
            if not 0.0 < a <= 1.0:
                raise ConfigError(f"alpha candidate {a} outside (0, 1]")
        if self.alpha is not None and not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha {self.alpha} outside (0, 1]")
        if self.alpha_mode not in ("validate", "fixed"):
            raise ConfigError(f"alpha_mode must be validate|fixed, got {self.alpha_mode!r}")
        if self.alpha_mode == "fixed" and self.alpha is None:
            raise ConfigError("alpha_mode=fixed requires alpha")
        for mth in self.methods:
            if mth not in ALL_METHODS:
                raise ConfigError(f"unknown method {mth!r}")


def read_config(path: str) -> dict[str, str]:
    """Parse a flat ``key = value`` config file."""
    out: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, _, value = line.partition("=")
                out[key.strip()] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return out


def config_from_mapping(raw: dict[str, str]) -> RunConfig:
    """Coerce string key/values into a RunConfig."""
    kwargs: dict = {}
    valid = {f.name for f in fields(RunConfig)}
    for key, value in raw.items():
        if key not in valid:
            raise ConfigError(f"unknown config key {key!r}")
        if key in ("methods",):
            kwargs[key] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key in ("alpha_candidates",):
            kwargs[key] = tuple(float(v) for v in value.split(",") if v.strip())
        elif key in ("synth_train", "synth_test", "period", "n_boot", "seed"):
            kwargs[key] = int(value)
        elif key in ("synth_shift", "split_ratio", "solver_tol"):
            kwargs[key] = float(value)
        elif key == "alpha":
            kwargs[key] = None if value in ("", "none") else float(value)
        elif key == "window":
            kwargs[key] = None if value in ("", "none") else int(value)
        elif key == "synth":
            kwargs[key] = value.lower() in ("1", "true", "yes")
        else:
            kwargs[key] = value
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _mean_rmse(actual: SeriesPanel, forecast: SeriesPanel) -> float:
    scores = evaluation.score(actual, forecast)
    return float(np.mean([s[1] for s in scores.values()]))


def tune_alpha(cfg: RunConfig, obs: SeriesPanel) -> float:
    """Pick alpha by chronological 9:1 (by default) validation RMSE.

    The base forecaster is refit on the train split; for each candidate
    the uncertainty set is built on the train residuals, the robust
    problem solved, and validation-period base forecasts reconciled.
    Ties go to the smaller alpha.
    """
    h = obs.h
    T = obs.T
    split = math.ceil(cfg.split_ratio * T)
    horizon = T - split
    if horizon < 2:
        raise ConfigError(
            f"validation segment needs >= 2 points, got {horizon} (T={T})"
        )
    train = make_panel(h, obs.values[:, :split], obs.timestamps[:split], "observations")
    val = make_panel(h, obs.values[:, split:], obs.timestamps[split:], "observations")
    ins, fut = base_forecast.fit_predict(train, cfg.base_method, horizon, cfg.period)

    samples, lam = covariance.bootstrap_cov_samples(train, ins, cfg.n_boot, cfg.seed)
    W_ref = covariance._shrink_matrix(covariance.estimate_cov(train, ins).W, lam)

    best_alpha: float | None = None
    best_rmse = np.inf
    failures: list[str] = []
    for alpha in sorted(cfg.alpha_candidates):
        lower, upper = covariance.bounds_from_samples(samples, alpha)
        uset = covariance.UncertaintySet(
            lower=lower, upper=upper, alpha=alpha, n_boot=cfg.n_boot, seed=cfg.seed
        )
        uset = covariance.ensure_strict_feasibility(uset, W_ref)
        rp = robust_sdp.RobustProblem(
            h=h, obs=train, insample=ins, uset=uset, window=cfg.window
        )
        try:
            sol = robust_sdp.solve_robust(rp, tol=cfg.solver_tol)
        except robust_sdp.SolverError as exc:
            failures.append(f"alpha={alpha}: {exc}")
            continue
        rec = reconcile.apply_reconciliation(
            reconcile.ReconciliationMatrix(P=sol.P, method="robust"), fut
        )
        rmse = _mean_rmse(val, rec)
        if rmse < best_rmse:
            best_rmse = rmse
            best_alpha = alpha
    if best_alpha is None:
        raise robust_sdp.SolverError(
            "no alpha candidate produced a solution: " + "; ".join(failures)
        )
    return best_alpha


def _build_reconcilers(
    cfg: RunConfig,
    obs: SeriesPanel,
    insample: SeriesPanel,
) -> tuple[dict[str, reconcile.ReconciliationMatrix], dict]:
    """Reconciliation matrices for every configured method."""
    h = obs.h
    out: dict[str, reconcile.ReconciliationMatrix] = {}
    extras: dict = {}
    for mth in cfg.methods:
        if mth == "bu":
            out[mth] = reconcile.bottom_up(h)
        elif mth == "td":
            out[mth] = reconcile.top_down(h, obs)
        elif mth == "ols":
            out[mth] = reconcile.ols(h)
        elif mth == "mint":
            cov = covariance.shrink(covariance.estimate_cov(obs, insample))
            out[mth] = reconcile.mint(h, cov)
        elif mth == "robust":
            if cfg.alpha_mode == "fixed":
                alpha = cfg.alpha
            else:
                alpha = tune_alpha(cfg, obs)
            uset = covariance.build_uncertainty_set(
                obs, insample, cfg.n_boot, alpha, cfg.seed
            )
            rp = robust_sdp.RobustProblem(
                h=h, obs=obs, insample=insample, uset=uset, window=cfg.window
            )
            sol = robust_sdp.solve_robust(rp, tol=cfg.solver_tol)
            out[mth] = reconcile.ReconciliationMatrix(P=sol.P, method="robust")
            extras["alpha"] = alpha
            extras["uset"] = uset
            extras["solution"] = sol
    return out, extras


def run_pipeline(cfg: RunConfig) -> evaluation.EvalReport:
    """ingest -> base forecast -> reconcile each method -> evaluate -> report."""
    if not cfg.hierarchy_path:
        raise ConfigError("hierarchy_path is required")
    h = load_hierarchy(cfg.hierarchy_path)
    os.makedirs(cfg.out_dir, exist_ok=True)

    if cfg.synth:
        train, test = synth_generate(
            h, cfg.synth_train, cfg.synth_test, cfg.seed, cfg.synth_shift
        )
        save_panel(train, os.path.join(cfg.out_dir, "train.csv"))
        save_panel(test, os.path.join(cfg.out_dir, "test.csv"))
    else:
        if not cfg.data_path or not cfg.test_path:
            raise ConfigError("data_path and test_path are required unless synth=true")
        train = load_panel(h, cfg.data_path, "observations")
        test = load_panel(h, cfg.test_path, "observations")

    insample, future = base_forecast.fit_predict(
        train, cfg.base_method, test.T, cfg.period
    )
    save_panel(insample, os.path.join(cfg.out_dir, "base_insample.csv"))
    save_panel(future, os.path.join(cfg.out_dir, "base_future.csv"))

    matrices, extras = _build_reconcilers(cfg, train, insample)
    method_scores: dict[str, evaluation.Scores] = {}
    for name, rm in matrices.items():
        reconcile.save_reconciliation_matrix(
            rm, os.path.join(cfg.out_dir, f"P_{name}.csv")
        )
        coherent = reconcile.apply_reconciliation(rm, future)
        save_panel(coherent, os.path.join(cfg.out_dir, f"forecast_{name}.csv"))
        method_scores[name] = evaluation.score(test, coherent)

    if "uset" in extras:
        covariance.save_uncertainty_set(
            extras["uset"], os.path.join(cfg.out_dir, "uncertainty_set.csv")
        )
    if "alpha" in extras:
        with open(os.path.join(cfg.out_dir, "alpha.txt"), "w", encoding="utf-8") as fh:
            fh.write(f"{extras['alpha']}\n")

    base_scores = evaluation.score(test, future)
    report = evaluation.relative_report(base_scores, method_scores, h)
    text = evaluation.format_report(report)
    with open(os.path.join(cfg.out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    evaluation.save_report_csv(report, os.path.join(cfg.out_dir, "report.csv"))
    print(text)
    return report


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--hierarchy", dest="hierarchy_path", help="parent,child CSV")
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument("--seed", type=int, dest="seed")


def _add_base(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--base-method", dest="base_method", choices=base_forecast.METHODS)
    parser.add_argument("--period", type=int, dest="period")


def _add_robust(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-boot", type=int, dest="n_boot")
    parser.add_argument("--alpha", type=float, dest="alpha")
    parser.add_argument("--alpha-candidates", dest="alpha_candidates")
    parser.add_argument("--split-ratio", type=float, dest="split_ratio")
    parser.add_argument("--solver-tol", type=float, dest="solver_tol")
    parser.add_argument("--window", type=int, dest="window")


def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hirec", description="hierarchical forecast reconciliation"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic train/test panels")
    _add_common(p)
    p.add_argument("--train-length", type=int, dest="synth_train")
    p.add_argument("--test-length", type=int, dest="synth_test")
    p.add_argument("--shift", type=float, dest="synth_shift")

    p = sub.add_parser("forecast", help="fit base forecasts for a panel")
    _add_common(p)
    _add_base(p)
    p.add_argument("--data", dest="data_path")
    p.add_argument("--horizon", type=int, required=True)

    p = sub.add_parser("tune-alpha", help="validate the uncertainty width")
    _add_common(p)
    _add_base(p)
    _add_robust(p)
    p.add_argument("--data", dest="data_path")

    p = sub.add_parser("reconcile", help="reconcile base forecasts with one method")
    _add_common(p)
    _add_base(p)
    _add_robust(p)
    p.add_argument("--data", dest="data_path")
    p.add_argument("--method", required=True, choices=ALL_METHODS)
    p.add_argument("--horizon", type=int, required=True)

    p = sub.add_parser("evaluate", help="score forecast panels against actuals")
    _add_common(p)
    p.add_argument("--actual", required=True)
    p.add_argument("--base", required=True)
    p.add_argument(
        "--forecast",
        action="append",
        default=[],
        metavar="NAME=PATH",
        help="may be repeated",
    )

    p = sub.add_parser("pipeline", help="end-to-end run from a config file")
    _add_common(p)
    _add_base(p)
    _add_robust(p)
    p.add_argument("--config", help="flat key = value file")
    p.add_argument("--data", dest="data_path")
    p.add_argument("--test", dest="test_path")
    p.add_argument("--synth", action="store_const", const=True, dest="synth")
    p.add_argument("--train-length", type=int, dest="synth_train")
    p.add_argument("--test-length", type=int, dest="synth_test")
    p.add_argument("--shift", type=float, dest="synth_shift")
    p.add_argument("--methods", help="comma-separated subset of " + ",".join(ALL_METHODS))
    return parser


def _cfg_from_args(args: argparse.Namespace, base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    overrides: dict = {}
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is None:
            continue
        if f.name == "alpha_candidates" and isinstance(value, str):
            value = tuple(float(v) for v in value.split(","))
        overrides[f.name] = value
    if getattr(args, "methods", None):
        overrides["methods"] = tuple(
            v.strip() for v in args.methods.split(",") if v.strip()
        )
    if "alpha" in overrides and overrides["alpha"] is not None:
        overrides.setdefault("alpha_mode", "fixed")
    try:
        return replace(cfg, **overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _run(args: argparse.Namespace) -> int:
    if args.command == "pipeline":
        base = (
            config_from_mapping(read_config(args.config))
            if args.config
            else RunConfig()
        )
        cfg = _cfg_from_args(args, base)
        run_pipeline(cfg)
        return 0

    cfg = _cfg_from_args(args)
    if args.command == "simulate":
        if not cfg.hierarchy_path:
            raise ConfigError("--hierarchy is required")
        h = load_hierarchy(cfg.hierarchy_path)
        os.makedirs(cfg.out_dir, exist_ok=True)
        train, test = synth_generate(
            h, cfg.synth_train, cfg.synth_test, cfg.seed, cfg.synth_shift
        )
        save_panel(train, os.path.join(cfg.out_dir, "train.csv"))
        save_panel(test, os.path.join(cfg.out_dir, "test.csv"))
        print(f"wrote {cfg.out_dir}/train.csv and {cfg.out_dir}/test.csv")
        return 0

    if args.command == "forecast":
        h = load_hierarchy(cfg.hierarchy_path)
        obs = load_panel(h, cfg.data_path, "observations")
        ins, fut = base_forecast.fit_predict(
            obs, cfg.base_method, args.horizon, cfg.period
        )
        os.makedirs(cfg.out_dir, exist_ok=True)
        save_panel(ins, os.path.join(cfg.out_dir, "base_insample.csv"))
        save_panel(fut, os.path.join(cfg.out_dir, "base_future.csv"))
        print(f"wrote {cfg.out_dir}/base_insample.csv and {cfg.out_dir}/base_future.csv")
        return 0

    if args.command == "tune-alpha":
        h = load_hierarchy(cfg.hierarchy_path)
        obs = load_panel(h, cfg.data_path, "observations")
        alpha = tune_alpha(cfg, obs)
        print(alpha)
        return 0

    if args.command == "reconcile":
        h = load_hierarchy(cfg.hierarchy_path)
        obs = load_panel(h, cfg.data_path, "observations")
        ins, fut = base_forecast.fit_predict(
            obs, cfg.base_method, args.horizon, cfg.period
        )
        cfg = replace(cfg, methods=(args.method,))
        matrices, extras = _build_reconcilers(cfg, obs, ins)
        os.makedirs(cfg.out_dir, exist_ok=True)
        rm = matrices[args.method]
        reconcile.save_reconciliation_matrix(
            rm, os.path.join(cfg.out_dir, f"P_{args.method}.csv")
        )
        coherent = reconcile.apply_reconciliation(rm, fut)
        save_panel(coherent, os.path.join(cfg.out_dir, f"forecast_{args.method}.csv"))
        if "uset" in extras:
            covariance.save_uncertainty_set(
                extras["uset"], os.path.join(cfg.out_dir, "uncertainty_set.csv")
            )
        print(f"wrote P_{args.method}.csv and forecast_{args.method}.csv to {cfg.out_dir}")
        return 0

    if args.command == "evaluate":
        h = load_hierarchy(cfg.hierarchy_path)
        actual = load_panel(h, args.actual, "observations")
        base = load_panel(h, args.base, "forecasts")
        base_scores = evaluation.score(actual, base)
        method_scores: dict[str, evaluation.Scores] = {}
        for item in args.forecast:
            if "=" not in item:
                raise ConfigError(f"--forecast expects NAME=PATH, got {item!r}")
            name, _, path = item.partition("=")
            panel = load_panel(h, path, "forecasts")
            method_scores[name] = evaluation.score(actual, panel)
        report = evaluation.relative_report(base_scores, method_scores, h)
        print(evaluation.format_report(report))
        return 0

    raise ConfigError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    args = _make_parser().parse_args(argv)
    try:
        return _run(args)
    except (ConfigError, HierarchyError, PanelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (robust_sdp.SolverError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
