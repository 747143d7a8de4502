"""Command-line entry points: fit, simulate, loocv, calibrate."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .bench import (
    ExperimentManifest,
    emit_loocv_outputs,
    emit_outputs,
    run_loocv,
    run_monte_carlo,
    screen_predictors,
)
from .estimators import fit_l1pcr, fit_lasso, fit_rpcr
from .pcbasis import Dataset, basis_from_raw, load_dataset_csv
from .results import FitResult
from .tuning import Lambda0Config, calibrate_lambda0


def _fit_to_json(fit: FitResult, names: list[str] | None) -> dict:
    support = [int(j) for j in fit.support]
    coefs = {int(j): float(fit.theta_hat[j]) for j in fit.support}
    out = {
        "method": fit.method_tag,
        "dimension": int(fit.theta_hat.shape[0]),
        "intercept": fit.intercept,
        "lambda_used": fit.lambda_used,
        "support": support,
        "support_size": len(support),
        "coefficients": coefs,
    }
    if names is not None and fit.method_tag == "LASSO":
        out["support_names"] = [names[j] for j in support]
    return out


def _write_coef_csv(path: str, fit: FitResult, names: list[str] | None) -> None:
    named = names is not None and fit.method_tag == "LASSO"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "name", "coefficient"] if named
                        else ["index", "coefficient"])
        for j, v in enumerate(fit.theta_hat):
            row = [j, names[j], format(float(v), ".17g")] if named \
                else [j, format(float(v), ".17g")]
            writer.writerow(row)


def _cmd_fit(args) -> int:
    data, names = load_dataset_csv(args.data, args.response)
    cfg = {}
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
    if args.penalty:
        cfg["family"] = args.penalty
    if args.penalty_a is not None:
        cfg["a"] = args.penalty_a
    if args.method == "rpcr":
        allowed = {"family", "a"}
        fit = fit_rpcr(data, **{k: v for k, v in cfg.items() if k in allowed})
    elif args.method == "l1pcr":
        allowed = {"lam", "cv_folds", "rng_seed"}
        fit = fit_l1pcr(data, **{k: v for k, v in cfg.items() if k in allowed})
    else:
        allowed = {"cv_folds", "rng_seed"}
        fit = fit_lasso(data, **{k: v for k, v in cfg.items() if k in allowed})
    print(json.dumps(_fit_to_json(fit, names), indent=2, sort_keys=True))
    if args.coef_out:
        _write_coef_csv(args.coef_out, fit, names)
    return 0


def _cmd_simulate(args) -> int:
    manifest = ExperimentManifest.from_dict(
        json.loads(Path(args.manifest).read_text()))
    result = run_monte_carlo(manifest)
    paths = emit_outputs(result, args.out, svg=args.svg)
    for p in paths:
        print(p)
    n_fail = len(result.failures)
    if n_fail:
        print(f"{n_fail} replicate fit(s) failed; see failures.csv",
              file=sys.stderr)
        return 1
    return 0


def _cmd_loocv(args) -> int:
    data, names = load_dataset_csv(args.data, args.response)
    c_grid = [float(c) for c in args.c_grid.split(",") if c.strip() != ""]
    if not c_grid:
        raise ValueError("--c-grid is empty")
    X = data.Z
    if args.screen_k:
        keep = screen_predictors(X, data.y, args.screen_k)
        X = X[:, keep]
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "screened_columns.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["rank", "column_index", "column_name"])
            for rank, j in enumerate(keep):
                writer.writerow([rank, int(j), names[int(j)]])
    methods = tuple(args.methods.split(","))
    result = run_loocv(Dataset.from_arrays(X, data.y), c_grid,
                       methods=methods, rng_seed=args.seed)
    for p in emit_loocv_outputs(result, args.out):
        print(p)
    for row in result.summary:
        print(f"c={row['c']:g} {row['method']}: mspe={row['mspe']:.6g}")
    return 0


def _cmd_calibrate(args) -> int:
    if args.response:
        data, _ = load_dataset_csv(args.data, args.response)
    else:
        # no response column: every column is a predictor; borrow the loader
        # by treating column 0 as y, then stack it back in front
        with open(args.data, newline="") as fh:
            header = next(csv.reader(fh))
        data, _ = load_dataset_csv(args.data, header[0].strip())
        data = Dataset.from_arrays(
            np.column_stack([data.y[:, None], data.Z]), np.zeros(data.y.shape[0]))
    basis, _ = basis_from_raw(data)
    cfg = Lambda0Config(c=args.c, alpha0=args.alpha0, B=args.B,
                        rng_seed=args.seed)
    lam0 = calibrate_lambda0(basis.Utilde, cfg)
    n, m = basis.Utilde.shape
    print(json.dumps({
        "n": n,
        "basis_size": m,
        "lambda0": lam0,
        "c": cfg.c,
        "alpha0": cfg.alpha0,
        "B": cfg.B,
        "rng_seed": cfg.rng_seed,
    }, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rpcr",
        description="Rank-based sparse principal-components regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit one model to a CSV dataset")
    p_fit.add_argument("--method", required=True,
                       choices=("rpcr", "l1pcr", "lasso"))
    p_fit.add_argument("--data", required=True, help="CSV with header row")
    p_fit.add_argument("--response", required=True, help="response column name")
    p_fit.add_argument("--config", help="JSON file with method options")
    p_fit.add_argument("--penalty", choices=("scad", "mcp"),
                       help="concave family for rpcr")
    p_fit.add_argument("--penalty-a", type=float, dest="penalty_a",
                       help="concavity parameter a")
    p_fit.add_argument("--coef-out", dest="coef_out",
                       help="write the full coefficient vector to this CSV")
    p_fit.set_defaults(func=_cmd_fit)

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo sweep manifest")
    p_sim.add_argument("--manifest", required=True, help="manifest JSON file")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--svg", action="store_true",
                       help="also emit a line chart")
    p_sim.set_defaults(func=_cmd_simulate)

    p_loo = sub.add_parser(
        "loocv", help="leave-one-out error under added predictor noise")
    p_loo.add_argument("--data", required=True)
    p_loo.add_argument("--response", required=True)
    p_loo.add_argument("--screen-k", type=int, default=0, dest="screen_k",
                       help="keep the k predictors most correlated with y")
    p_loo.add_argument("--c-grid", required=True, dest="c_grid",
                       help="comma-separated contamination levels")
    p_loo.add_argument("--seed", type=int, default=0)
    p_loo.add_argument("--methods", default="RPCR,L1PCR,LASSO")
    p_loo.add_argument("--out", required=True)
    p_loo.set_defaults(func=_cmd_loocv)

    p_cal = sub.add_parser(
        "calibrate", help="print the simulated stage-1 level for a dataset")
    p_cal.add_argument("--data", required=True)
    p_cal.add_argument("--response",
                       help="response column to exclude from the design")
    p_cal.add_argument("--c", type=float, default=1.01)
    p_cal.add_argument("--alpha0", type=float, default=0.10)
    p_cal.add_argument("--B", type=int, default=500)
    p_cal.add_argument("--seed", type=int, default=0)
    p_cal.set_defaults(func=_cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
