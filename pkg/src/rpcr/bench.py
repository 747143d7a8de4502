"""Benchmark harness: seeded Monte Carlo sweeps, contaminated LOOCV, and
CSV/SVG emission.

Replicates are keyed by per-replicate seed streams, so a sweep produces
identical records no matter how it is scheduled; wall times go to a
separate timing file that is excluded from that guarantee.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .estimators import fit_l1pcr, fit_lasso, fit_rpcr, l1pcr_on_design, rpcr_on_design
from .pcbasis import Dataset, basis_from_raw
from .results import FitResult
from .simgen import NoiseSpec, gen_design, gen_noise
from .solver import SolveOptions, cv_lasso_path, default_lasso_grid, solve_lasso_ls

_METHODS = ("RPCR", "L1PCR", "LASSO")

# Monte Carlo fits use the first-order backend: the LP backend is exact but
# costs seconds per solve, which a replicate budget cannot absorb.
_MC_OPTS = SolveOptions(method="smoothed_first_order")


@dataclass(frozen=True)
class ExperimentManifest:
    """One simulation sweep: a design family crossed with noise settings."""

    model: str
    n: int
    p_grid: tuple[int, ...]
    error_law: str
    contamination: str
    replicates: int
    master_seed: int
    methods: tuple[str, ...] = ("RPCR", "L1PCR")
    kappa_grid: tuple[float, ...] | None = None
    parallelism: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.p_grid:
            raise ValueError("p_grid is empty")
        bad = [m for m in self.methods if m not in _METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {_METHODS}")
        if not self.methods:
            raise ValueError("methods is empty")
        if self.model == "M2" and not self.kappa_grid:
            raise ValueError("M2 sweeps need kappa_grid")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")

    @property
    def configs(self) -> list[tuple[int, float | None]]:
        kappas = self.kappa_grid if self.kappa_grid else (None,)
        return [(p, k) for p in self.p_grid for k in kappas]

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "n": self.n,
            "p_grid": list(self.p_grid),
            "error_law": self.error_law,
            "contamination": self.contamination,
            "replicates": self.replicates,
            "master_seed": self.master_seed,
            "methods": list(self.methods),
            "kappa_grid": None if self.kappa_grid is None else list(self.kappa_grid),
            "parallelism": self.parallelism,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentManifest":
        kappa = d.get("kappa_grid")
        return cls(
            model=d["model"],
            n=int(d["n"]),
            p_grid=tuple(int(p) for p in d["p_grid"]),
            error_law=d["error_law"],
            contamination=d["contamination"],
            replicates=int(d["replicates"]),
            master_seed=int(d["master_seed"]),
            methods=tuple(d.get("methods", ("RPCR", "L1PCR"))),
            kappa_grid=None if kappa is None else tuple(float(k) for k in kappa),
            parallelism=int(d.get("parallelism", 1)),
        )

    def digest(self) -> str:
        payload = dict(self.to_dict())
        payload.pop("parallelism")  # scheduling must not change identity
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ExperimentResult:
    manifest: ExperimentManifest
    records: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    timings: list[dict] = field(default_factory=list)

    def aggregates(self) -> list[dict]:
        """Mean and Monte Carlo s.e. of prediction error per (config, method)."""
        out = []
        for cfg_id, (p, kappa) in enumerate(self.manifest.configs):
            for method in self.manifest.methods:
                errs = [r["prediction_error"] for r in self.records
                        if r["config_id"] == cfg_id and r["method"] == method]
                nfail = sum(1 for f in self.failures
                            if f["config_id"] == cfg_id and f["method"] == method)
                row = {
                    "config_id": cfg_id,
                    "model": self.manifest.model,
                    "n": self.manifest.n,
                    "p": p,
                    "kappa": kappa,
                    "error_law": self.manifest.error_law,
                    "contamination": self.manifest.contamination,
                    "method": method,
                    "n_ok": len(errs),
                    "n_failed": nfail,
                    "mean_error": float(np.mean(errs)) if errs else math.nan,
                    "mc_se": (float(np.std(errs, ddof=1) / math.sqrt(len(errs)))
                              if len(errs) > 1 else math.nan),
                }
                out.append(row)
        return out


def prediction_error(fit: FitResult, y_star: np.ndarray) -> float:
    """n^-1 |fitted_mean - y*|^2 with y* centered to match the fitted scale."""
    y_star = np.asarray(y_star, dtype=float).ravel()
    if y_star.shape[0] != fit.fitted_mean.shape[0]:
        raise ValueError("y_star length does not match the fit")
    resid = fit.fitted_mean - (y_star - y_star.mean())
    return float(resid @ resid) / y_star.shape[0]


def _fit_one(method: str, data: Dataset, cv_seed) -> FitResult:
    if method == "RPCR":
        return fit_rpcr(data, opts=_MC_OPTS)
    if method == "L1PCR":
        return fit_l1pcr(data, rng_seed=cv_seed)
    if method == "LASSO":
        return fit_lasso(data, rng_seed=cv_seed)
    raise ValueError(f"unknown method {method!r}")


def _lambda_fields(fit: FitResult) -> tuple[float, float]:
    lu = fit.lambda_used
    if isinstance(lu, dict):
        return float(lu.get("lambda0", math.nan)), float(lu.get("lambda_hbic", math.nan))
    return math.nan, float(lu)


def _mc_task(manifest: ExperimentManifest, cfg_id: int, rep: int) -> tuple[list, list, list]:
    """Run every method on one replicate; returns (records, failures, timings).

    Seed streams are keyed by the replicate index alone, so the same
    replicate of different configs shares its draws (common random numbers:
    paired comparisons across the sweep axis see correlated noise)."""
    p, kappa = manifest.configs[cfg_id]
    root = np.random.SeedSequence(manifest.master_seed, spawn_key=(rep,))
    design_ss, noise_ss, cv_ss = root.spawn(3)
    records, failures, timings = [], [], []
    with threadpool_limits(1):
        design = gen_design(manifest.model, manifest.n, p, kappa=kappa, rng_seed=design_ss)
        spec = NoiseSpec(manifest.error_law, manifest.contamination, rng_seed=noise_ss)
        Z, y = gen_noise(design, spec)
        data = Dataset.from_arrays(Z, y)
        for method in manifest.methods:
            t0 = time.perf_counter()
            try:
                fit = _fit_one(method, data, cv_seed=cv_ss)
                lam0, lam = _lambda_fields(fit)
                records.append({
                    "config_id": cfg_id,
                    "model": manifest.model,
                    "n": manifest.n,
                    "p": p,
                    "kappa": kappa,
                    "error_law": manifest.error_law,
                    "contamination": manifest.contamination,
                    "replicate": rep,
                    "method": method,
                    "prediction_error": prediction_error(fit, design.y_star),
                    "support_size": int(fit.support.size),
                    "lambda0": lam0,
                    "lambda": lam,
                })
            except Exception as exc:  # noqa: BLE001 - sweep must survive any fit
                failures.append({
                    "config_id": cfg_id,
                    "replicate": rep,
                    "method": method,
                    "error": f"{type(exc).__name__}: {exc}",
                })
            timings.append({
                "config_id": cfg_id,
                "replicate": rep,
                "method": method,
                "wall_time": time.perf_counter() - t0,
            })
    return records, failures, timings


def run_monte_carlo(manifest: ExperimentManifest) -> ExperimentResult:
    """Execute the sweep; deterministic records for any parallelism degree.

    Per-replicate failures are recorded, counted, and excluded from the
    aggregates; they never abort the sweep.
    """
    tasks = [(cfg_id, rep)
             for cfg_id in range(len(manifest.configs))
             for rep in range(manifest.replicates)]
    result = ExperimentResult(manifest=manifest)
    if manifest.parallelism == 1:
        outputs = [_mc_task(manifest, c, r) for c, r in tasks]
    else:
        with ProcessPoolExecutor(max_workers=manifest.parallelism) as pool:
            futures = [pool.submit(_mc_task, manifest, c, r) for c, r in tasks]
            outputs = [f.result() for f in futures]
    # futures are consumed in submission order, which is already the
    # deterministic (config, replicate) key order
    for recs, fails, times in outputs:
        result.records.extend(recs)
        result.failures.extend(fails)
        result.timings.extend(times)
    return result


# ---------------------------------------------------------------------------
# leave-one-out protocol under synthetic predictor contamination


@dataclass
class LoocvResult:
    summary: list[dict]
    pairwise: list[dict]
    observations: list[dict]


def _loocv_predict(method: str, Utilde, Z_centered, y, train, i, cv_seed) -> float:
    y_tr = y[train]
    y_mean = float(y_tr.mean())
    yc = y_tr - y_mean
    if method in ("RPCR", "L1PCR"):
        # the basis is centered over all n rows; re-center its training
        # slice so every branch fits intercept-free on centered columns
        mu = Utilde[train].mean(axis=0)
        Xtr = Utilde[train] - mu
        x_new = Utilde[i] - mu
    if method == "RPCR":
        fit = rpcr_on_design(yc, Xtr, opts=_MC_OPTS)
        intercept = float(np.median(yc - fit.fitted_mean))
        return float(x_new @ fit.theta_hat) + intercept + y_mean
    if method == "L1PCR":
        fit = l1pcr_on_design(yc, Xtr, rng_seed=cv_seed)
        intercept = float(np.mean(yc - fit.fitted_mean))
        return float(x_new @ fit.theta_hat) + intercept + y_mean
    if method == "LASSO":
        Xtr = Z_centered[train]
        col_means = Xtr.mean(axis=0)
        Xtr = Xtr - col_means
        grid = default_lasso_grid(Xtr, yc)
        cv_err = cv_lasso_path(Xtr, yc, grid, folds=10, rng_seed=cv_seed)
        lam = float(grid[int(np.argmin(cv_err))])
        rep = solve_lasso_ls(yc, Xtr, lam)
        intercept = float(np.mean(yc - Xtr @ rep.theta_hat))
        return float((Z_centered[i] - col_means) @ rep.theta_hat) + intercept + y_mean
    raise ValueError(f"unknown method {method!r}")


def run_loocv(
    data: Dataset,
    c_grid,
    methods=("RPCR", "L1PCR", "LASSO"),
    rng_seed: int = 0,
    redraw_w_per_split: bool = False,
) -> LoocvResult:
    """Leave-one-out prediction error under added predictor noise.

    For each level c: draw W once with per-entry scale c times the root
    mean predictor variance (n-1 denominator), form Z = X + W, build the PC
    basis on the full contaminated matrix, then fit each method on the n-1
    training rows and predict the held-out one.  Tuning (lambda0, HBIC,
    fold CV) sees only training rows.  Reported are per-c mean squared
    prediction errors and the s.e. of per-observation pairwise differences.
    Setting redraw_w_per_split redraws W for every held-out row instead
    (sensitivity variant).
    """
    X = np.asarray(data.Z, dtype=float)
    y = np.asarray(data.y, dtype=float).ravel()
    n, P = X.shape
    if n < 10:
        raise ValueError(f"LOOCV needs n >= 10, got {n}")
    bad = [m for m in methods if m not in _METHODS]
    if bad:
        raise ValueError(f"unknown methods {bad}")
    sigma_base = math.sqrt(float(np.mean(np.var(X, axis=0, ddof=1))))

    summary, pairwise, observations = [], [], []
    for ci, c in enumerate(c_grid):
        c = float(c)
        root = np.random.SeedSequence(rng_seed, spawn_key=(ci,))
        w_ss, cv_root = root.spawn(2)
        cv_seeds = cv_root.spawn(n)
        split_ss = w_ss.spawn(n) if redraw_w_per_split else None
        sigma = c * sigma_base

        def contaminated(ss):
            rng = np.random.default_rng(ss)
            return X + sigma * rng.standard_normal((n, P))

        def embed(Z):
            basis, _ = basis_from_raw(Dataset.from_arrays(Z, y))
            return basis.Utilde, Z - Z.mean(axis=0)

        if not redraw_w_per_split:
            Utilde, Zc = embed(contaminated(w_ss))

        errs = {m: np.empty(n) for m in methods}
        for i in range(n):
            if redraw_w_per_split:
                Utilde, Zc = embed(contaminated(split_ss[i]))
            train = np.concatenate([np.arange(i), np.arange(i + 1, n)])
            for m in methods:
                pred = _loocv_predict(m, Utilde, Zc, y, train, i, cv_seeds[i])
                errs[m][i] = (pred - y[i]) ** 2
                observations.append({"c": c, "row": i, "method": m,
                                     "squared_error": float(errs[m][i])})
        for m in methods:
            summary.append({"c": c, "method": m, "mspe": float(errs[m].mean())})
        for a_i in range(len(methods)):
            for b_i in range(a_i + 1, len(methods)):
                a, b = methods[a_i], methods[b_i]
                d = errs[a] - errs[b]
                pairwise.append({
                    "c": c,
                    "pair": f"{a}-{b}",
                    "mean_diff": float(d.mean()),
                    "se_diff": float(np.std(d, ddof=1) / math.sqrt(n)),
                })
    return LoocvResult(summary, pairwise, observations)


def screen_predictors(X_full: np.ndarray, y: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k columns with the largest |Pearson correlation| to y.

    Returned in rank order (strongest first); ties keep the lower column
    index; zero-variance columns score 0.
    """
    X = np.asarray(X_full, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, P = X.shape
    if y.shape[0] != n:
        raise ValueError("X/y length mismatch")
    if not 0 < k <= P:
        raise ValueError(f"k must be in [1, {P}]")
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sx = np.sqrt((Xc ** 2).sum(axis=0))
    sy = math.sqrt(float(yc @ yc))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.abs(Xc.T @ yc) / (sx * sy)
    corr[(sx == 0) | np.isnan(corr)] = 0.0
    if sy == 0:
        corr[:] = 0.0
    order = np.argsort(-corr, kind="stable")
    return order[:k]


# ---------------------------------------------------------------------------
# output emission


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    if v is None:
        return ""
    return str(v)


def _write_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in columns])


_RESULT_COLUMNS = ["config_id", "model", "n", "p", "kappa", "error_law",
                   "contamination", "replicate", "method", "prediction_error",
                   "support_size", "lambda0", "lambda"]
_AGG_COLUMNS = ["config_id", "model", "n", "p", "kappa", "error_law",
                "contamination", "method", "n_ok", "n_failed", "mean_error", "mc_se"]
_FAIL_COLUMNS = ["config_id", "replicate", "method", "error"]
_TIMING_COLUMNS = ["config_id", "replicate", "method", "wall_time"]

_SERIES_COLORS = {"RPCR": "#e66101", "L1PCR": "#1a1a1a", "LASSO": "#5e3c99"}


def _svg_chart(manifest: ExperimentManifest, aggregates: list[dict]) -> str:
    """Line chart of mean error against the sweep axis, one series per method."""
    sweep_kappa = manifest.kappa_grid is not None and len(manifest.kappa_grid) > 1
    xs = sorted({(row["kappa"] if sweep_kappa else row["p"]) for row in aggregates})
    width, height, pad = 560, 360, 52
    pts = {
        m: [(x, next(r["mean_error"] for r in aggregates
                     if r["method"] == m
                     and (r["kappa"] if sweep_kappa else r["p"]) == x))
            for x in xs]
        for m in manifest.methods
    }
    ys = [v for series in pts.values() for _, v in series if not math.isnan(v)]
    y_hi = max(ys) * 1.08 if ys else 1.0
    y_lo = 0.0
    x_lo, x_hi = min(xs), max(xs)
    span_x = (x_hi - x_lo) or 1.0

    def sx(x):
        return pad + (x - x_lo) / span_x * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y_lo) / (y_hi - y_lo or 1.0) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}">',
        f"<!-- manifest={manifest.digest()} seed={manifest.master_seed} -->",
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height-pad}" x2="{width-pad}" y2="{height-pad}" stroke="#333"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height-pad}" stroke="#333"/>',
        f'<text x="{width/2:.1f}" y="{height-14}" text-anchor="middle" font-size="13">'
        f'{"kappa" if sweep_kappa else "p"}</text>',
        f'<text x="16" y="{height/2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 16 {height/2:.1f})">mean prediction error</text>',
        f'<text x="{width/2:.1f}" y="24" text-anchor="middle" font-size="13">'
        f'{manifest.model}, {manifest.contamination} contamination, {manifest.error_law} errors</text>',
    ]
    for x in xs:
        parts.append(f'<text x="{sx(x):.1f}" y="{height-pad+16}" text-anchor="middle" '
                     f'font-size="11">{_fmt(x)}</text>')
    for frac in (0.0, 0.5, 1.0):
        v = y_lo + frac * (y_hi - y_lo)
        parts.append(f'<text x="{pad-6}" y="{sy(v)+4:.1f}" text-anchor="end" '
                     f'font-size="11">{v:.3g}</text>')
    for mi, m in enumerate(manifest.methods):
        series = [(x, v) for x, v in pts[m] if not math.isnan(v)]
        if not series:
            continue
        color = _SERIES_COLORS.get(m, "#888888")
        coords = " ".join(f"{sx(x):.2f},{sy(v):.2f}" for x, v in series)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, v in series:
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(v):.2f}" r="3" fill="{color}"/>')
        ly = pad + 16 * mi
        parts.append(f'<line x1="{width-pad-110}" y1="{ly}" x2="{width-pad-86}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{width-pad-80}" y="{ly+4}" font-size="12">{m}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def emit_outputs(result: ExperimentResult, out_dir, svg: bool = False) -> list[Path]:
    """Write results/aggregates/failures CSVs (and timing sidecar, plus an
    optional SVG chart) under out_dir; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, rows, cols in (
        ("results.csv", result.records, _RESULT_COLUMNS),
        ("aggregates.csv", result.aggregates(), _AGG_COLUMNS),
        ("failures.csv", result.failures, _FAIL_COLUMNS),
        ("timing.csv", result.timings, _TIMING_COLUMNS),
    ):
        path = out / name
        _write_csv(path, rows, cols)
        written.append(path)
    if svg:
        m = result.manifest
        path = out / f"figure_{m.model}_{m.contamination}_{m.error_law}.svg"
        path.write_text(_svg_chart(m, result.aggregates()))
        written.append(path)
    return written


def emit_loocv_outputs(result: LoocvResult, out_dir) -> list[Path]:
    """Write the LOOCV summary, pairwise-difference, and per-observation CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, rows, cols in (
        ("loocv_summary.csv", result.summary, ["c", "method", "mspe"]),
        ("loocv_pairwise.csv", result.pairwise, ["c", "pair", "mean_diff", "se_diff"]),
        ("loocv_observations.csv", result.observations,
         ["c", "row", "method", "squared_error"]),
    ):
        path = out / name
        _write_csv(path, rows, cols)
        written.append(path)
    return written
