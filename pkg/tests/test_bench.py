"""Monte Carlo harness and LOOCV protocol: bookkeeping, determinism,
seeding structure, output files."""

import dataclasses
import math

import numpy as np
import pytest

import rpcr.bench as bench
from rpcr.bench import (
    ExperimentManifest,
    ExperimentResult,
    _fmt,
    _loocv_predict,
    _mc_task,
    emit_loocv_outputs,
    emit_outputs,
    prediction_error,
    run_loocv,
    run_monte_carlo,
    screen_predictors,
)
from rpcr.pcbasis import Dataset, basis_from_raw
from rpcr.results import FitResult


def _tiny_manifest(**overrides):
    base = dict(model="M1", n=20, p_grid=(25,), error_law="normal",
                contamination="none", replicates=2, master_seed=5,
                methods=("L1PCR",))
    base.update(overrides)
    return ExperimentManifest(**base)


def _fake_fit(fitted_mean):
    fitted_mean = np.asarray(fitted_mean, dtype=float)
    return FitResult(theta_hat=np.zeros(1), support=np.array([], dtype=int),
                     fitted_mean=fitted_mean, intercept=0.0, lambda_used=0.0,
                     method_tag="L1PCR", diagnostics={})


def _synth_dataset(n=20, p=10, seed=0):
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, p))
    y = 1.5 * Z[:, 0] - Z[:, 2] + 0.5 * rng.standard_normal(n) + 2.0
    return Dataset.from_arrays(Z, y)


# --------------------------------------------------------------------------
# prediction_error


def test_prediction_error_exact_fit_is_zero():
    rng = np.random.default_rng(0)
    y_star = rng.standard_normal(15)
    fit = _fake_fit(y_star - y_star.mean())
    assert prediction_error(fit, y_star) == 0.0


def test_prediction_error_null_fit_unit_norm():
    rng = np.random.default_rng(1)
    v = rng.standard_normal(12)
    v -= v.mean()
    v *= math.sqrt(12.0) / np.linalg.norm(v)
    fit = _fake_fit(np.zeros(12))
    assert prediction_error(fit, v) == pytest.approx(1.0, rel=1e-12)


def test_prediction_error_matches_recompute():
    rng = np.random.default_rng(2)
    fitted = rng.standard_normal(9)
    y_star = rng.standard_normal(9)
    fit = _fake_fit(fitted)
    expect = np.sum((fitted - (y_star - y_star.mean())) ** 2) / 9
    assert prediction_error(fit, y_star) == pytest.approx(expect, rel=1e-14)


def test_prediction_error_length_mismatch():
    with pytest.raises(ValueError):
        prediction_error(_fake_fit(np.zeros(5)), np.zeros(6))


# --------------------------------------------------------------------------
# manifests


def test_manifest_roundtrip_and_digest():
    man = _tiny_manifest(methods=("RPCR", "L1PCR"))
    again = ExperimentManifest.from_dict(man.to_dict())
    assert again == man
    assert again.digest() == man.digest()
    # scheduling degree is not part of the experiment identity
    par = dataclasses.replace(man, parallelism=8)
    assert par.digest() == man.digest()
    other = dataclasses.replace(man, replicates=3)
    assert other.digest() != man.digest()
    assert len(man.digest()) == 16


def test_manifest_from_dict_defaults():
    man = ExperimentManifest.from_dict({
        "model": "M1", "n": 20, "p_grid": [25], "error_law": "normal",
        "contamination": "none", "replicates": 1, "master_seed": 0,
    })
    assert man.methods == ("RPCR", "L1PCR")
    assert man.parallelism == 1
    assert man.kappa_grid is None


@pytest.mark.parametrize("overrides", [
    {"replicates": 0},
    {"p_grid": ()},
    {"methods": ("RPCR", "OLS")},
    {"methods": ()},
    {"model": "M2"},
    {"parallelism": 0},
])
def test_manifest_validation(overrides):
    with pytest.raises(ValueError):
        _tiny_manifest(**overrides)


def test_manifest_configs_cross_product():
    man = _tiny_manifest(model="M2", p_grid=(30, 40), kappa_grid=(0.5, 1.0, 2.0))
    assert man.configs == [(30, 0.5), (30, 1.0), (30, 2.0),
                           (40, 0.5), (40, 1.0), (40, 2.0)]


# --------------------------------------------------------------------------
# run_monte_carlo


def test_monte_carlo_bookkeeping():
    man = _tiny_manifest(methods=("RPCR", "L1PCR"))
    res = run_monte_carlo(man)
    assert len(res.records) == 4
    assert not res.failures
    assert len(res.timings) == 4
    agg = res.aggregates()
    assert len(agg) == 2
    for row in agg:
        errs = [r["prediction_error"] for r in res.records
                if r["method"] == row["method"]]
        assert row["n_ok"] == 2 and row["n_failed"] == 0
        assert row["mean_error"] == pytest.approx(np.mean(errs), abs=1e-12)
        assert row["mc_se"] == pytest.approx(
            np.std(errs, ddof=1) / math.sqrt(2), abs=1e-12)


def test_monte_carlo_failures_logged_not_raised(monkeypatch):
    def boom(method, data, cv_seed):
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr(bench, "_fit_one", boom)
    res = run_monte_carlo(_tiny_manifest())
    assert not res.records
    assert len(res.failures) == 2
    assert res.failures[0]["error"] == "RuntimeError: synthetic failure"
    agg = res.aggregates()
    assert agg[0]["n_ok"] == 0 and agg[0]["n_failed"] == 2
    assert math.isnan(agg[0]["mean_error"])


def test_noise_stream_keyed_by_replicate_alone(monkeypatch):
    """Common random numbers: the same replicate of two different configs
    must receive the identical noise stream, so cross-p comparisons are
    paired."""
    seen = []
    original = bench.gen_noise

    def spy(design, spec):
        seen.append(spec.rng_seed.generate_state(4).tolist())
        return original(design, spec)

    monkeypatch.setattr(bench, "gen_noise", spy)
    _mc_task(_tiny_manifest(p_grid=(25,)), 0, 1)
    _mc_task(_tiny_manifest(p_grid=(40,)), 0, 1)
    assert seen[0] == seen[1]
    _mc_task(_tiny_manifest(p_grid=(25,)), 0, 0)
    assert seen[2] != seen[0]


def test_monte_carlo_rerun_byte_identical(tmp_path):
    man = _tiny_manifest(replicates=3)
    files_a = emit_outputs(run_monte_carlo(man), tmp_path / "a")
    files_b = emit_outputs(run_monte_carlo(man), tmp_path / "b")
    for pa, pb in zip(files_a, files_b):
        if pa.name == "timing.csv":  # wall clock is a sidecar, not identity
            continue
        assert pa.read_bytes() == pb.read_bytes(), pa.name


def _rows_equal(a, b):
    # dict equality with nan-valued fields treated as equal
    if len(a) != len(b):
        return False
    return all(
        ra.keys() == rb.keys()
        and all(_fmt(ra[k]) == _fmt(rb[k]) for k in ra)
        for ra, rb in zip(a, b)
    )


def test_parallel_matches_serial(tmp_path):
    man = _tiny_manifest(replicates=3)
    serial = run_monte_carlo(man)
    par = run_monte_carlo(dataclasses.replace(man, parallelism=3))
    assert _rows_equal(par.records, serial.records)
    assert par.failures == serial.failures
    assert _rows_equal(par.aggregates(), serial.aggregates())


def test_contamination_direction_at_scale():
    """Added predictor noise degrades mean prediction error once n is large
    enough that the clean fit is not itself overfitting (frozen seed; at
    much smaller n attenuation from the contamination can flip the sign)."""
    base = dict(model="M1", n=100, p_grid=(100,), error_law="normal",
                replicates=14, master_seed=7, methods=("L1PCR",))
    none = run_monte_carlo(ExperimentManifest(contamination="none", **base))
    ind = run_monte_carlo(ExperimentManifest(contamination="indep", **base))
    m_none = np.mean([r["prediction_error"] for r in none.records])
    m_ind = np.mean([r["prediction_error"] for r in ind.records])
    assert m_ind >= m_none


# --------------------------------------------------------------------------
# LOOCV


def test_loocv_synthetic_smoke():
    data = _synth_dataset()
    res = run_loocv(data, c_grid=(0.0,), rng_seed=3)
    assert len(res.summary) == 3
    assert len(res.pairwise) == 3
    assert len(res.observations) == 20 * 3
    for row in res.summary:
        assert math.isfinite(row["mspe"])
    for row in res.observations:
        assert math.isfinite(row["squared_error"])


def test_loocv_se_bookkeeping():
    data = _synth_dataset(seed=4)
    res = run_loocv(data, c_grid=(0.3,), methods=("L1PCR", "LASSO"), rng_seed=5)
    errs = {m: np.array([o["squared_error"] for o in res.observations
                         if o["method"] == m])
            for m in ("L1PCR", "LASSO")}
    d = errs["L1PCR"] - errs["LASSO"]
    (pair,) = res.pairwise
    assert pair["pair"] == "L1PCR-LASSO"
    assert pair["mean_diff"] == pytest.approx(d.mean(), abs=1e-12)
    assert pair["se_diff"] == pytest.approx(
        np.std(d, ddof=1) / math.sqrt(20), abs=1e-12)
    for m, arr in errs.items():
        (row,) = [r for r in res.summary if r["method"] == m]
        assert row["mspe"] == pytest.approx(arr.mean(), rel=1e-12)


def test_loocv_heldout_response_never_read():
    """Perturbing the held-out response must not move that row's
    prediction: the fit and its tuning see training rows only."""
    data = _synth_dataset(seed=6)
    basis, _ = basis_from_raw(data)
    Zc = data.Z - data.Z.mean(axis=0)
    i = 3
    train = np.concatenate([np.arange(i), np.arange(i + 1, 20)])
    y_mod = data.y.copy()
    y_mod[i] += 100.0
    cv_seed = np.random.SeedSequence(9)
    for method in ("RPCR", "L1PCR", "LASSO"):
        a = _loocv_predict(method, basis.Utilde, Zc, data.y, train, i, cv_seed)
        b = _loocv_predict(method, basis.Utilde, Zc, y_mod, train, i, cv_seed)
        assert a == b, method


def test_loocv_redraw_flag_changes_contamination():
    data = _synth_dataset(seed=7)
    once = run_loocv(data, c_grid=(0.4,), methods=("L1PCR",), rng_seed=8)
    redrawn = run_loocv(data, c_grid=(0.4,), methods=("L1PCR",), rng_seed=8,
                        redraw_w_per_split=True)
    assert once.summary[0]["mspe"] != redrawn.summary[0]["mspe"]
    assert math.isfinite(redrawn.summary[0]["mspe"])


def test_loocv_validation():
    small = _synth_dataset(n=9)
    with pytest.raises(ValueError):
        run_loocv(small, c_grid=(0.0,))
    with pytest.raises(ValueError):
        run_loocv(_synth_dataset(), c_grid=(0.0,), methods=("RPCR", "XGB"))


# --------------------------------------------------------------------------
# screening


def test_screen_response_equal_to_column():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((25, 12))
    y = X[:, 7].copy()
    picked = screen_predictors(X, y, 3)
    assert picked[0] == 7


def test_screen_k_equals_p_returns_everything():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((15, 6))
    y = rng.standard_normal(15)
    assert sorted(screen_predictors(X, y, 6).tolist()) == list(range(6))


def test_screen_matches_brute_force_sort():
    rng = np.random.default_rng(12)
    X = rng.standard_normal((30, 50))
    y = rng.standard_normal(30)
    cors = np.array([abs(np.corrcoef(X[:, j], y)[0, 1]) for j in range(50)])
    expect = np.argsort(-cors, kind="stable")[:5]
    np.testing.assert_array_equal(screen_predictors(X, y, 5), expect)


def test_screen_ties_prefer_lower_index():
    rng = np.random.default_rng(13)
    X = rng.standard_normal((20, 10))
    X[:, 9] = X[:, 2]  # exact duplicate correlation
    y = X[:, 2] + 0.1 * rng.standard_normal(20)
    picked = screen_predictors(X, y, 2).tolist()
    assert picked.index(2) < picked.index(9)


def test_screen_zero_variance_column_scores_zero():
    rng = np.random.default_rng(14)
    X = rng.standard_normal((20, 5))
    X[:, 1] = 3.0
    y = X[:, 0]
    picked = screen_predictors(X, y, 4)
    assert 1 not in picked[:3]
    assert picked[0] == 0


# --------------------------------------------------------------------------
# outputs


def _handmade_result():
    man = _tiny_manifest(p_grid=(10, 20, 30), replicates=1,
                         methods=("RPCR", "L1PCR"))
    res = ExperimentResult(manifest=man)
    for cfg_id in range(3):
        for mi, method in enumerate(man.methods):
            res.records.append({
                "config_id": cfg_id, "model": "M1", "n": 20,
                "p": man.p_grid[cfg_id], "kappa": None,
                "error_law": "normal", "contamination": "none",
                "replicate": 0, "method": method,
                "prediction_error": 0.1 * (cfg_id + 1) + 0.05 * mi,
                "support_size": 2, "lambda0": 0.2, "lambda": 0.1,
            })
    return res


def test_svg_chart_two_series_three_points(tmp_path):
    res = _handmade_result()
    files = emit_outputs(res, tmp_path, svg=True)
    svg_path = [p for p in files if p.suffix == ".svg"][0]
    assert svg_path.name == "figure_M1_none_normal.svg"
    text = svg_path.read_text()
    polylines = [ln for ln in text.splitlines() if ln.startswith("<polyline")]
    assert len(polylines) == 2
    for ln in polylines:
        coords = ln.split('points="')[1].split('"')[0].split()
        assert len(coords) == 3
    assert f"manifest={res.manifest.digest()}" in text
    assert f"seed={res.manifest.master_seed}" in text


def test_emit_outputs_empty_result_header_only(tmp_path):
    man = _tiny_manifest()
    res = ExperimentResult(manifest=man)
    res.records = []
    files = emit_outputs(res, tmp_path)
    results_csv = [p for p in files if p.name == "results.csv"][0]
    lines = results_csv.read_text().splitlines()
    assert lines == [",".join(bench._RESULT_COLUMNS)]
    fails_csv = [p for p in files if p.name == "failures.csv"][0]
    assert fails_csv.read_text().splitlines() == [",".join(bench._FAIL_COLUMNS)]


def test_emit_loocv_outputs(tmp_path):
    data = _synth_dataset(seed=15)
    res = run_loocv(data, c_grid=(0.0, 0.2), methods=("L1PCR",), rng_seed=16)
    files = emit_loocv_outputs(res, tmp_path)
    names = {p.name for p in files}
    assert names == {"loocv_summary.csv", "loocv_pairwise.csv",
                     "loocv_observations.csv"}
    summary = (tmp_path / "loocv_summary.csv").read_text().splitlines()
    assert summary[0] == "c,method,mspe"
    assert len(summary) == 3  # header + one row per c
    # single method -> no pairwise rows, header only
    pairwise = (tmp_path / "loocv_pairwise.csv").read_text().splitlines()
    assert pairwise == ["c,pair,mean_diff,se_diff"]


def test_fmt_float_round_trips():
    for x in (0.1, 1.0 / 3.0, 1e-17, 12345.6789, -2.5e300):
        assert float(_fmt(x)) == x
    assert _fmt(float("nan")) == "nan"
    assert _fmt(None) == ""
    assert _fmt(7) == "7"
