"""Relative-error scoring and method comparison over test suites.

epsilon = |mu_hat - mu_c| / |mu_end - mu_c| is the accuracy metric; means and
empirical 90% intervals are aggregated over the 50 series of each initial
value.  Prediction failures are clipped at eps=2 and counted separately.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import subprocess
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import ews, preprocess
from .systems import ArgumentError, TipcastError

log = logging.getLogger(__name__)

EPS_MAX = 2.0
METHODS = ("dl", "df", "bb", "dev", "null")
NULL_LABEL_DEFAULT = 0.5 * (preprocess.LABEL_RANGE[0] + preprocess.LABEL_RANGE[1])


class EvaluationError(TipcastError):
    pass


@dataclass(frozen=True)
class PredictionResult:
    """One scored prediction; mu_hat None encodes a prediction failure."""

    method: str
    mu_hat: Optional[float]
    mu_c: float
    mu_end: float
    epsilon: float
    failed: bool = False


def relative_error(mu_hat, mu_c, mu_end):
    """|mu_hat - mu_c| / |mu_end - mu_c| (mu_end is the last sampled value)."""
    if mu_end == mu_c:
        raise ArgumentError("mu_end must differ from mu_c")
    return abs(mu_hat - mu_c) / abs(mu_end - mu_c)


def score(method, mu_hat, mu_c, mu_end):
    if mu_hat is None or not np.isfinite(mu_hat):
        return PredictionResult(method=method, mu_hat=None, mu_c=mu_c,
                                mu_end=mu_end, epsilon=EPS_MAX, failed=True)
    return PredictionResult(method=method, mu_hat=float(mu_hat), mu_c=mu_c,
                            mu_end=mu_end,
                            epsilon=relative_error(mu_hat, mu_c, mu_end))


def aggregate(results):
    """Mean epsilon and empirical 5th/95th percentiles over >= 2 results."""
    if len(results) < 2:
        raise ArgumentError("need at least 2 results to aggregate")
    eps = np.asarray([r.epsilon for r in results], dtype=np.float64)
    return {"mean": float(eps.mean()),
            "ci90_lo": float(np.percentile(eps, 5.0)),
            "ci90_hi": float(np.percentile(eps, 95.0)),
            "n_fail": int(sum(r.failed for r in results))}


def predict_baseline(mu_seq, x_seq, method, window_frac=0.5,
                     smap=ews.SmapConfig(), bb_branch="phi_gt_rho",
                     states=None):
    """Classical-estimator prediction for one (possibly irregular) series.

    Interpolates to a regular grid, slides the indicator window (each window
    is linearly detrended inside indicator_series) and extrapolates the
    quadratic fit to threshold 1.  states, when given, supplies all model
    variables for degenerate fingerprinting.
    """
    n_out = len(mu_seq)
    grid, vals = preprocess.linear_interpolate_regular(mu_seq, x_seq, n_out)
    multi = None
    if method == "df" and states is not None and np.ndim(states) == 2 \
            and states.shape[1] > 1:
        multi = np.column_stack([
            preprocess.linear_interpolate_regular(mu_seq, states[:, j], n_out)[1]
            for j in range(states.shape[1])])
    ind = ews.indicator_series(vals, grid, method, window_frac=window_frac,
                               smap=smap, bb_branch=bb_branch,
                               multivariate=multi)
    if len(ind.mu) < 3:
        return None
    try:
        return ews.extrapolate_tipping(ind)
    except ArgumentError:
        return None


def predict_null(mu_seq, null_label=NULL_LABEL_DEFAULT, prefix=0):
    """No-information prediction: de-normalize a constant label guess.

    The constant defaults to the label-range midpoint and should be the
    training-corpus mean label when a corpus manifest is available; this is
    the MSE-optimal constant predictor the shuffled-data twin converges to.
    """
    mu_first = mu_seq[prefix] if prefix < len(mu_seq) else mu_seq[0]
    return preprocess.denormalize_label(null_label, mu_first, mu_seq[-1])


def corpus_mean_label(manifest_path):
    with open(manifest_path) as fh:
        man = json.load(fh)
    inst_path = os.path.join(os.path.dirname(manifest_path),
                             man["files"]["instances"])
    labels = []
    with open(inst_path) as fh:
        for line in fh:
            labels.append(float(line.rstrip().rsplit(",", 1)[1]))
    if not labels:
        raise EvaluationError("corpus has no instances")
    return float(np.mean(labels))


def run_dl_predictor(instances_path, out_path, model_dir, executable=None):
    """Invoke the sequence-model package over the file contract.

    Runs `<python> -m dlpredictor predict`; raises a clear error when the
    predictor is unavailable rather than substituting another method.
    """
    cmd = list(executable) if executable else [sys.executable, "-m", "dlpredictor"]
    cmd += ["predict", "--models", str(model_dir), "--instances",
            str(instances_path), "--out", str(out_path)]
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True)
    except FileNotFoundError as exc:
        raise EvaluationError(f"dl predictor executable not found: {exc}")
    if proc.returncode != 0:
        raise EvaluationError(
            "dl predictor failed (is the dlpredictor package installed and "
            f"the model trained?): {proc.stderr.strip()[-400:]}")
    return read_prediction_file(out_path)


def read_prediction_file(path):
    """Prediction CSV contract: one `index,label_norm_hat` row per instance."""
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("index"):
                continue
            idx, val = line.split(",")
            out[int(idx)] = float(val)
    return out


def compare_methods(suite, methods, out_dir, window_frac=0.5,
                    smap=ews.SmapConfig(), bb_branch="phi_gt_rho",
                    null_label=NULL_LABEL_DEFAULT, dl_predictions=None):
    """Score every (initial value, method) cell of a test suite.

    suite: mapping with keys model_id, mu_c, initial_values and a list of
    series records (see pipeline.load_test_suite).  Writes comparison.csv and
    plotdata_<model>.csv into out_dir; returns the table rows.
    """
    for m in methods:
        if m not in METHODS:
            raise ArgumentError(f"unknown method: {m}")
        if m == "dl" and dl_predictions is None:
            raise EvaluationError(
                "method 'dl' needs a predictions file (train and run the "
                "dlpredictor package); it is never substituted silently")
    mu_c = suite["mu_c"]
    rows = []
    per_iv = {}
    for rec in suite["series"]:
        per_iv.setdefault(rec["initial_value"], []).append(rec)
    for iv in sorted(per_iv, key=lambda v: suite["initial_values"].index(v)):
        recs = per_iv[iv]
        for method in methods:
            results = []
            for rec in recs:
                mu_seq = rec["mu"]
                try:
                    if method in ("df", "bb", "dev"):
                        mu_hat = predict_baseline(
                            mu_seq, rec["x"], method, window_frac=window_frac,
                            smap=smap, bb_branch=bb_branch,
                            states=rec.get("states"))
                    elif method == "null":
                        mu_hat = predict_null(mu_seq, null_label)
                    else:  # dl
                        mu_hat = dl_predictions.get(rec["index"])
                        if mu_hat is not None:
                            mu_hat = preprocess.denormalize_label(
                                mu_hat, rec["mu"][0], rec["mu"][-1])
                except TipcastError as exc:
                    log.warning("cell (%s, %s, %s) failed: %s",
                                suite["model_id"], iv, method, exc)
                    mu_hat = None
                results.append(score(method, mu_hat, mu_c, mu_seq[-1]))
            agg = aggregate(results)
            rows.append({"model": suite["model_id"], "initial_value": iv,
                         "method": method, "mean_eps": agg["mean"],
                         "ci_lo": agg["ci90_lo"], "ci_hi": agg["ci90_hi"],
                         "n_fail": agg["n_fail"]})
    os.makedirs(out_dir, exist_ok=True)
    _write_table(os.path.join(out_dir, "comparison.csv"), rows)
    _write_table(os.path.join(out_dir, f"plotdata_{suite['model_id']}.csv"),
                 [{k: r[k] for k in ("initial_value", "method", "mean_eps",
                                     "ci_lo", "ci_hi")} for r in rows])
    return rows


def _write_table(path, rows):
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for r in rows:
            writer.writerow({k: ("%.17g" % v if isinstance(v, float) else v)
                             for k, v in r.items()})
