"""Ingestion of user-supplied empirical records (CSV) into the prediction
pipeline: parsing with per-cell validation, windowing, and zero-padded
conversion to the 500-slot instance format."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import preprocess as prep
from .systems import ArgumentError, TipcastError

MIN_RECORD_ROWS = 500
WINDOW_POINTS = 400


class IngestError(TipcastError):
    pass


@dataclass
class EmpiricalRecord:
    """Aligned (parameter, state) series with bookkeeping metadata."""

    param: np.ndarray
    state: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.param) != len(self.state):
            raise ArgumentError("param and state lengths differ")


def load_record(path, param_col, state_col, direction="increasing",
                sort_by_param=False, name=None, units=None):
    """Parse a CSV with the two declared columns into an EmpiricalRecord.

    direction declares the ramp orientation of the parameter; rows are
    optionally sorted by parameter in that orientation.  Errors name the
    offending row/column.  Records shorter than 500 rows are rejected as too
    short for prediction windows.
    """
    if direction not in ("increasing", "decreasing"):
        raise ArgumentError("direction must be increasing or decreasing")
    with open(path) as fh:
        header = [h.strip() for h in fh.readline().strip().split(",")]
        for col in (param_col, state_col):
            if col not in header:
                raise IngestError(f"missing column {col!r} in {path}")
        pi, si = header.index(param_col), header.index(state_col)
        params, states = [], []
        for row_no, line in enumerate(fh, start=2):
            parts = line.strip().split(",")
            if len(parts) <= max(pi, si):
                raise IngestError(f"row {row_no}: too few columns")
            for col, j in ((param_col, pi), (state_col, si)):
                try:
                    v = float(parts[j])
                except ValueError:
                    raise IngestError(
                        f"row {row_no}, column {col!r}: non-numeric cell "
                        f"{parts[j]!r}")
                if not np.isfinite(v):
                    raise IngestError(
                        f"row {row_no}, column {col!r}: non-finite cell")
            params.append(float(parts[pi]))
            states.append(float(parts[si]))
    if len(params) < MIN_RECORD_ROWS:
        raise IngestError(
            f"{path}: {len(params)} rows, need >= {MIN_RECORD_ROWS} for "
            "prediction windows")
    param = np.asarray(params)
    state = np.asarray(states)
    if sort_by_param:
        order = np.argsort(param, kind="stable")
        if direction == "decreasing":
            order = order[::-1]
        param, state = param[order], state[order]
    # ties are common in empirical parameter proxies (stepped forcing,
    # repeated ages), so monotone is enforced non-strictly
    d = np.diff(param)
    ok = np.all(d >= 0) if direction == "increasing" else np.all(d <= 0)
    if not ok:
        raise IngestError(
            f"{path}: parameter column not {direction} "
            "(pass sort_by_param=True to reorder)")
    if param[0] == param[-1]:
        raise IngestError(f"{path}: parameter column is constant")
    return EmpiricalRecord(param=param, state=state,
                           meta={"name": name or path,
                                 "direction": direction,
                                 "units": units or {}})


def export_record(record, path):
    """Write a record back out; numeric columns round-trip bit-exactly."""
    with open(path, "w") as fh:
        fh.write("param,state\n")
        for p, s in zip(record.param, record.state):
            fh.write("%.17g,%.17g\n" % (p, s))


def window_record(record, param_lo, param_hi, n=WINDOW_POINTS, rng=None,
                  mu_c_hint=None):
    """Irregularly sample n points of a record inside [param_lo, param_hi]
    and zero-pad them into the 500-slot instance format.

    Takes every available point when the window holds fewer than n.  Returns
    (instance, mu_seq, state_seq); the instance label is normalized from
    mu_c_hint when given (for scoring), else NaN.
    """
    lo, hi = min(param_lo, param_hi), max(param_lo, param_hi)
    pmin, pmax = record.param.min(), record.param.max()
    if lo < pmin or hi > pmax:
        raise IngestError(
            f"window [{param_lo}, {param_hi}] outside record range "
            f"[{pmin}, {pmax}]")
    inside = np.flatnonzero((record.param >= lo) & (record.param <= hi))
    if len(inside) == 0:
        raise IngestError("window contains no record points")
    if len(inside) <= n:
        picks = inside
    else:
        if rng is None:
            raise ArgumentError("need rng to subsample the window")
        picks = np.sort(rng.choice(inside, size=n, replace=False))
    mu_seq = record.param[picks].copy()
    state_seq = record.state[picks].copy()
    if len(mu_seq) > prep.INSTANCE_LEN:
        mu_seq = mu_seq[:prep.INSTANCE_LEN]
        state_seq = state_seq[:prep.INSTANCE_LEN]
    if len(mu_seq) < prep.INSTANCE_LEN - prep.MAX_ZERO_PREFIX:
        raise IngestError(
            f"window holds {len(mu_seq)} points; the instance format needs "
            f">= {prep.INSTANCE_LEN - prep.MAX_ZERO_PREFIX}")
    residual = prep.lowess_detrend(state_seq, mu_seq)
    pad = prep.INSTANCE_LEN - len(residual)
    res_p = np.concatenate([np.zeros(pad), residual])
    mu_p = np.concatenate([np.zeros(pad), mu_seq])
    # a NaN label marks "unknown ground truth"; de-normalization uses the
    # (mu_first, mu_last) pair returned alongside
    inst = prep.zero_and_normalize(res_p, mu_p, mu_c_hint if mu_c_hint
                                   is not None else 0.0, prefix=pad)
    if mu_c_hint is None:
        inst.label_norm = float("nan")
    return inst, mu_seq, state_seq
