"""Irregular sampling, Lowess detrending, zeroing/normalization of training
instances, and linear re-gridding for the classical baselines.

The instance file contract: one CSV row per instance holding 500 residual
values, 500 normalized parameter values, and the normalized label, written
with 17 significant digits and accompanied by a JSON sidecar.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .systems import ArgumentError, TipcastError

INSTANCE_LEN = 500
MIN_SAMPLE_POINTS = 505
MAX_SAMPLE_POINTS = 1000
MAX_ZERO_PREFIX = 250
LOWESS_SPAN = 0.2
LABEL_RANGE = (1.01, 3.0)


class DataError(TipcastError):
    """Input data cannot satisfy the sampling/normalization contract."""


@dataclass
class RawSample:
    """500 observed values with their parameter stamps, plus the true tip."""

    mu_seq: np.ndarray
    state_seq: np.ndarray
    mu_c_true: float

    def __post_init__(self):
        if len(self.mu_seq) != INSTANCE_LEN or len(self.state_seq) != INSTANCE_LEN:
            raise ArgumentError(f"RawSample arrays must have length {INSTANCE_LEN}")
        d = np.diff(self.mu_seq)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ArgumentError("mu_seq must be strictly monotone")
        direction = np.sign(d[0])
        if not (self.mu_c_true - self.mu_seq[-1]) * direction > 0:
            raise ArgumentError("mu_c_true must lie strictly beyond mu_seq")


@dataclass
class TrainingInstance:
    """Left-zeroed, normalized residual + parameter channels and label."""

    residual: np.ndarray
    mu_norm: np.ndarray
    label_norm: float

    def row(self):
        return np.concatenate([self.residual, self.mu_norm, [self.label_norm]])


def irregular_sample(trajectory, window, rng, observed=0):
    """Draw an irregularly sampled RawSample from a trajectory.

    window = (mu_start, mu_c): l_s ~ Uniform{505..1000} positions are chosen
    uniformly (sorted, distinct trajectory indices) between mu_start and the
    tipping value; the first 500 in ramp order are kept, so the series ends
    a random distance short of the tip.  observed picks the state component.
    """
    mu_start, mu_c = window
    mu = trajectory.mu
    direction = 1.0 if mu_c >= mu_start else -1.0
    inside = (((mu - mu_start) * direction) >= 0.0) \
        & (((mu_c - mu) * direction) > 0.0)
    idx_pool = np.flatnonzero(inside)
    l_s = int(rng.integers(MIN_SAMPLE_POINTS, MAX_SAMPLE_POINTS + 1))
    if len(idx_pool) < l_s:
        raise DataError(
            f"window holds {len(idx_pool)} trajectory points, need {l_s}")
    picks = np.sort(rng.choice(idx_pool, size=l_s, replace=False))[:INSTANCE_LEN]
    state = trajectory.x[picks, observed] if trajectory.x.ndim == 2 \
        else trajectory.x[picks]
    return RawSample(mu_seq=mu[picks].copy(), state_seq=state.copy(),
                     mu_c_true=float(mu_c))


def lowess_detrend(series, positions, span=LOWESS_SPAN):
    """Residual after a locally weighted linear (tricube) fit.

    For each point the nearest ceil(span*n) points by position form the
    neighborhood; one weighted least-squares pass, no robustifying
    iterations.
    """
    series = np.asarray(series, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.float64)
    if series.shape != positions.shape or series.ndim != 1:
        raise ArgumentError("series and positions must be equal-length 1-D")
    n = len(series)
    if n < 2 or np.ptp(positions) == 0.0:
        raise ArgumentError("positions must not be constant")
    order = np.argsort(positions, kind="stable")
    xs = positions[order]
    ys = series[order]
    k = max(2, int(np.ceil(span * n)))
    fitted = np.empty(n)
    lo = 0
    for i in range(n):
        # slide the k-window to keep it nearest to xs[i]
        while lo + k < n and xs[lo + k] - xs[i] < xs[i] - xs[lo]:
            lo += 1
        hi = lo + k
        xw = xs[lo:hi]
        yw = ys[lo:hi]
        d = np.abs(xw - xs[i])
        dmax = d.max()
        if dmax == 0.0:
            fitted[i] = yw.mean()
            continue
        w = (1.0 - (d / dmax) ** 3) ** 3
        w = np.maximum(w, 0.0)
        sw = w.sum()
        xm = (w * xw).sum() / sw
        ym = (w * yw).sum() / sw
        sxx = (w * (xw - xm) ** 2).sum()
        if sxx <= 0.0:
            fitted[i] = ym
            continue
        beta = (w * (xw - xm) * (yw - ym)).sum() / sxx
        fitted[i] = ym + beta * (xs[i] - xm)
    out = np.empty(n)
    out[order] = ys - fitted
    return out


def zero_and_normalize(residual, mu_seq, mu_c, rng=None, prefix=None):
    """Zero a left prefix of both channels, normalize the rest.

    prefix ~ Uniform{0..250} when not given.  The non-zero residual segment
    is scaled to unit mean absolute value; the non-zero mu segment is mapped
    affinely onto [0, 1]; the label gets the same affine map.
    """
    residual = np.asarray(residual, dtype=np.float64)
    mu_seq = np.asarray(mu_seq, dtype=np.float64)
    if len(residual) != INSTANCE_LEN or len(mu_seq) != INSTANCE_LEN:
        raise ArgumentError(f"need length-{INSTANCE_LEN} inputs")
    if prefix is None:
        if rng is None:
            raise ArgumentError("need rng when prefix is not fixed")
        prefix = int(rng.integers(0, MAX_ZERO_PREFIX + 1))
    if not (0 <= prefix <= MAX_ZERO_PREFIX):
        raise ArgumentError("prefix must be in 0..250")
    res = residual.copy()
    mu = mu_seq.copy()
    res[:prefix] = 0.0
    mu_first = mu[prefix]
    mu_last = mu[-1]
    if mu_last == mu_first:
        raise DataError("degenerate ramp: mu_last equals mu_first")
    scale = np.mean(np.abs(res[prefix:]))
    if scale == 0.0:
        raise DataError("residual segment is identically zero")
    res[prefix:] /= scale
    mu_out = np.zeros(INSTANCE_LEN)
    mu_out[prefix:] = (mu[prefix:] - mu_first) / (mu_last - mu_first)
    label = (mu_c - mu_first) / (mu_last - mu_first)
    return TrainingInstance(residual=res, mu_norm=mu_out,
                            label_norm=float(label))


def denormalize_label(label_norm, mu_first, mu_last):
    """Inverse of the label map: mu_c = mu_first + label*(mu_last-mu_first)."""
    return mu_first + label_norm * (mu_last - mu_first)


def linear_interpolate_regular(mu_seq, state_seq, n_out):
    """Resample onto an equidistant mu grid spanning [first, last].

    Used to feed the classical estimators, which need regular sampling.
    """
    mu_seq = np.asarray(mu_seq, dtype=np.float64)
    state_seq = np.asarray(state_seq, dtype=np.float64)
    d = np.diff(mu_seq)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise ArgumentError("mu_seq must be strictly monotone")
    grid = np.linspace(mu_seq[0], mu_seq[-1], int(n_out))
    if d[0] > 0:
        vals = np.interp(grid, mu_seq, state_seq)
    else:
        vals = np.interp(grid[::-1], mu_seq[::-1], state_seq[::-1])[::-1]
    return grid, vals


def write_instances(path, instances):
    """Write instances in the contract layout (1001 columns, %.17g)."""
    with open(path, "w") as fh:
        for inst in instances:
            fh.write(",".join("%.17g" % v for v in inst.row()) + "\n")


def append_instances(path, instances):
    with open(path, "a") as fh:
        for inst in instances:
            fh.write(",".join("%.17g" % v for v in inst.row()) + "\n")


def read_instances(path):
    """Parse an instance file back into TrainingInstance objects."""
    out = []
    with open(path) as fh:
        for ln, line in enumerate(fh):
            parts = line.strip().split(",")
            if len(parts) != 2 * INSTANCE_LEN + 1:
                raise DataError(f"row {ln}: expected {2*INSTANCE_LEN+1} columns, "
                                f"got {len(parts)}")
            vals = np.asarray([float(v) for v in parts])
            out.append(TrainingInstance(residual=vals[:INSTANCE_LEN],
                                        mu_norm=vals[INSTANCE_LEN:2*INSTANCE_LEN],
                                        label_norm=float(vals[-1])))
    return out


def write_sidecar(path, count, bif_type_counts, noise_kind, seed):
    with open(path, "w") as fh:
        json.dump({"count": count, "bif_type_counts": bif_type_counts,
                   "noise_kind": noise_kind, "seed": seed}, fh, indent=1)
