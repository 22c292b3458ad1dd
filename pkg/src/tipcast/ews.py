"""Classical early-warning indicators and threshold extrapolation.

Three estimators share the convention that the indicator approaches 1 as a
bifurcation nears: the PCA-projected lag-1 coefficient (degenerate
fingerprinting, white noise), the bias-corrected lag-1 coefficient for
red-driven series (BB), and the dominant eigenvalue modulus of an
S-map-estimated Jacobian in delay space (DEV).  A quadratic fit of indicator
vs parameter extrapolates to the threshold to predict the tipping value.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .systems import ArgumentError, TipcastError

log = logging.getLogger(__name__)

MIN_WINDOW = 30
THRESHOLD = 1.0
DEV_RIDGE = 1.0e-8


class WindowError(TipcastError):
    """Window too short or otherwise unusable for an estimator."""


@dataclass(frozen=True)
class SmapConfig:
    """Delay-embedding setup for DEV: dimension E, delay tau, weight theta."""

    E: int = 3
    tau: int = 1
    theta: float = 0.0

    def __post_init__(self):
        if self.E < 1 or self.tau < 1 or self.theta < 0.0:
            raise ArgumentError("need E >= 1, tau >= 1, theta >= 0")


@dataclass
class IndicatorSeries:
    """Indicator values at window right-edge parameter positions."""

    mu: np.ndarray
    value: np.ndarray
    method: str
    window_frac: float
    threshold: float = THRESHOLD

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("mu,value,method,window_frac\n")
            for m, v in zip(self.mu, self.value):
                fh.write("%.17g,%.17g,%s,%g\n" % (m, v, self.method,
                                                  self.window_frac))


def lag1_coefficient(series):
    """Least-squares lag-1 autoregressive coefficient of a centered series."""
    x = np.asarray(series, dtype=np.float64)
    x = x - x.mean()
    denom = np.dot(x[:-1], x[:-1])
    if denom == 0.0:
        raise WindowError("zero-variance window")
    return float(np.dot(x[1:], x[:-1]) / denom)


def degenerate_fingerprinting(window):
    """Lag-1 coefficient of the leading principal component of a window.

    window: (n, m) array of detrended residuals (or 1-D, which degrades to
    the plain lag-1 autocorrelation).  The leading PC is the eigenvector of
    the sample covariance with the largest eigenvalue.
    """
    w = np.asarray(window, dtype=np.float64)
    if w.ndim == 1:
        w = w[:, None]
    n, m = w.shape
    if n < MIN_WINDOW:
        raise WindowError(f"window has {n} samples, need >= {MIN_WINDOW}")
    centered = w - w.mean(axis=0)
    if m == 1:
        return lag1_coefficient(centered[:, 0])
    cov = centered.T @ centered / (n - 1)
    vals, vecs = np.linalg.eigh(cov)
    if not np.all(np.isfinite(vals)) or vals[-1] <= 0.0:
        # rank-deficient: fall back to the strongest single variable
        var = centered.var(axis=0)
        return lag1_coefficient(centered[:, int(np.argmax(var))])
    pc1 = centered @ vecs[:, -1]
    return lag1_coefficient(pc1)


class BBResult(NamedTuple):
    phi: float
    phi_b: float
    rho_b: float
    degraded: bool


def bb_estimate(window, branch="phi_gt_rho"):
    """Bias-corrected lag-1 coefficient for an AR(1)-driven-by-AR(1) series.

    Computes the naive coefficient phi_b, the innovation coefficient rho_b,
    and solves phi^2 - (phi_b+rho_b) phi + rho_b/phi_b = 0, whose roots are
    exactly (phi, rho).  branch picks which root is the state coefficient:
    'phi_gt_rho' takes the larger root, 'rho_gt_phi' the smaller.  A negative
    discriminant degrades to phi_b with the degraded flag set.
    """
    if branch not in ("phi_gt_rho", "rho_gt_phi"):
        raise ArgumentError(f"unknown branch: {branch}")
    x = np.asarray(window, dtype=np.float64)
    if x.ndim != 1:
        raise ArgumentError("bb_estimate wants a univariate window")
    if len(x) < MIN_WINDOW:
        raise WindowError(f"window has {len(x)} samples, need >= {MIN_WINDOW}")
    x = x - x.mean()
    denom = np.dot(x[:-1], x[:-1])
    if denom == 0.0:
        raise WindowError("zero-variance window")
    phi_b = float(np.dot(x[1:], x[:-1]) / denom)
    v = x[1:] - phi_b * x[:-1]
    vden = np.dot(v[:-1], v[:-1])
    if vden == 0.0 or phi_b == 0.0:
        return BBResult(phi=phi_b, phi_b=phi_b, rho_b=0.0, degraded=True)
    rho_b = float(np.dot(v[1:], v[:-1]) / vden)
    disc = (phi_b + rho_b) ** 2 - 4.0 * rho_b / phi_b
    if disc < 0.0:
        return BBResult(phi=phi_b, phi_b=phi_b, rho_b=rho_b, degraded=True)
    s = np.sqrt(disc)
    if branch == "phi_gt_rho":
        phi = 0.5 * ((phi_b + rho_b) + s)
    else:
        phi = 0.5 * ((phi_b + rho_b) - s)
    return BBResult(phi=float(phi), phi_b=phi_b, rho_b=rho_b, degraded=False)


def _embedding_matrix(x, E, tau):
    n = len(x)
    first = (E - 1) * tau
    rows = n - tau - first
    if rows < E + 1:
        raise WindowError("window too short for the requested embedding")
    A = np.empty((rows, E))
    for j in range(E):
        A[:, j] = x[first - j * tau: first - j * tau + rows]
    B = x[first + tau: first + tau + rows]
    return A, B


def dev(window, cfg=SmapConfig()):
    """Dominant eigenvalue modulus of the S-map-estimated Jacobian.

    Builds delay vectors X_t = [x(t), x(t-tau), ..., x(t-(E-1)tau)], solves
    the exponentially weighted least squares for the top companion row at
    the latest target point, with weights exp(-theta*u/ubar) over squared
    distances u to the target vector; returns |dominant eigenvalue| of the
    companion matrix.  Singular normal equations are ridge-regularized.
    """
    x = np.asarray(window, dtype=np.float64)
    if x.ndim != 1:
        raise ArgumentError("dev wants a univariate window")
    if len(x) < cfg.E * cfg.tau + 10:
        raise WindowError("window shorter than E*tau + 10")
    A, B = _embedding_matrix(x, cfg.E, cfg.tau)
    if cfg.theta > 0.0:
        target = A[-1]
        u = np.sum((A - target) ** 2, axis=1)
        ubar = u.mean()
        w = np.exp(-cfg.theta * u / ubar) if ubar > 0.0 else np.ones(len(u))
        sw = np.sqrt(w)
        Aw = A * sw[:, None]
        Bw = B * sw
    else:
        Aw, Bw = A, B
    coef, residuals, rank, sv = np.linalg.lstsq(Aw, Bw, rcond=None)
    if rank < cfg.E:
        log.warning("dev: singular normal equations, ridge-regularizing")
        G = Aw.T @ Aw + DEV_RIDGE * np.eye(cfg.E)
        coef = np.linalg.solve(G, Aw.T @ Bw)
    comp = np.zeros((cfg.E, cfg.E))
    comp[0, :] = coef
    for i in range(1, cfg.E):
        comp[i, i - 1] = 1.0
    eig = np.linalg.eigvals(comp)
    return float(np.max(np.abs(eig)))


def _linear_detrend(window):
    """Remove the per-window linear trend (columnwise for 2-D windows)."""
    w = np.asarray(window, dtype=np.float64)
    t = np.arange(w.shape[0], dtype=np.float64)
    t = t - t.mean()
    denom = np.dot(t, t)
    if w.ndim == 1:
        return w - w.mean() - (np.dot(t, w - w.mean()) / denom) * t
    out = w - w.mean(axis=0)
    slope = t @ out / denom
    return out - t[:, None] * slope


def indicator_series(series, mu_seq, method, window_frac=0.5, step=1,
                     smap=SmapConfig(), bb_branch="phi_gt_rho",
                     multivariate=None, window_detrend="linear"):
    """Slide a window over a regularly sampled series, computing the chosen
    indicator at every right edge.

    series: 1-D observed values; multivariate optionally supplies the (n, m)
    state matrix consumed by degenerate fingerprinting.  Each window is
    linearly detrended before estimation (window_detrend='none' disables it
    for callers that supply pre-detrended residuals).  Windows where the
    estimator fails are skipped (gaps).
    """
    series = np.asarray(series, dtype=np.float64)
    mu_seq = np.asarray(mu_seq, dtype=np.float64)
    n = len(series)
    if len(mu_seq) != n:
        raise ArgumentError("series and mu_seq lengths differ")
    if not 0.0 < window_frac <= 1.0:
        raise ArgumentError("window_frac must be in (0, 1]")
    if window_detrend not in ("linear", "none"):
        raise ArgumentError("window_detrend must be linear or none")
    wlen = max(MIN_WINDOW, int(round(window_frac * n)))
    if wlen > n:
        raise WindowError(f"series of {n} points cannot hold a {wlen} window")
    prep = _linear_detrend if window_detrend == "linear" else (lambda w: w)
    mus, vals = [], []
    for right in range(wlen - 1, n, step):
        sl = slice(right - wlen + 1, right + 1)
        try:
            if method == "df":
                data = multivariate[sl] if multivariate is not None else series[sl]
                v = degenerate_fingerprinting(prep(data))
            elif method == "bb":
                v = bb_estimate(prep(series[sl]), branch=bb_branch).phi
            elif method == "dev":
                v = dev(prep(series[sl]), smap)
            else:
                raise ArgumentError(f"unknown indicator method: {method}")
        except (WindowError, np.linalg.LinAlgError):
            continue
        mus.append(mu_seq[right])
        vals.append(v)
    return IndicatorSeries(mu=np.asarray(mus), value=np.asarray(vals),
                           method=method, window_frac=window_frac)


def extrapolate_tipping(ind) -> Optional[float]:
    """Quadratic extrapolation of an indicator series to its threshold.

    Fits value ~ a + b*mu + c*mu^2 and returns the first real root at or
    beyond the last window edge in ramp direction where the fit reaches the
    threshold; None when no such root exists (prediction failure).
    """
    if len(ind.mu) < 3:
        raise ArgumentError("need at least 3 indicator points")
    mu = np.asarray(ind.mu, dtype=np.float64)
    val = np.asarray(ind.value, dtype=np.float64)
    direction = 1.0 if mu[-1] >= mu[0] else -1.0
    # center mu for conditioning
    m0 = mu.mean()
    ms = mu.std() or 1.0
    z = (mu - m0) / ms
    c2, c1, c0 = np.polyfit(z, val, 2)
    # roots of c2 z^2 + c1 z + (c0 - threshold) = 0
    if abs(c2) < 1e-14:
        if abs(c1) < 1e-14:
            return None
        roots = np.array([(ind.threshold - c0) / c1])
    else:
        disc = c1 * c1 - 4.0 * c2 * (c0 - ind.threshold)
        if disc < 0.0:
            return None
        s = np.sqrt(disc)
        roots = np.array([(-c1 - s) / (2 * c2), (-c1 + s) / (2 * c2)])
    mu_roots = m0 + roots * ms
    z_last = mu[-1]
    ahead = mu_roots[(mu_roots - z_last) * direction >= 0.0]
    if len(ahead) == 0:
        return None
    return float(ahead[np.argmin(np.abs(ahead - z_last))])
