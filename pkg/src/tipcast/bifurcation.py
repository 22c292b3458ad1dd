"""Equilibrium continuation, recovery rates, and tipping-point labels.

The recovery rate is the maximal real part of the Jacobian eigenvalues at a
state.  Static continuation (Newton-corrected parameter stepping) finds where
an equilibrium branch loses stability; ramped noise-free runs give the
rate-delayed tipping label actually used as ground truth, by locating the
recovery-rate sign change along the simulated trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .systems import ArgumentError, NumericError, TipcastError, pack_state

NEWTON_TOL = 1.0e-10
NEWTON_MAX_ITER = 50
LAMBDA_STOP = 0.5
FAIL_WINDOW = 5
# branch died by Newton failure with lambda this close to 0: fold signature
FOLD_DEATH_LAMBDA = -0.2

BIF_TYPES = ("fold", "hopf", "transcritical", "unclassified")


class SeedError(TipcastError):
    """Newton failed on the very first continuation point."""


@dataclass
class EquilibriumBranch:
    """Continuation output: aligned mu grid, equilibria, recovery rates.

    lambda_im carries |Im| of the leading eigenvalue (0 for real leads);
    terminated is True when the branch died by Newton failure before mu_end;
    steps_past_crossing counts accepted continuation points after the first
    sign change (-1 when no crossing was seen).
    """

    mu_grid: np.ndarray
    x_star: np.ndarray
    lam: np.ndarray
    lam_im: np.ndarray
    terminated: bool = False
    steps_past_crossing: int = -1

    def __len__(self):
        return len(self.mu_grid)

    def to_csv(self, path):
        dim = self.x_star.shape[1]
        cols = ["mu"] + [f"x{i}" for i in range(dim)] + ["lambda"]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for i in range(len(self.mu_grid)):
                row = ([self.mu_grid[i]] + list(self.x_star[i]) + [self.lam[i]])
                fh.write(",".join("%.17g" % v for v in row) + "\n")


@dataclass(frozen=True)
class TippingLabel:
    """Parameter value at stability loss plus the bifurcation type."""

    mu_c: float
    bif_type: str = "unclassified"

    def to_json(self):
        import json
        return json.dumps({"mu_c": self.mu_c, "bif_type": self.bif_type})


def recovery_rate(system, x_star, mu, check_equilibrium=True, eq_tol=1.0e-6):
    """max Re(eig(J)) at (x_star, mu).

    x_star must be an equilibrium within eq_tol (loose enough to accept
    states out of converge_to_equilibrium) unless check_equilibrium=False,
    which is how instantaneous trajectory states are evaluated.
    """
    x = pack_state(system, x_star)
    p = system.params_array()
    p[system.bif_slot] = mu
    if check_equilibrium:
        f = np.empty(3)
        if not K.rhs_fill(system.rhs_id, p, x, f):
            raise NumericError("rhs evaluation failed at x_star")
        if np.max(np.abs(f[:system.dim])) >= eq_tol:
            raise ArgumentError(
                "x_star is not an equilibrium within tolerance "
                f"(|f| = {np.max(np.abs(f[:system.dim])):.3g})")
    lam, _ = K.lambda_at(system.rhs_id, p, x, system.dim)
    if not np.isfinite(lam):
        raise NumericError("eigenvalue evaluation failed")
    return float(lam)


def newton_equilibrium(system, x_guess, mu, tol=NEWTON_TOL,
                       max_iter=NEWTON_MAX_ITER):
    """Newton-correct an equilibrium guess at fixed mu; None on failure."""
    x = pack_state(system, x_guess)
    out, ok = K.newton_correct(system.rhs_id, system.params_array(),
                               system.bif_slot, system.dim, x, mu, tol,
                               max_iter)
    if not ok:
        return None
    return out[:system.dim].copy()


def continue_branch(system, seed_equilibrium, mu0, mu_end, d_mu=None):
    """Follow the equilibrium branch from mu0 toward mu_end.

    Newton-corrects the previous equilibrium at each parameter step and
    records the recovery rate.  Stops at mu_end, at Newton failure (the fold
    signature), or once lambda exceeds LAMBDA_STOP past a sign change.  The
    first sign change is refined by bisection to a 1e-4*span grid.
    """
    if d_mu is None:
        d_mu = (mu_end - mu0) / 2000.0
    if d_mu == 0.0 or np.sign(d_mu) != np.sign(mu_end - mu0):
        raise ArgumentError("d_mu must step from mu0 toward mu_end")
    x_seed = pack_state(system, seed_equilibrium)
    refine = abs(mu_end - mu0) * 1e-4
    mu_a, x_a, lam_a, im_a, n, status, after = K.sweep_branch(
        system.rhs_id, system.params_array(), system.bif_slot, system.dim,
        x_seed, mu0, mu_end, d_mu, NEWTON_TOL, NEWTON_MAX_ITER, LAMBDA_STOP,
        refine, FAIL_WINDOW)
    if status == 2:
        raise SeedError("Newton failed to converge on the seed equilibrium")
    return EquilibriumBranch(
        mu_grid=mu_a[:n].copy(), x_star=x_a[:n, :system.dim].copy(),
        lam=lam_a[:n].copy(), lam_im=im_a[:n].copy(),
        terminated=(status == 1), steps_past_crossing=after)


def _interp_crossing(mu, lam, i):
    frac = -lam[i] / (lam[i + 1] - lam[i])
    return float(mu[i] + frac * (mu[i + 1] - mu[i]))


def locate_crossing(branch) -> Optional[TippingLabel]:
    """First recovery-rate sign change on a branch, or None when there is
    no crossing (callers discard such runs).

    Type heuristic: complex leading pair at the crossing -> hopf; real lead
    with the branch dying within FAIL_WINDOW points -> fold; real lead with
    the branch surviving -> transcritical.
    """
    if len(branch) < 2:
        raise ArgumentError("branch needs at least 2 points")
    lam = branch.lam
    idx = np.flatnonzero((lam[:-1] <= 0.0) & (lam[1:] > 0.0))
    if len(idx) == 0:
        return None
    i = int(idx[0])
    mu_c = _interp_crossing(branch.mu_grid, lam, i)
    if branch.lam_im[i] > 1e-9 or branch.lam_im[i + 1] > 1e-9:
        kind = "hopf"
    elif branch.steps_past_crossing >= 0 and branch.terminated \
            and branch.steps_past_crossing < FAIL_WINDOW:
        kind = "fold"
    elif branch.steps_past_crossing >= FAIL_WINDOW or not branch.terminated:
        kind = "transcritical"
    else:
        kind = "unclassified"
    return TippingLabel(mu_c=mu_c, bif_type=kind)


def fold_candidate(branch) -> Optional[float]:
    """Static fold estimate for a branch that died without a sign change.

    On a fold branch lambda ~ -c*sqrt(mu_c - mu), so lambda^2 is linear in mu
    near the end; extrapolate it to zero.  Returns None when the death does
    not look like a fold (lambda still clearly negative).
    """
    if not branch.terminated or len(branch) < 4:
        return None
    lam = branch.lam
    if np.any(lam > 0.0):
        return None
    if lam[-1] < FOLD_DEATH_LAMBDA:
        return None
    l2 = lam[-1] ** 2
    l2p = lam[-2] ** 2
    if l2p <= l2:
        return float(branch.mu_grid[-1])
    slope = (branch.mu_grid[-1] - branch.mu_grid[-2]) / (l2p - l2)
    return float(branch.mu_grid[-1] + l2 * slope)


def classify_direction(system, x_eq, mu0, direction, span=4.0, steps=2000):
    """Sweep the branch one way and name what ends it.

    Returns (bif_type, mu_c_static) or None when the branch neither crosses
    zero nor dies like a fold within mu0 + direction*span.  Folds mostly
    show up as branch death with lambda -> 0-, located by extrapolating
    lambda^2 to zero.
    """
    mu_end = mu0 + direction * span
    try:
        branch = continue_branch(system, x_eq, mu0, mu_end,
                                 d_mu=(mu_end - mu0) / steps)
    except (SeedError, TipcastError):
        return None
    if len(branch) < 2 or branch.lam[0] >= 0.0:
        return None
    label = locate_crossing(branch)
    if label is not None:
        if label.bif_type in ("fold", "hopf", "transcritical"):
            return label.bif_type, label.mu_c
        return None
    fold_mu = fold_candidate(branch)
    if fold_mu is not None:
        return "fold", fold_mu
    return None


def branch_from_run(system, trajectory, max_points=20_000):
    """Recovery rate along a (noise-free) ramped trajectory, packaged as a
    branch over the instantaneous simulated states."""
    n = len(trajectory.mu)
    if n < 2:
        raise ArgumentError("trajectory too short")
    stride = max(1, n // max_points)
    idx = np.arange(0, n, stride)
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    xs = np.zeros((n, 3))
    xs[:, :system.dim] = trajectory.x
    lam, im = K.lambda_series(system.rhs_id, system.params_array(),
                              system.bif_slot, system.dim, xs,
                              trajectory.mu, idx)
    return EquilibriumBranch(mu_grid=trajectory.mu[idx].copy(),
                             x_star=trajectory.x[idx].copy(),
                             lam=lam, lam_im=im)


def label_tipping_from_run(system, trajectory) -> Optional[TippingLabel]:
    """Rate-delayed tipping label: mu at the first recovery-rate sign change
    along a noise-free ramped run (the training/ground-truth convention).

    Returns None when no sign change occurs before the end of the run.
    The reported type comes from the eigenvalue structure alone (hopf vs
    unclassified real crossing); static continuation is the place for full
    fold/transcritical discrimination.
    """
    branch = branch_from_run(system, trajectory)
    lam = branch.lam
    finite = np.isfinite(lam)
    idx = np.flatnonzero(finite[:-1] & finite[1:]
                         & (lam[:-1] <= 0.0) & (lam[1:] > 0.0))
    if len(idx) == 0:
        return None
    i = int(idx[0])
    mu_c = _interp_crossing(branch.mu_grid, lam, i)
    kind = "hopf" if (branch.lam_im[i] > 1e-9 or branch.lam_im[i + 1] > 1e-9) \
        else "unclassified"
    return TippingLabel(mu_c=mu_c, bif_type=kind)
