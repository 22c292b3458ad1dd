"""Euler / Euler-Maruyama stepping under a linearly ramped bifurcation
parameter, AR(1)/white noise generation, and equilibrium convergence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .systems import ArgumentError, TipcastError, pack_state

DEFAULT_DT = 0.01
CONVERGE_STEPS = 10_000
CONVERGE_TOL = 1.0e-8
OVERFLOW_GUARD = K.OVERFLOW_GUARD


class DivergenceError(TipcastError):
    """State exceeded the overflow guard; carries the last valid step index."""

    def __init__(self, last_index, trajectory=None):
        super().__init__(f"trajectory diverged after step {last_index}")
        self.last_index = last_index
        self.trajectory = trajectory


@dataclass(frozen=True)
class RampSpec:
    """Linear parameter ramp mu(t) = mu0 + rate * t, stopped at mu_end."""

    mu0: float
    rate: float
    mu_end: float

    def __post_init__(self):
        if self.rate != 0.0 and np.sign(self.mu_end - self.mu0) != np.sign(self.rate):
            raise ArgumentError("sign(mu_end - mu0) must match sign(rate)")

    def n_steps(self, dt):
        if self.rate == 0.0:
            raise ArgumentError("rate=0 ramp needs an explicit step count")
        return int(np.ceil((self.mu_end - self.mu0) / (self.rate * dt) - 1e-12))


@dataclass(frozen=True)
class NoiseSpec:
    """White or AR(1) (red) additive noise; sigma scales the innovations."""

    kind: str = "none"
    sigma: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if self.kind not in ("white", "red", "none"):
            raise ArgumentError(f"unknown noise kind: {self.kind}")
        if self.sigma < 0.0:
            raise ArgumentError("sigma must be >= 0")
        if self.kind == "red" and not (-1.0 < self.phi < 1.0):
            raise ArgumentError("red noise needs |phi| < 1")


@dataclass
class Trajectory:
    """Aligned (t, x, mu) arrays from one run; x has shape (n, dim)."""

    t: np.ndarray
    x: np.ndarray
    mu: np.ndarray
    dt: float = DEFAULT_DT

    def __post_init__(self):
        if not (len(self.t) == len(self.x) == len(self.mu)):
            raise ArgumentError("t, x, mu must have equal lengths")

    @property
    def dim(self):
        return self.x.shape[1]

    def to_csv(self, path):
        cols = ["t", "mu"] + [f"x{i}" for i in range(self.dim)]
        data = np.column_stack([self.t, self.mu, self.x])
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for row in data:
                fh.write(",".join("%.17g" % v for v in row) + "\n")


def ar1_series(phi, sigma, n, rng):
    """AR(1) sequence eta_{k+1} = phi*eta_k + sigma*N(0,1), eta_0 = 0."""
    if not (-1.0 < phi < 1.0):
        raise ArgumentError("need |phi| < 1")
    eps = sigma * rng.standard_normal(n)
    out = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc = phi * acc + eps[i]
        out[i] = acc
    return out


def _run(system, x0, ramp, dt, noise, rng, n_steps=None, keep_every=1):
    if dt <= 0.0:
        raise ArgumentError("dt must be > 0")
    x0p = pack_state(system, x0)
    if n_steps is None:
        n_steps = ramp.n_steps(dt)
    if n_steps <= 0:
        raise ArgumentError("ramp yields no steps")
    phi = 0.0
    inc = np.zeros((n_steps, 3))
    if noise is not None and noise.kind != "none" and noise.sigma > 0.0:
        inc[:, :system.dim] = (noise.sigma * np.sqrt(dt)
                               * rng.standard_normal((n_steps, system.dim)))
        if noise.kind == "red":
            phi = noise.phi
    xs, mus, status, last = K.euler_path(
        system.rhs_id, system.params_array(), system.bif_slot, system.dim,
        x0p, ramp.mu0, ramp.rate, n_steps, dt, inc, phi)
    n_keep = last + 1
    t = np.arange(n_keep) * dt
    traj = Trajectory(t=t[::keep_every],
                      x=xs[:n_keep:keep_every, :system.dim].copy(),
                      mu=mus[:n_keep:keep_every].copy(), dt=dt)
    if status != K.OK:
        raise DivergenceError(last, trajectory=traj)
    return traj


def euler_run(system, x0, ramp, dt=DEFAULT_DT, n_steps=None, keep_every=1):
    """Noise-free Euler stepping along the ramp.

    Raises DivergenceError (carrying the partial trajectory) once any state
    component exceeds the 1e8 overflow guard or an evaluation goes bad.
    """
    return _run(system, x0, ramp, dt, None, None, n_steps=n_steps,
                keep_every=keep_every)


def euler_maruyama_run(system, x0, ramp, noise, dt=DEFAULT_DT, rng=None,
                       n_steps=None, keep_every=1):
    """Euler-Maruyama stepping: adds sigma*sqrt(dt) innovations per component,
    run through an AR(1) filter when noise.kind == 'red' (phi=0 recovers the
    white path bit-for-bit under the same rng)."""
    if noise.kind != "none" and noise.sigma > 0.0 and rng is None:
        raise ArgumentError("noisy runs need an rng")
    return _run(system, x0, ramp, dt, noise, rng, n_steps=n_steps,
                keep_every=keep_every)


def converge_to_equilibrium(system, x0, mu, dt=DEFAULT_DT,
                            n_steps=CONVERGE_STEPS, tol=CONVERGE_TOL):
    """Run n_steps at fixed mu; return the final state if the last ten states
    agree within tol componentwise, else None (caller discards the system)."""
    x0p = pack_state(system, x0)
    x, ok = K.converge(system.rhs_id, system.params_array(), system.bif_slot,
                       system.dim, x0p, mu, n_steps, dt, tol)
    if not ok:
        return None
    return x[:system.dim].copy()
