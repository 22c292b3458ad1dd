"""Dynamical-system families: random 2D cubic polynomials, the benchmark
models, and the codimension-one normal forms.

Every system exposes the same flat contract used by the integrators:
an rhs-family id, a params array whose bif_slot entry is replaced by the
current bifurcation parameter, and a state dimension (at most 3).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K


class TipcastError(Exception):
    """Base class for package errors."""


class ArgumentError(TipcastError):
    """Invalid argument (dimension mismatch, non-finite input, ...)."""


class NumericError(TipcastError):
    """Evaluation hit a guarded denominator or produced non-finite values."""


MONOMIALS = ("1", "x", "y", "x^2", "xy", "y^2", "x^3", "x^2y", "xy^2", "y^3")
CUBIC_IDX = (6, 7, 8, 9)


@dataclass(frozen=True)
class PolynomialSystem2D:
    """Random planar system with cubic polynomial right-hand sides.

    a, b: coefficient vectors over (1, x, y, x^2, xy, y^2, x^3, x^2y, xy^2,
    y^3) for dx/dt and dy/dt; bif_param_index in 0..19 marks the coefficient
    swept as the bifurcation parameter (0..9 -> a, 10..19 -> b).
    """

    a: tuple
    b: tuple
    bif_param_index: int

    def __post_init__(self):
        if len(self.a) != 10 or len(self.b) != 10:
            raise ArgumentError("need 10 coefficients per equation")
        coeffs = list(self.a) + list(self.b)
        if not (0 <= self.bif_param_index < 20):
            raise ArgumentError("bif_param_index out of range")
        if coeffs[self.bif_param_index] == 0.0:
            raise ArgumentError("bifurcation parameter must be a nonzero coefficient")

    @property
    def dim(self):
        return 2

    @property
    def rhs_id(self):
        return K.POLY2D

    @property
    def bif_slot(self):
        return self.bif_param_index

    @property
    def mu0(self):
        """Current value of the designated bifurcation coefficient."""
        return self.params_array()[self.bif_param_index]

    def params_array(self):
        return np.asarray(list(self.a) + list(self.b), dtype=np.float64)

    def to_json(self):
        return json.dumps({"a": list(self.a), "b": list(self.b),
                           "bif_param_index": self.bif_param_index})

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(a=tuple(d["a"]), b=tuple(d["b"]),
                   bif_param_index=int(d["bif_param_index"]))


@dataclass(frozen=True)
class _ModelSpec:
    rhs_id: int
    dim: int
    param_names: tuple
    defaults: dict
    bif_param_name: str
    rate: float
    initial_values: tuple
    dt: float
    default_state: tuple
    noise_kind: str
    observed: int = 0


# Benchmark models with the published parameter values.  Rates are per unit
# time; negative rates mean decreasing sweeps.  energy_balance uses dt=1.
_MODEL_TABLE = {
    "may_fold": _ModelSpec(
        rhs_id=K.MAY, dim=1,
        param_names=("r", "k", "s", "h"),
        defaults={"r": 1.0, "k": 1.0, "s": 0.1, "h": 0.0},
        bif_param_name="h", rate=6.25e-4,
        initial_values=tuple(np.round(np.linspace(0.0, 0.2, 11), 10)),
        dt=0.01, default_state=(0.8,), noise_kind="white"),
    "food_chain_hopf": _ModelSpec(
        rhs_id=K.FOOD_CHAIN, dim=3,
        param_names=("k", "x_c", "y_c", "x_p", "y_p", "r_0", "c_0"),
        defaults={"k": 0.2, "x_c": 0.4, "y_c": 2.009, "x_p": 0.08,
                  "y_p": 2.876, "r_0": 0.16129, "c_0": 0.5},
        bif_param_name="k", rate=1.54e-3,
        initial_values=tuple(np.round(np.linspace(0.20, 0.40, 11), 10)),
        dt=0.01, default_state=(0.15, 0.1, 0.05), noise_kind="white"),
    "rosenzweig_transcritical": _ModelSpec(
        rhs_id=K.ROSENZWEIG, dim=2,
        param_names=("g", "k", "e", "h", "m", "a"),
        defaults={"g": 4.0, "k": 1.7, "e": 0.5, "h": 0.15, "m": 2.0,
                  "a": 0.0},
        bif_param_name="a", rate=8.112e-3,
        initial_values=tuple(np.round(np.linspace(0.0, 5.0, 11), 10)),
        dt=0.01, default_state=(1.5, 0.1), noise_kind="white"),
    "energy_balance_fold": _ModelSpec(
        rhs_id=K.ENERGY_BALANCE, dim=1,
        param_names=("e", "I_0", "c", "a", "b", "rho", "u"),
        # rho = 0.003: the only value consistent with an equilibrium branch
        # and the published fold location (see notes in the repo history).
        defaults={"e": 0.69, "I_0": 71944000.0, "c": 1.0e8, "a": 2.8,
                  "b": 0.009, "rho": 0.003, "u": 1.4},
        bif_param_name="u", rate=-6.0e-7,
        initial_values=tuple(np.round(np.linspace(1.4, 1.2, 11), 10)),
        dt=1.0, default_state=(290.0,), noise_kind="red"),
    "pleistocene_hopf": _ModelSpec(
        rhs_id=K.PLEISTOCENE, dim=3,
        param_names=("p", "q", "s", "u"),
        defaults={"p": 1.0, "q": 1.2, "s": 0.8, "u": 0.0},
        bif_param_name="u", rate=8.4e-6,
        initial_values=tuple(np.round(np.linspace(0.0, 0.3, 11), 10)),
        dt=0.01, default_state=(0.1, 0.1, 0.1), noise_kind="red"),
    "triffid_transcritical": _ModelSpec(
        rhs_id=K.TRIFFID, dim=1,
        param_names=("G", "P"),
        defaults={"G": 0.004, "P": 0.9},
        bif_param_name="P", rate=-2.4e-3,
        initial_values=tuple(np.round(np.linspace(0.90, 0.10, 11), 10)),
        dt=0.01, default_state=(0.9,), noise_kind="red"),
    "sleep_wake_hysteresis": _ModelSpec(
        rhs_id=K.SLEEP_WAKE, dim=2,
        param_names=("tau_v", "tau_m", "v_vm", "v_mv", "v_ma_q_a", "q_max",
                     "theta", "sigma_q", "D"),
        defaults={"tau_v": 10.0, "tau_m": 10.0, "v_vm": -1.9, "v_mv": -1.9,
                  "v_ma_q_a": 1.0, "q_max": 100.0, "theta": 10.0,
                  "sigma_q": 3.0, "D": 0.1},
        bif_param_name="D", rate=1.0 / 7200.0,
        initial_values=(0.1,), dt=0.01, default_state=(-10.0, 1.0),
        noise_kind="white", observed=1),
    "sprott_b_hysteresis": _ModelSpec(
        rhs_id=K.SPROTT_B, dim=3,
        param_names=("a", "b", "beta", "k"),
        defaults={"a": 8.0, "b": 2.89, "beta": 5.0, "k": np.pi},
        bif_param_name="k", rate=np.pi * 1.0e-3,
        initial_values=(np.pi,), dt=0.01, default_state=(1.7, 1.7, 2.9),
        noise_kind="white"),
}

MODEL_IDS = tuple(_MODEL_TABLE)


@dataclass(frozen=True)
class NamedModel:
    """One of the benchmark models, with its published parameter values."""

    model_id: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model_id not in _MODEL_TABLE:
            raise ArgumentError(f"unknown model id: {self.model_id}")
        spec = _MODEL_TABLE[self.model_id]
        merged = dict(spec.defaults)
        for k, v in self.params.items():
            if k not in merged:
                raise ArgumentError(f"{self.model_id} has no parameter {k!r}")
            merged[k] = float(v)
        object.__setattr__(self, "params", merged)

    @property
    def spec(self):
        return _MODEL_TABLE[self.model_id]

    @property
    def dim(self):
        return self.spec.dim

    @property
    def rhs_id(self):
        return self.spec.rhs_id

    @property
    def bif_param_name(self):
        return self.spec.bif_param_name

    @property
    def bif_slot(self):
        return self.spec.param_names.index(self.spec.bif_param_name)

    @property
    def state_dim(self):
        return self.spec.dim

    @property
    def mu0(self):
        return self.params[self.bif_param_name]

    def params_array(self):
        return np.asarray([self.params[n] for n in self.spec.param_names],
                          dtype=np.float64)

    def to_json(self):
        return json.dumps({"model_id": self.model_id, "params": self.params})

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(model_id=d["model_id"], params=d.get("params", {}))


_NORMAL_FORMS = {
    "fold": (K.NF_FOLD, 1),
    "hopf_super": (K.NF_HOPF_SUPER, 2),
    "hopf_sub": (K.NF_HOPF_SUB, 2),
    "transcritical": (K.NF_TRANSCRITICAL, 1),
}


@dataclass(frozen=True)
class NormalForm:
    """Codimension-one normal form (mu is the bifurcation parameter)."""

    kind: str

    def __post_init__(self):
        if self.kind not in _NORMAL_FORMS:
            raise ArgumentError(f"unknown normal form: {self.kind}")

    @property
    def dim(self):
        return _NORMAL_FORMS[self.kind][1]

    @property
    def rhs_id(self):
        return _NORMAL_FORMS[self.kind][0]

    @property
    def bif_slot(self):
        return 0

    def params_array(self):
        return np.zeros(1)


def _params_of(system):
    return system.params_array()


def _check_state(system, state):
    state = np.asarray(state, dtype=np.float64)
    if state.ndim != 1 or state.shape[0] != system.dim:
        raise ArgumentError(
            f"state dimension {state.shape} does not match system dim {system.dim}")
    if not np.all(np.isfinite(state)):
        raise ArgumentError("non-finite state component")
    return state


def pack_state(system, state):
    """3-slot padded copy of a validated state vector."""
    state = _check_state(system, state)
    out = np.zeros(3)
    out[:system.dim] = state
    return out


def eval_rhs(system, state, mu):
    """Deterministic drift f(state, mu); noise excluded."""
    if not np.isfinite(mu):
        raise ArgumentError("mu must be finite")
    x = pack_state(system, state)
    p = _params_of(system)
    p[system.bif_slot] = mu
    out = np.empty(3)
    if not K.rhs_fill(system.rhs_id, p, x, out):
        raise NumericError("rhs evaluation hit a guarded denominator")
    if not np.all(np.isfinite(out[:system.dim])):
        raise NumericError("rhs evaluation produced non-finite values")
    return out[:system.dim].copy()


def jacobian(system, state, mu):
    """d f_i / d x_j at (state, mu); analytic where available, else central
    finite differences with step 1e-6 * max(1, |x_j|)."""
    if not np.isfinite(mu):
        raise ArgumentError("mu must be finite")
    x = pack_state(system, state)
    p = _params_of(system)
    p[system.bif_slot] = mu
    jac = np.zeros((3, 3))
    if not K.jac_fill(system.rhs_id, p, x, system.dim, jac):
        raise NumericError("jacobian evaluation hit a guarded denominator")
    out = jac[:system.dim, :system.dim].copy()
    if not np.all(np.isfinite(out)):
        raise NumericError("jacobian evaluation produced non-finite values")
    return out


def sample_random_system(rng):
    """Draw a random polynomial system per the training-library recipe.

    Coefficients are standard normal, a uniformly random half of the 20 are
    zeroed, cubic coefficients are forced non-positive, and the bifurcation
    parameter index is drawn uniformly over the surviving coefficients.
    """
    coeffs = rng.standard_normal(20)
    zero_idx = rng.choice(20, size=10, replace=False)
    coeffs[zero_idx] = 0.0
    for eq in (0, 10):
        for i in CUBIC_IDX:
            coeffs[eq + i] = -abs(coeffs[eq + i])
    nonzero = np.flatnonzero(coeffs)
    bif = int(rng.choice(nonzero))
    return PolynomialSystem2D(a=tuple(coeffs[:10]), b=tuple(coeffs[10:]),
                              bif_param_index=bif)
