"""Corpus generation, null-corpus shuffling, and benchmark test suites.

Corpus recipe per accepted bifurcation: five noisy ramped runs whose rate
multipliers are drawn without replacement from 1..10, each labeled by the
recovery-rate sign change of a noise-free twin at the same rate, then
irregularly sampled, detrended, left-zeroed and normalized.  Generation is
restartable and byte-deterministic for a fixed seed: every (system index,
parameter, direction) gets its own child RNG, so quota-driven skipping never
shifts another unit's draws.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from . import bifurcation as bif
from . import preprocess as prep
from .integrate import (DivergenceError, NoiseSpec, RampSpec,
                        converge_to_equilibrium, euler_maruyama_run,
                        euler_run)
from .systems import (MODEL_IDS, ArgumentError, NamedModel,
                      PolynomialSystem2D, TipcastError)

BIF_TYPES = ("fold", "hopf", "transcritical")
SWEEP_SPAN = 4.0          # coefficient exploration range around its value
SWEEP_STEPS = 2000
RATE_MULTIPLIERS = np.arange(1, 11)
BASE_SWEEP_STEPS = 100_000  # ramp length (steps) at multiplier 1
BURN_IN_TIME = 100.0
OVERSHOOT = 1.2           # terminal mu at mu0 + 1.2*(crossing - mu0)
MAX_LABEL_RETRIES = 20
DEFAULT_MAX_SYSTEMS = 200_000
MIN_SAMPLE_POINTS = prep.MIN_SAMPLE_POINTS
MAX_SAMPLE_POINTS = prep.MAX_SAMPLE_POINTS
SIGMA_TEST = 0.01
TRIANGULAR = (0.0075, 0.01, 0.0125)


class PartialCorpusError(TipcastError):
    """Quota unreachable within max_systems; carries the counts reached."""

    def __init__(self, counts, manifest_path):
        super().__init__(f"corpus incomplete: {counts} (manifest kept at "
                         f"{manifest_path} for resume)")
        self.counts = counts
        self.manifest_path = manifest_path


@dataclass(frozen=True)
class CorpusConfig:
    target_count_per_type: int
    noise_kind: str = "white"
    seed: int = 0
    dt: float = 0.01
    output_dir: str = "corpus"
    max_systems: int = DEFAULT_MAX_SYSTEMS

    def __post_init__(self):
        if self.target_count_per_type <= 0:
            raise ArgumentError("target_count_per_type must be > 0")
        if self.noise_kind not in ("white", "red"):
            raise ArgumentError("noise_kind must be white or red")


def _rng_for(*key):
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def _sample_system_coeffs(rng):
    coeffs = rng.standard_normal(20)
    zero_idx = rng.choice(20, size=10, replace=False)
    coeffs[zero_idx] = 0.0
    for eq in (0, 10):
        for i in (6, 7, 8, 9):
            coeffs[eq + i] = -abs(coeffs[eq + i])
    return coeffs


def _draw_noise(noise_kind, rng):
    sigma = rng.triangular(*TRIANGULAR)
    if noise_kind == "white":
        return NoiseSpec(kind="white", sigma=sigma)
    phi = rng.uniform(-1.0, 1.0)
    return NoiseSpec(kind="red", sigma=sigma, phi=phi)


def _burned_in_state(system, xeq, mu0, noise, dt, rng):
    ramp = RampSpec(mu0=mu0, rate=0.0, mu_end=mu0)
    n = int(round(BURN_IN_TIME / dt))
    try:
        traj = euler_maruyama_run(system, xeq, ramp, noise, dt=dt, rng=rng,
                                  n_steps=n)
    except DivergenceError:
        return None
    return traj.x[-1]


def _make_instance(traj, mu0, mu_c, rng, observed=0):
    """Sample, detrend, zero+normalize; retry draws until the label lands in
    the training range; None when the trajectory cannot yield an instance."""
    for _ in range(MAX_LABEL_RETRIES):
        try:
            raw = prep.irregular_sample(traj, (mu0, mu_c), rng,
                                        observed=observed)
        except prep.DataError:
            return None
        residual = prep.lowess_detrend(raw.state_seq, raw.mu_seq)
        try:
            inst = prep.zero_and_normalize(residual, raw.mu_seq, mu_c, rng)
        except prep.DataError:
            return None
        lo, hi = prep.LABEL_RANGE
        if lo <= inst.label_norm <= hi:
            return inst
    return None


def _system_products(cfg, sys_idx, needed_types):
    """All candidate instances for one sampled system, in deterministic
    order.  needed_types gates only the expensive run stage; the returned
    products are independent of when the call happens."""
    rng = _rng_for(cfg.seed, sys_idx)
    coeffs = _sample_system_coeffs(rng)
    x0 = rng.standard_normal(2)
    nonzero = [int(i) for i in np.flatnonzero(coeffs)]
    probe = PolynomialSystem2D(a=tuple(coeffs[:10]), b=tuple(coeffs[10:]),
                               bif_param_index=nonzero[0])
    xeq = converge_to_equilibrium(probe, x0, probe.mu0)
    if xeq is None:
        return []
    products = []
    for p_idx in nonzero:
        system = PolynomialSystem2D(a=tuple(coeffs[:10]),
                                    b=tuple(coeffs[10:]),
                                    bif_param_index=p_idx)
        mu0 = system.mu0
        for d_idx, direction in enumerate((1.0, -1.0)):
            found = bif.classify_direction(system, xeq, mu0, direction,
                                           span=SWEEP_SPAN, steps=SWEEP_STEPS)
            if found is None:
                continue
            bif_type, mu_c_static = found
            if bif_type not in needed_types:
                continue
            run_rng = _rng_for(cfg.seed, sys_idx, p_idx, d_idx)
            mu_end = mu0 + OVERSHOOT * (mu_c_static - mu0)
            base_rate = (mu_end - mu0) / (BASE_SWEEP_STEPS * cfg.dt)
            mults = run_rng.choice(RATE_MULTIPLIERS, size=5, replace=False)
            for m in mults:
                rate = base_rate * float(m)
                ramp = RampSpec(mu0=mu0, rate=rate, mu_end=mu_end)
                try:
                    clean = euler_run(system, xeq, ramp, dt=cfg.dt)
                except DivergenceError as exc:
                    clean = exc.trajectory
                if clean is None or len(clean.mu) < 2:
                    continue
                label = bif.label_tipping_from_run(system, clean)
                if label is None:
                    continue
                noise = _draw_noise(cfg.noise_kind, run_rng)
                x_start = _burned_in_state(system, xeq, mu0, noise, cfg.dt,
                                           run_rng)
                if x_start is None:
                    continue
                noisy_ramp = RampSpec(mu0=mu0, rate=rate, mu_end=label.mu_c)
                try:
                    noisy = euler_maruyama_run(system, x_start, noisy_ramp,
                                               noise, dt=cfg.dt, rng=run_rng)
                except DivergenceError:
                    continue
                inst = _make_instance(noisy, mu0, label.mu_c, run_rng)
                if inst is None:
                    continue
                products.append((bif_type, inst))
    return products


def _manifest_path(out_dir):
    return os.path.join(out_dir, "manifest.json")


def _config_dict(cfg):
    return asdict(cfg)


def _file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def generate_corpus(cfg, resume=False, progress=None, jobs=1):
    """Generate (or resume) a balanced training corpus.

    Writes instances.csv (the preprocess row contract), instances.json
    sidecar, and manifest.json with config, counts, and the content hash.
    Raises PartialCorpusError when max_systems is exhausted first.

    jobs > 1 fans system processing out to worker processes; outputs are
    byte-identical for any jobs value because every (system, parameter,
    direction) unit has its own RNG stream, products are consumed strictly
    in system order, and quota gating can only skip work for types that are
    already (hence permanently) full.
    """
    os.makedirs(cfg.output_dir, exist_ok=True)
    inst_path = os.path.join(cfg.output_dir, "instances.csv")
    man_path = _manifest_path(cfg.output_dir)
    counts = {t: 0 for t in BIF_TYPES}
    start_idx = 0
    if resume and os.path.exists(man_path):
        with open(man_path) as fh:
            man = json.load(fh)
        stored = dict(man["config"])
        current = _config_dict(cfg)
        for key in ("noise_kind", "seed", "dt"):
            if stored.get(key) != current[key]:
                raise ArgumentError(f"resume config mismatch on {key}")
        counts.update(man["counts"])
        start_idx = man["next_system_index"]
    elif os.path.exists(inst_path):
        os.remove(inst_path)
    open(inst_path, "a").close()

    target = cfg.target_count_per_type
    pool = None
    pending = None
    if jobs > 1:
        import concurrent.futures as cf
        pool = cf.ProcessPoolExecutor(max_workers=jobs)
        pending = {}

    def products_for(idx, needed):
        if pool is None:
            return _system_products(cfg, idx, needed)
        # keep a window of submitted futures ahead of the consumer
        while len(pending) < 3 * jobs and max(pending, default=idx - 1) + 1 \
                < cfg.max_systems:
            nxt = max(pending, default=idx - 1) + 1
            pending[nxt] = pool.submit(_system_products, cfg, nxt, needed)
        return pending.pop(idx).result()

    try:
        sys_idx = start_idx
        while any(counts[t] < target for t in BIF_TYPES):
            if sys_idx >= cfg.max_systems:
                _write_manifest(cfg, counts, sys_idx, inst_path, man_path,
                                complete=False)
                raise PartialCorpusError(counts, man_path)
            needed = frozenset(t for t in BIF_TYPES if counts[t] < target)
            products = products_for(sys_idx, needed)
            accepted = []
            for bif_type, inst in products:
                if counts[bif_type] < target:
                    counts[bif_type] += 1
                    accepted.append((bif_type, inst))
            if accepted:
                prep.append_instances(inst_path,
                                      [inst for _, inst in accepted])
            sys_idx += 1
            if progress is not None and sys_idx % 200 == 0:
                progress(sys_idx, dict(counts))
    finally:
        if pool is not None:
            for fut in pending.values():
                fut.cancel()
            pool.shutdown(wait=False)
    return _write_manifest(cfg, counts, sys_idx, inst_path, man_path,
                           complete=True)


def _write_manifest(cfg, counts, next_idx, inst_path, man_path, complete):
    man = {
        "config": _config_dict(cfg),
        "counts": dict(counts),
        "count": int(sum(counts.values())),
        "noise_kind": cfg.noise_kind,
        "seed": cfg.seed,
        "next_system_index": int(next_idx),
        "complete": bool(complete),
        "files": {"instances": os.path.basename(inst_path)},
        "content_hash": _file_hash(inst_path),
    }
    with open(man_path, "w") as fh:
        json.dump(man, fh, indent=1, sort_keys=True)
    prep.write_sidecar(inst_path.replace(".csv", ".json"),
                       count=man["count"], bif_type_counts=dict(counts),
                       noise_kind=cfg.noise_kind, seed=cfg.seed)
    return man


def make_null_corpus(corpus_dir, out_dir, rng):
    """Shuffled twin of a corpus: permute each instance's non-zero residual
    segment uniformly; parameter channel and label stay untouched."""
    with open(_manifest_path(corpus_dir)) as fh:
        man = json.load(fh)
    instances = prep.read_instances(
        os.path.join(corpus_dir, man["files"]["instances"]))
    os.makedirs(out_dir, exist_ok=True)
    out = []
    for inst in instances:
        res = inst.residual.copy()
        nz = np.flatnonzero(res != 0.0)
        start = nz[0] if len(nz) else len(res)
        seg = res[start:]
        res[start:] = rng.permutation(seg)
        out.append(prep.TrainingInstance(residual=res, mu_norm=inst.mu_norm,
                                         label_norm=inst.label_norm))
    inst_path = os.path.join(out_dir, "instances.csv")
    prep.write_instances(inst_path, out)
    null_man = dict(man)
    null_man["null_of"] = man["content_hash"]
    null_man["content_hash"] = _file_hash(inst_path)
    with open(_manifest_path(out_dir), "w") as fh:
        json.dump(null_man, fh, indent=1, sort_keys=True)
    prep.write_sidecar(inst_path.replace(".csv", ".json"),
                       count=null_man["count"],
                       bif_type_counts=null_man["counts"],
                       noise_kind=null_man["noise_kind"],
                       seed=null_man["seed"])
    return null_man


def model_ground_truth(model_id, rate=None, mu_start=None):
    """Rate-delayed tipping value of a benchmark model: recovery-rate sign
    change along the noise-free ramped run (the shared suite ground truth)."""
    model = NamedModel(model_id)
    spec = model.spec
    rate = spec.rate if rate is None else rate
    mu_start = spec.initial_values[0] if mu_start is None else mu_start
    xeq = converge_to_equilibrium(model, np.asarray(spec.default_state),
                                  mu_start, dt=spec.dt, n_steps=200_000)
    if xeq is None:
        raise TipcastError(f"{model_id}: no equilibrium at mu={mu_start}")
    mu_end = _generous_end(model_id, mu_start, rate)
    ramp = RampSpec(mu0=mu_start, rate=rate, mu_end=mu_end)
    try:
        clean = euler_run(model, xeq, ramp, dt=spec.dt)
    except DivergenceError as exc:
        clean = exc.trajectory
    label = bif.label_tipping_from_run(model, clean)
    if label is None:
        raise TipcastError(f"{model_id}: no tipping before mu={mu_end}")
    return label, xeq


def _generous_end(model_id, mu_start, rate):
    """A terminal parameter value safely past the published crossings."""
    fixed = {
        "may_fold": 0.45, "food_chain_hopf": 0.75,
        "rosenzweig_transcritical": 7.5, "energy_balance_fold": 0.75,
        "pleistocene_hopf": 0.5, "triffid_transcritical": -0.12,
    }
    if model_id in fixed:
        return fixed[model_id]
    # hysteresis models sweep their documented interval
    if model_id == "sleep_wake_hysteresis":
        return 1.9 if rate > 0 else 0.1
    return 2.0 * np.pi if rate > 0 else np.pi


def generate_test_suite(model_id, out_dir, initial_values=None, n_series=50,
                        sampling="irregular", seed=0, sigma=SIGMA_TEST,
                        progress=None):
    """Noisy benchmark series for one model: n_series per initial value.

    Ground truth is shared across the suite (fixed ramp rate).  Each series
    is length 250..500, sampled regularly or irregularly, ending a relative
    distance 0.01..2 short of the tip.  Writes raw.npz, instances.csv (dl
    input contract), meta.csv, and ground_truth.json.
    """
    if sampling not in ("regular", "irregular"):
        raise ArgumentError("sampling must be regular or irregular")
    if model_id not in MODEL_IDS:
        raise ArgumentError(f"unknown model id: {model_id}")
    model = NamedModel(model_id)
    spec = model.spec
    initial_values = list(spec.initial_values) if initial_values is None \
        else list(initial_values)
    label, _ = model_ground_truth(model_id, mu_start=initial_values[0])
    mu_c = label.mu_c
    direction = 1.0 if spec.rate > 0 else -1.0
    noise_kind = spec.noise_kind

    os.makedirs(out_dir, exist_ok=True)
    series = []
    index = 0
    for iv_idx, iv in enumerate(initial_values):
        if (mu_c - iv) * direction <= 0.0:
            raise ArgumentError(
                f"initial value {iv} is not before the tipping point {mu_c}")
        xeq = converge_to_equilibrium(model, np.asarray(spec.default_state),
                                      iv, dt=spec.dt, n_steps=200_000)
        if xeq is None:
            raise TipcastError(f"{model_id}: no equilibrium at mu={iv}")
        for s in range(n_series):
            rng = _rng_for(seed, iv_idx, s)
            if noise_kind == "red":
                noise = NoiseSpec(kind="red", sigma=sigma,
                                  phi=rng.uniform(-1.0, 1.0))
            else:
                noise = NoiseSpec(kind="white", sigma=sigma)
            x_start = _burned_in_state(model, xeq, iv, noise, spec.dt, rng)
            if x_start is None:
                raise TipcastError(f"{model_id}: burn-in diverged at mu={iv}")
            ramp = RampSpec(mu0=iv, rate=spec.rate, mu_end=mu_c)
            try:
                traj = euler_maruyama_run(model, x_start, ramp, noise,
                                          dt=spec.dt, rng=rng)
            except DivergenceError as exc:
                traj = exc.trajectory
            rec = _sample_test_series(traj, iv, mu_c, direction, sampling,
                                      rng, spec.observed)
            if rec is None:
                raise TipcastError(
                    f"{model_id}: series at mu={iv} too short to sample")
            rec.update({"initial_value": float(iv), "index": index})
            series.append(rec)
            index += 1
        if progress is not None:
            progress(iv_idx + 1, len(initial_values))
    _write_suite(out_dir, model_id, mu_c, initial_values, series, sampling,
                 seed, n_series)
    return {"model_id": model_id, "mu_c": mu_c,
            "initial_values": [float(v) for v in initial_values],
            "series": series}


def _sample_test_series(traj, mu_first, mu_c, direction, sampling, rng,
                        observed):
    """One test series, built by the training-data recipe: draw l_s points
    between the initial value and the tip, keep the first 500, then drop a
    left stretch of up to 250 points.

    This reproduces both published test-set properties at once (lengths
    250..500, tip distances 0.01..2 = (l_s-500)/(500-z)) and keeps the joint
    length/distance distribution identical to the training corpus.
    """
    inside = np.flatnonzero(((traj.mu - mu_first) * direction >= 0.0)
                            & ((mu_c - traj.mu) * direction > 0.0))
    if len(inside) < MAX_SAMPLE_POINTS:
        return None
    lo, hi = prep.LABEL_RANGE
    for _ in range(MAX_LABEL_RETRIES):
        l_s = int(rng.integers(MIN_SAMPLE_POINTS, MAX_SAMPLE_POINTS + 1))
        if sampling == "regular":
            picks = inside[np.round(np.linspace(0, len(inside) - 1,
                                                l_s)).astype(int)]
        else:
            picks = np.sort(rng.choice(inside, size=l_s, replace=False))
        picks = picks[:prep.INSTANCE_LEN]
        drop = int(rng.integers(0, prep.MAX_ZERO_PREFIX + 1))
        picks = picks[drop:]
        mu = traj.mu[picks]
        label = (mu_c - mu[0]) / (mu[-1] - mu[0])
        if lo <= label <= hi:
            break
    else:
        return None
    return {"mu": mu.copy(),
            "x": traj.x[picks, observed].copy(),
            "states": traj.x[picks, :].copy(),
            "mu_c": mu_c}


def _write_suite(out_dir, model_id, mu_c, initial_values, series, sampling,
                 seed, n_series):
    arrays = {}
    meta_rows = []
    instances = []
    for rec in series:
        i = rec["index"]
        arrays[f"mu_{i}"] = rec["mu"]
        arrays[f"x_{i}"] = rec["x"]
        arrays[f"states_{i}"] = rec["states"]
        residual = prep.lowess_detrend(rec["x"], rec["mu"])
        pad = prep.INSTANCE_LEN - len(residual)
        res_p = np.concatenate([np.zeros(pad), residual])
        mu_p = np.concatenate([np.zeros(pad), rec["mu"]])
        inst = prep.zero_and_normalize(res_p, mu_p, mu_c, prefix=pad)
        instances.append(inst)
        meta_rows.append({"index": i, "initial_value": rec["initial_value"],
                          "length": len(rec["mu"]),
                          "mu_first": rec["mu"][0], "mu_last": rec["mu"][-1],
                          "mu_end": rec["mu"][-1], "mu_c": mu_c})
    np.savez_compressed(os.path.join(out_dir, "raw.npz"), **arrays)
    prep.write_instances(os.path.join(out_dir, "instances.csv"), instances)
    with open(os.path.join(out_dir, "meta.csv"), "w") as fh:
        cols = list(meta_rows[0].keys())
        fh.write(",".join(cols) + "\n")
        for row in meta_rows:
            fh.write(",".join("%.17g" % row[c] if isinstance(row[c], float)
                              else str(row[c]) for c in cols) + "\n")
    with open(os.path.join(out_dir, "ground_truth.json"), "w") as fh:
        json.dump({"model_id": model_id, "mu_c": mu_c,
                   "initial_values": [float(v) for v in initial_values],
                   "sampling": sampling, "seed": seed,
                   "n_series": n_series}, fh, indent=1, sort_keys=True)


def load_test_suite(out_dir):
    """Read a suite back into the structure compare_methods consumes."""
    with open(os.path.join(out_dir, "ground_truth.json")) as fh:
        gt = json.load(fh)
    data = np.load(os.path.join(out_dir, "raw.npz"))
    series = []
    with open(os.path.join(out_dir, "meta.csv")) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            vals = dict(zip(header, line.strip().split(",")))
            i = int(vals["index"])
            series.append({"index": i, "initial_value": float(vals["initial_value"]),
                           "mu": data[f"mu_{i}"], "x": data[f"x_{i}"],
                           "states": data[f"states_{i}"],
                           "mu_c": gt["mu_c"]})
    return {"model_id": gt["model_id"], "mu_c": gt["mu_c"],
            "initial_values": gt["initial_values"], "series": series}
