"""Command-line entry point: generate / simulate / predict / evaluate.

Every flag can also come from a TIPCAST_* environment variable (flag
--count-per-type <-> TIPCAST_COUNT_PER_TYPE etc.); explicit flags win.
Each run drops a config_echo.json beside its outputs so results are fully
reproducible from the echo alone.  Exit codes: 0 ok, 1 runtime error,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import evaluate as ev
from . import ews
from . import pipeline as pl
from . import preprocess as prep
from .bifurcation import classify_direction, label_tipping_from_run
from .integrate import (DivergenceError, NoiseSpec, RampSpec,
                        converge_to_equilibrium, euler_maruyama_run,
                        euler_run)
from .systems import MODEL_IDS, NamedModel, PolynomialSystem2D, TipcastError

ENV_PREFIX = "TIPCAST_"


def _env_default(flag, fallback=None):
    return os.environ.get(ENV_PREFIX + flag.strip("-").replace("-", "_").upper(),
                          fallback)


def _add(parser, flag, **kw):
    env = _env_default(flag)
    if env is not None:
        if kw.get("required"):
            kw["required"] = False
        if kw.get("action") == "store_true":
            kw["default"] = env.lower() in ("1", "true", "yes")
        else:
            kw["default"] = env
    parser.add_argument(flag, **kw)


def _echo_config(out_dir, command, args):
    os.makedirs(out_dir, exist_ok=True)
    blob = {"command": command,
            "args": {k: v for k, v in sorted(vars(args).items())
                     if k != "func"}}
    with open(os.path.join(out_dir, "config_echo.json"), "w") as fh:
        json.dump(blob, fh, indent=1, sort_keys=True, default=str)


def cmd_generate(args):
    cfg = pl.CorpusConfig(target_count_per_type=int(args.count_per_type),
                          noise_kind=args.noise, seed=int(args.seed),
                          output_dir=args.out,
                          max_systems=int(args.max_systems))
    _echo_config(args.out, "generate", args)
    man = pl.generate_corpus(cfg, resume=args.resume, jobs=int(args.jobs),
                             progress=lambda i, c: print(
                                 f"  systems={i} counts={c}", file=sys.stderr)
                             if args.verbose else None)
    if args.null_out:
        pl.make_null_corpus(args.out, args.null_out,
                            np.random.default_rng(int(args.seed) + 1))
        print(f"null corpus written to {args.null_out}")
    print(f"corpus complete: {man['counts']} hash={man['content_hash'][:16]}")
    return 0


def cmd_simulate(args):
    if args.system_json:
        with open(args.system_json) as fh:
            system = PolynomialSystem2D.from_json(fh.read())
        spec_dt = 0.01
        rate = args.rate if args.rate is not None else 1e-4
        mu0 = system.mu0 if args.init is None else float(args.init)
        x0 = np.zeros(2)
        noise_kind = args.noise or "white"
    else:
        model = NamedModel(args.model)
        spec = model.spec
        system = model
        spec_dt = spec.dt
        # direction overrides the published sweep sign (hysteresis sweeps)
        if args.direction == "down":
            base_rate = -abs(spec.rate)
        elif args.direction == "up":
            base_rate = abs(spec.rate)
        else:
            base_rate = spec.rate
        rate = args.rate if args.rate is not None else base_rate
        if args.init is not None:
            mu0 = float(args.init)
        elif rate * spec.rate > 0:
            mu0 = spec.initial_values[0]
        else:  # swept against the published direction: start at the far end
            mu0 = {"sleep_wake_hysteresis": 1.9,
                   "sprott_b_hysteresis": 2.0 * np.pi}.get(
                args.model, spec.initial_values[0])
        x0 = np.asarray(spec.default_state)
        noise_kind = args.noise or spec.noise_kind
    dt = float(args.dt) if args.dt is not None else spec_dt

    xeq = converge_to_equilibrium(system, x0, mu0, dt=dt, n_steps=200_000)
    if xeq is None:
        raise TipcastError(f"no stable equilibrium found at mu={mu0}")
    mu_end = float(args.mu_end) if args.mu_end is not None else \
        pl._generous_end(args.model, mu0, rate) if not args.system_json else \
        mu0 + np.sign(rate) * 4.0
    ramp = RampSpec(mu0=mu0, rate=rate, mu_end=mu_end)
    try:
        clean = euler_run(system, xeq, ramp, dt=dt)
    except DivergenceError as exc:
        clean = exc.trajectory
    label = label_tipping_from_run(system, clean)
    if label is None:
        raise TipcastError(f"no tipping detected before mu={mu_end}")
    # fold/transcritical discrimination comes from static continuation
    static = classify_direction(system, xeq, mu0, np.sign(rate),
                                span=abs(mu_end - mu0) * 1.5)
    bif_type = label.bif_type
    if static is not None and bif_type == "unclassified":
        bif_type = static[0]

    os.makedirs(args.out, exist_ok=True)
    _echo_config(args.out, "simulate", args)
    sigma = float(args.sigma)
    if sigma > 0.0:
        rng = np.random.default_rng(int(args.seed))
        if noise_kind == "red":
            noise = NoiseSpec(kind="red", sigma=sigma,
                              phi=rng.uniform(-1.0, 1.0))
        else:
            noise = NoiseSpec(kind="white", sigma=sigma)
        try:
            traj = euler_maruyama_run(system, xeq, ramp, noise, dt=dt,
                                      rng=rng)
        except DivergenceError as exc:
            traj = exc.trajectory
    else:
        traj = clean
    traj_path = os.path.join(args.out, "trajectory.csv")
    keep = max(1, len(traj.mu) // int(args.max_rows))
    type(traj)(t=traj.t[::keep], x=traj.x[::keep], mu=traj.mu[::keep],
               dt=traj.dt).to_csv(traj_path)
    with open(os.path.join(args.out, "label.json"), "w") as fh:
        fh.write(json.dumps({"mu_c": label.mu_c, "bif_type": bif_type}))
    print(f"tipping at mu_c={label.mu_c:.6g} ({bif_type}); "
          f"trajectory -> {traj_path}")
    return 0


def _read_series_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if "mu" not in header or "x" not in header:
            raise TipcastError(f"{path}: need a header with mu,x columns")
        mi, xi = header.index("mu"), header.index("x")
        mu, x = [], []
        for line in fh:
            parts = line.strip().split(",")
            mu.append(float(parts[mi]))
            x.append(float(parts[xi]))
    return np.asarray(mu), np.asarray(x)


def cmd_predict(args):
    mu, x = _read_series_csv(args.infile)
    smap = ews.SmapConfig(E=int(args.E), tau=int(args.tau),
                          theta=float(args.theta))
    if args.method in ("df", "bb", "dev"):
        mu_hat = ev.predict_baseline(mu, x, args.method,
                                     window_frac=float(args.window_frac),
                                     smap=smap, bb_branch=args.bb_branch)
    elif args.method == "null":
        null_label = ev.corpus_mean_label(args.corpus) if args.corpus \
            else ev.NULL_LABEL_DEFAULT
        mu_hat = ev.predict_null(mu, null_label)
    elif args.method == "dl":
        if not args.model_dir:
            raise TipcastError("--method dl needs --model-dir with trained "
                               "dlpredictor artifacts")
        mu_hat = _predict_dl_single(mu, x, args)
    else:
        raise TipcastError(f"unknown method {args.method}")
    if args.out:
        _echo_config(args.out, "predict", args)
    if mu_hat is None:
        print("prediction failed: indicator never reaches threshold")
        return 1
    line = f"mu_hat={mu_hat:.9g}"
    if args.truth is not None:
        mu_end = float(args.mu_end) if args.mu_end is not None else mu[-1]
        eps = ev.relative_error(mu_hat, float(args.truth), mu_end)
        line += f" epsilon={eps:.6g}"
    print(line)
    if args.out:
        with open(os.path.join(args.out, "prediction.json"), "w") as fh:
            json.dump({"method": args.method, "mu_hat": mu_hat}, fh)
    return 0


def _predict_dl_single(mu, x, args):
    import tempfile
    residual = prep.lowess_detrend(x, mu)
    n = len(mu)
    if n > prep.INSTANCE_LEN:
        raise TipcastError(f"series longer than {prep.INSTANCE_LEN}")
    pad = prep.INSTANCE_LEN - n
    if pad > prep.MAX_ZERO_PREFIX:
        raise TipcastError("series shorter than 250 points")
    res_p = np.concatenate([np.zeros(pad), residual])
    mu_p = np.concatenate([np.zeros(pad), mu])
    inst = prep.zero_and_normalize(res_p, mu_p, 0.0, prefix=pad)
    with tempfile.TemporaryDirectory() as td:
        ipath = os.path.join(td, "instances.csv")
        opath = os.path.join(td, "pred.csv")
        prep.write_instances(ipath, [inst])
        preds = ev.run_dl_predictor(ipath, opath, args.model_dir,
                                    executable=args.dl_exec.split()
                                    if args.dl_exec else None)
    label_hat = preds[0]
    return prep.denormalize_label(label_hat, mu[0], mu[-1])


def cmd_evaluate(args):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in ev.METHODS:
            raise TipcastError(f"unknown method {m!r}; choose from "
                               f"{','.join(ev.METHODS)}")
    os.makedirs(args.out, exist_ok=True)
    _echo_config(args.out, "evaluate", args)
    suite_dir = args.suite_dir or os.path.join(args.out, f"suite_{args.model}")
    if os.path.exists(os.path.join(suite_dir, "ground_truth.json")) \
            and not args.regenerate:
        suite = pl.load_test_suite(suite_dir)
    else:
        ivs = [float(v) for v in args.initial_values.split(",")] \
            if args.initial_values else None
        suite = pl.generate_test_suite(
            args.model, suite_dir, initial_values=ivs,
            n_series=int(args.n_series), sampling=args.sampling,
            seed=int(args.seed),
            progress=lambda i, n: print(f"  suite {i}/{n}", file=sys.stderr)
            if args.verbose else None)
    dl_predictions = None
    if "dl" in methods:
        if args.dl_predictions:
            dl_predictions = ev.read_prediction_file(args.dl_predictions)
        elif args.model_dir:
            dl_predictions = ev.run_dl_predictor(
                os.path.join(suite_dir, "instances.csv"),
                os.path.join(args.out, "dl_predictions.csv"),
                args.model_dir,
                executable=args.dl_exec.split() if args.dl_exec else None)
        else:
            raise TipcastError("method 'dl' needs --dl-predictions or "
                               "--model-dir; it is never substituted")
    null_label = ev.corpus_mean_label(args.corpus) if args.corpus \
        else ev.NULL_LABEL_DEFAULT
    smap = ews.SmapConfig(E=int(args.E), tau=int(args.tau),
                          theta=float(args.theta))
    rows = ev.compare_methods(suite, methods, args.out,
                              window_frac=float(args.window_frac),
                              smap=smap, bb_branch=args.bb_branch,
                              null_label=null_label,
                              dl_predictions=dl_predictions)
    print(f"wrote {os.path.join(args.out, 'comparison.csv')} "
          f"({len(rows)} rows)")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tipcast",
        description="bifurcation training corpora, tipping-point prediction "
                    "baselines, and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a training corpus")
    _add(g, "--count-per-type", required=True)
    _add(g, "--noise", choices=["white", "red"], default="white")
    _add(g, "--seed", default="0")
    _add(g, "--out", required=True)
    _add(g, "--max-systems", default=str(pl.DEFAULT_MAX_SYSTEMS))
    _add(g, "--jobs", default="1", help="worker processes for generation")
    _add(g, "--null-out", default=None,
         help="also write the shuffled null corpus here")
    _add(g, "--resume", action="store_true")
    _add(g, "--verbose", action="store_true")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("simulate", help="simulate one model to its tipping")
    _add(s, "--model", choices=list(MODEL_IDS))
    _add(s, "--system-json", default=None,
         help="polynomial system JSON instead of a named model")
    s.add_argument("--init", "--init-h", "--init-k", "--init-a", "--init-u",
                   "--init-p", "--init-d", dest="init", default=None,
                   help="initial bifurcation-parameter value")
    _add(s, "--direction", choices=["up", "down"], default=None)
    _add(s, "--rate", type=float, default=None)
    _add(s, "--mu-end", default=None)
    _add(s, "--dt", default=None)
    _add(s, "--sigma", default="0.0")
    _add(s, "--noise", choices=["white", "red"], default=None)
    _add(s, "--seed", default="0")
    _add(s, "--max-rows", default="20000")
    _add(s, "--out", required=True)
    s.set_defaults(func=cmd_simulate)

    p = sub.add_parser("predict", help="predict a tipping point for a series")
    _add(p, "--method", choices=list(ev.METHODS), required=True)
    _add(p, "--in", required=True)
    _add(p, "--truth", default=None)
    _add(p, "--mu-end", default=None)
    _add(p, "--window-frac", default="0.5")
    _add(p, "--E", default="3")
    _add(p, "--tau", default="1")
    _add(p, "--theta", default="0.0")
    _add(p, "--bb-branch", choices=["phi_gt_rho", "rho_gt_phi"],
         default="phi_gt_rho")
    _add(p, "--corpus", default=None,
         help="corpus manifest for the null predictor's mean label")
    _add(p, "--model-dir", default=None)
    _add(p, "--dl-exec", default=None)
    _add(p, "--out", default=None)
    p.set_defaults(func=cmd_predict)

    e = sub.add_parser("evaluate", help="score methods on a model test suite")
    _add(e, "--model", choices=list(MODEL_IDS), required=True)
    _add(e, "--methods", default="df,bb,dev,null")
    _add(e, "--n-series", default="50")
    _add(e, "--initial-values", default=None)
    _add(e, "--sampling", choices=["regular", "irregular"],
         default="irregular")
    _add(e, "--seed", default="0")
    _add(e, "--window-frac", default="0.5")
    _add(e, "--E", default="3")
    _add(e, "--tau", default="1")
    _add(e, "--theta", default="0.0")
    _add(e, "--bb-branch", choices=["phi_gt_rho", "rho_gt_phi"],
         default="phi_gt_rho")
    _add(e, "--corpus", default=None)
    _add(e, "--suite-dir", default=None)
    _add(e, "--regenerate", action="store_true")
    _add(e, "--dl-predictions", default=None)
    _add(e, "--model-dir", default=None)
    _add(e, "--dl-exec", default=None)
    _add(e, "--verbose", action="store_true")
    _add(e, "--out", required=True)
    e.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and not args.model and not args.system_json:
        parser.error("simulate needs --model or --system-json")
    if args.command == "predict":
        args.infile = getattr(args, "in")
    try:
        return args.func(args)
    except TipcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
