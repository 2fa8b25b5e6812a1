"""Experiment runner: one subcommand per experiment, flat key=value config
files, CSV outputs with a JSON run manifest, and manifest-driven reruns.

All rates are in units of the correction rate (gamma_c = 1 unless
overridden). Floats are serialized with repr for lossless round-trips, so a
rerun with the same seed reproduces every CSV byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__, concat, engine, gadget, toric4d, toy2d

EXIT_BOUND_VIOLATION = 1
EXIT_USAGE = 2
EXIT_INCONCLUSIVE = 3


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (np.integer,)):
        x = int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return ""
        if math.isinf(x):
            return "inf"
        return repr(x)
    return str(x)


def _int_list(s: str):
    return [int(v) for v in s.split(",") if v != ""]


def _float_list(s: str):
    return [float(v) for v in s.split(",") if v != ""]


def write_csv(path: str, header, rows) -> str:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outdir: str, subcommand: str, params: dict,
                   outputs, started: str) -> str:
    finished = datetime.datetime.now(datetime.timezone.utc).isoformat()
    manifest = {
        "subcommand": subcommand,
        "params": params,
        "seed": params.get("seed"),
        "version": __version__,
        "started": started,
        "finished": finished,
        "outputs": {os.path.basename(p): sha256_file(p) for p in outputs},
    }
    path = os.path.join(outdir, f"{subcommand}.manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# subcommand handlers: take the resolved namespace, return list of output
# file paths (manifest excluded)

def run_toric4d_lifetime(args) -> list:
    rows = []
    for N in args.N:
        lattice = None
        for ge in args.gamma_eps:
            params = toric4d.ToomParams(
                N=N, gamma_eps=ge, t_max=args.t_max, seed=args.seed,
                noise_convention=args.convention,
                check_interval=args.check_interval,
                max_sweeps=args.max_sweeps)
            est = toric4d.lifetime_estimate(params, args.trials,
                                            parallelism=args.parallelism)
            rows.append([N, ge, est.mean, est.stderr, est.n_trials,
                         est.n_censored])
    path = os.path.join(args.output_dir, "lifetime.csv")
    return [write_csv(path, ["N", "gamma_eps", "mean_lifetime", "stderr",
                             "n_trials", "n_censored"], rows)]


def run_toric4d_static(args) -> list:
    rows = []
    for N in args.N:
        for q in args.q:
            est = toric4d.static_estimate(
                N, q, convention=args.convention, trials=args.trials,
                seed=args.seed, max_sweeps=args.max_sweeps,
                parallelism=args.parallelism)
            rows.append([N, q, args.convention, est.mean, est.stderr,
                         est.n_trials])
    path = os.path.join(args.output_dir, "static.csv")
    return [write_csv(path, ["N", "q", "convention", "success_rate",
                             "stderr", "n_trials"], rows)]


def run_toy2d(args) -> list:
    rows = []
    for N in args.N:
        for gp in args.gamma_phase:
            for gd in args.gamma_dep:
                params = toy2d.ToyParams(
                    N=N, gamma_c=args.gamma_c, gamma_phase=gp, gamma_dep=gd,
                    t_max=args.t_max, seed=args.seed,
                    tie_fails=bool(args.tie_fails))
                est = toy2d.majority_lifetime(params, args.trials,
                                              args.parallelism)
                tau_parity = toy2d.parity_lifetime(N, gd)
                if math.isnan(est.mean):
                    qubit = tau_parity if math.isfinite(tau_parity) else None
                else:
                    qubit = min(est.mean, tau_parity)
                rows.append([N, gp, gd, est.mean, est.stderr, tau_parity,
                             qubit, est.n_censored])
    path = os.path.join(args.output_dir, "toy2d.csv")
    return [write_csv(path, ["N", "gamma_phase", "gamma_dep",
                             "majority_lifetime", "stderr", "parity_lifetime",
                             "qubit_lifetime", "n_censored"], rows)]


def run_concat_bounds(args) -> list:
    max_m = max(args.M)
    header = ["M", "threshold"] + [f"p_{n}" for n in range(1, max_m + 1)] \
        + ["lifetime_bound"]
    thr = concat.threshold(args.k, args.delta, args.gamma)
    rows = []
    for M in args.M:
        ps = [concat.p_n_bound(n, args.gamma_noise, args.gamma, args.delta,
                               args.k) for n in range(1, M + 1)]
        ps += [None] * (max_m - M)
        lb = concat.lifetime_bound(M, args.gamma_noise, args.gamma,
                                   args.delta, args.k)
        rows.append([M, thr] + ps + [lb])
    path = os.path.join(args.output_dir, "bounds.csv")
    return [write_csv(path, header, rows)]


def run_concat_sim(args) -> list:
    code = concat.five_qubit_code()
    M = args.M
    params = concat.ConcatParams(
        code, M=M, Gamma_correct=args.gamma, delta=args.delta,
        Gamma_noise=args.gamma_noise, t_max=args.t_max, seed=args.seed)
    chain = None
    interval = None
    if M >= 2:
        chain = ((1, 1), (1,))
        interval = args.sample_interval
    est, results = concat.mc_estimate(params, args.trials, args.parallelism,
                                      sample_chain=chain,
                                      sample_interval=interval)
    he = {n: np.array([r.has_error_avg[n] for r in results])
          for n in range(1, M + 1)}
    rate, rate_se = concat.failure_rate(results)
    if chain:
        lhs, rhs, gap, gap_se = concat.factorization_gap(results, len(chain))
    else:
        lhs = rhs = gap = gap_se = math.nan
    header = (["M", "gamma_noise"]
              + [f"has_error_depth_{n}" for n in range(1, M + 1)]
              + [f"has_error_stderr_{n}" for n in range(1, M + 1)]
              + ["failure_rate", "failure_rate_stderr", "factorization_lhs",
                 "factorization_rhs", "factorization_gap",
                 "factorization_gap_stderr"])
    row = ([M, args.gamma_noise]
           + [he[n].mean() for n in range(1, M + 1)]
           + [he[n].std(ddof=1) / math.sqrt(len(he[n])) if len(he[n]) > 1
              else 0.0 for n in range(1, M + 1)]
           + [rate, rate_se, lhs, rhs, gap, gap_se])
    path = os.path.join(args.output_dir, "concat.csv")
    return [write_csv(path, header, [row])]


def run_concat_singlejump(args) -> list:
    code = concat.five_qubit_code()
    rows = []
    for M in args.M:
        params = concat.ConcatParams(
            code, M=M, Gamma_correct=args.gamma, delta=1.0,
            Gamma_noise=args.gamma_noise, t_max=args.t_max, seed=args.seed)
        est = concat.single_jump_estimate(params, args.trials,
                                          args.parallelism)
        rows.append([M, code.k ** M, args.gamma, args.gamma_noise, est.mean,
                     est.stderr, est.n_trials, est.n_censored])
    path = os.path.join(args.output_dir, "singlejump.csv")
    return [write_csv(path, ["M", "n_qubits", "gamma", "gamma_eps",
                             "mean_lifetime", "stderr", "n_trials",
                             "n_censored"], rows)]


def _gadget_jump(args):
    if args.L == "sigma-minus":
        return gadget.sigma_minus(args.d)
    if args.L == "random":
        rng = engine.stream(args.seed, 0)
        m = rng.normal(size=(args.d, args.d)) \
            + 1j * rng.normal(size=(args.d, args.d))
        return m / gadget.operator_norm(m)
    raise SystemExit(EXIT_USAGE)


def run_gadget_verify(args) -> list:
    L = _gadget_jump(args)
    rho0 = np.eye(args.d, dtype=complex) / args.d
    rows = []
    violated = False
    for eps in args.epsilon:
        lsys = None
        if args.E > 0:
            lsys = gadget.dephasing_liouvillian(args.d, args.E * eps * eps)
        cfg = gadget.GadgetConfig(d=args.d, L=L, epsilon=eps, E=args.E,
                                  lsys=lsys, tau_max=args.tau_max, dt=args.dt)
        try:
            report = gadget.verify(cfg, rho0, norm=args.norm)
        except gadget.IntegratorError as exc:
            print(f"integrator non-convergence at epsilon={eps}: {exc}",
                  file=sys.stderr)
            raise SystemExit(EXIT_INCONCLUSIVE)
        if not report.all_pass():
            violated = True
        for i, tau in enumerate(report.taus):
            rows.append([eps, tau]
                        + list(report.residuals[i])
                        + list(report.bounds[i])
                        + [int(report.residuals[i, j] <= report.bounds[i, j]
                               + max(report.step_error, 1e-9))
                           for j in range(4)])
    header = (["epsilon", "tau"]
              + [f"residual_{j}" for j in range(1, 5)]
              + [f"bound_{j}" for j in range(1, 5)]
              + [f"pass_{j}" for j in range(1, 5)])
    path = os.path.join(args.output_dir, "gadget.csv")
    out = [write_csv(path, header, rows)]
    if violated:
        # emit output first so the violation can be inspected
        args.exit_code = EXIT_BOUND_VIOLATION
    return out


HANDLERS = {
    "toric4d-lifetime": run_toric4d_lifetime,
    "toric4d-static": run_toric4d_static,
    "toy2d": run_toy2d,
    "concat-bounds": run_concat_bounds,
    "concat-sim": run_concat_sim,
    "concat-singlejump": run_concat_singlejump,
    "gadget-verify": run_gadget_verify,
}

# dests that hold derived/plumbing state, excluded from manifests and config
_NON_PARAMS = {"subcommand", "config", "exit_code"}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dissmem",
        description="Stochastic experiments on dissipatively protected "
                    "quantum memories.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    subparsers = {}

    def add(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--config", help="key = value config file; flags "
                                        "override file values")
        p.add_argument("--output-dir", default=".")
        subparsers[name] = p
        return p

    def common_mc(p, trials=1000):
        p.add_argument("--trials", type=int, default=trials)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--parallelism", type=int,
                       default=engine.default_workers())

    p = add("toric4d-lifetime", help="4D memory lifetime vs noise rate")
    p.add_argument("--N", type=_int_list, required=True)
    p.add_argument("--gamma-eps", type=_float_list, required=True)
    p.add_argument("--t-max", type=float, default=1e5)
    p.add_argument("--check-interval", type=float, default=None)
    p.add_argument("--max-sweeps", type=int, default=None)
    p.add_argument("--convention", default=toric4d.CONVENTION_HALF,
                   choices=[toric4d.CONVENTION_HALF, toric4d.CONVENTION_FULL])
    common_mc(p)

    p = add("toric4d-static", help="4D one-shot decoder success vs error "
                                   "probability")
    p.add_argument("--N", type=_int_list, required=True)
    p.add_argument("--q", type=_float_list, required=True)
    p.add_argument("--convention", default=toric4d.CONVENTION_HALF,
                   choices=[toric4d.CONVENTION_HALF, toric4d.CONVENTION_FULL])
    p.add_argument("--max-sweeps", type=int, default=None)
    common_mc(p, trials=500)

    p = add("toy2d", help="2D majority-vote memory lifetimes")
    p.add_argument("--N", type=_int_list, required=True)
    p.add_argument("--gamma-phase", type=_float_list, required=True)
    p.add_argument("--gamma-dep", type=_float_list, required=True)
    p.add_argument("--gamma-c", type=float, default=1.0)
    p.add_argument("--t-max", type=float, default=1e6)
    p.add_argument("--tie-fails", type=int, default=1, choices=[0, 1],
                   help="1: majority fails at the tie; 0: only when "
                        "strictly lost")
    common_mc(p)

    p = add("concat-bounds", help="closed-form threshold and lifetime bounds")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--gamma-noise", type=float, required=True)
    p.add_argument("--M", type=_int_list, required=True)
    p.add_argument("--seed", type=int, default=0)  # recorded only

    p = add("concat-sim", help="concatenated-code Pauli-frame Monte Carlo")
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--gamma-noise", type=float, required=True)
    p.add_argument("--t-max", type=float, default=5000.0)
    p.add_argument("--sample-interval", type=float, default=2.0)
    common_mc(p)

    p = add("concat-singlejump", help="monolithic-recovery saturation demo")
    p.add_argument("--M", type=_int_list, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--gamma-noise", type=float, required=True)
    p.add_argument("--t-max", type=float, default=5000.0)
    common_mc(p)

    p = add("gadget-verify", help="dissipation-gadget deviation bounds")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--L", default="sigma-minus",
                   choices=["sigma-minus", "random"])
    p.add_argument("--epsilon", type=_float_list, required=True)
    p.add_argument("--E", type=float, default=0.0)
    p.add_argument("--tau-max", type=float, default=50.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--norm", default="trace", choices=["trace", "op"])
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("rerun", help="re-execute a run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--output-dir", default=None,
                   help="defaults to the manifest's directory")
    subparsers["rerun"] = p

    return parser, subparsers


def load_config(path: str, parser: argparse.ArgumentParser) -> dict:
    """Flat `key = value` file; `#` starts a comment. Keys use the flag
    names with dashes or underscores; unknown keys are rejected."""
    known = {a.dest: a for a in parser._actions
             if a.dest != "help" and a.dest not in _NON_PARAMS}
    out = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SystemExit(f"{path}:{ln}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            dest = key.replace("-", "_")
            if dest not in known or dest in _NON_PARAMS:
                raise SystemExit(f"{path}:{ln}: unknown key {key!r}")
            action = known[dest]
            conv = action.type or str
            out[dest] = conv(val)
    return out


def _dispatch(subcommand: str, args: argparse.Namespace) -> int:
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    os.makedirs(args.output_dir, exist_ok=True)
    args.exit_code = 0
    outputs = HANDLERS[subcommand](args)
    params = {k: v for k, v in vars(args).items() if k not in _NON_PARAMS}
    write_manifest(args.output_dir, subcommand, params, outputs, started)
    for path in outputs:
        print(path)
    return args.exit_code


def run_rerun(args) -> int:
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    subcommand = manifest["subcommand"]
    if subcommand not in HANDLERS:
        raise SystemExit(f"manifest subcommand {subcommand!r} unknown")
    params = dict(manifest["params"])
    if args.output_dir is not None:
        params["output_dir"] = args.output_dir
    elif os.path.dirname(args.manifest):
        params["output_dir"] = os.path.dirname(args.manifest)
    return _dispatch(subcommand, argparse.Namespace(**params))


def _peek_config(argv):
    """Extract (subcommand, config path) before full parsing, so config
    values can satisfy required flags."""
    sub = next((a for a in argv if not a.startswith("-")), None)
    cfg = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            cfg = argv[i + 1]
        elif a.startswith("--config="):
            cfg = a.split("=", 1)[1]
    return sub, cfg


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser, subparsers = build_parser()
    sub, cfg = _peek_config(argv)
    if cfg is not None and sub in subparsers and sub != "rerun":
        sp = subparsers[sub]
        defaults = load_config(cfg, sp)
        sp.set_defaults(**defaults)
        for action in sp._actions:
            if action.dest in defaults:
                action.required = False
    args = parser.parse_args(argv)
    if args.subcommand == "rerun":
        return run_rerun(args)
    return _dispatch(args.subcommand, args)


if __name__ == "__main__":
    sys.exit(main())
