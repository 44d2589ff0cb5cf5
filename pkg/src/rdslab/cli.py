"""Command line front end.

Every subcommand resolves its parameters (flags override --config file
entries, which override defaults), runs one experiment, and emits a JSON
report with the resolved parameters embedded.  Identical invocations produce
byte-identical reports; no timestamps are recorded unless --epoch pins one
explicitly.  --csv adds a delimited table of the per-trial numbers and
--figdir renders figures next to it.
"""

import argparse
import json
import math
import os
import re
import sys

import numpy as np

from . import __version__
from . import diagnostics as diag_mod
from . import measures as measures_mod
from . import systems as systems_mod
from . import noise as noise_mod
from .noise import seed_entropy
from .util import default_jobs, jsonable

SCHEMA = 1


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        # Accept option values like "-2,0:2,0" (vectors with a leading minus).
        self._negative_number_matcher = re.compile(r"^-[\d.,:eE+-]+$")

    def error(self, message):
        raise _UsageError(message)


def _vec(text, d=None, what="vector"):
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise _UsageError(f"cannot parse {what} {text!r}")
    if d is not None and len(values) != d:
        raise _UsageError(f"{what} {text!r} needs {d} coordinates")
    return values

def _pair(text, d, what="pair"):
    sides = text.split(":")
    if len(sides) != 2:
        raise _UsageError(f"{what} {text!r} must look like x1,..:y1,..")
    return _vec(sides[0], d, what), _vec(sides[1], d, what)


def _float_list(text, what="list"):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise _UsageError(f"cannot parse {what} {text!r}")


def _build_parser():
    top = _Parser(prog="rdslab", description=__doc__)
    top.add_argument("--version", action="version", version=__version__)

    run_common = _Parser(add_help=False)
    run_common.add_argument("--seed", type=int, default=None,
                            help="master seed (default: $RDS_SEED or 0)")
    run_common.add_argument("--jobs", type=int, default=0,
                            help="worker threads (0 = available parallelism)")
    run_common.add_argument("--out", help="write the JSON report here")
    run_common.add_argument("--csv", help="write per-trial numbers here")
    run_common.add_argument("--figdir", help="render figures into this directory")
    run_common.add_argument("--config", help="key=value file of defaults")
    run_common.add_argument("--epoch", type=int, default=None,
                            help="fixed timestamp to embed (omitted otherwise)")

    sys_common = _Parser(add_help=False)
    sys_common.add_argument("--system", choices=("doublewell", "circlemap"),
                            default="doublewell")
    sys_common.add_argument("--d", type=int, default=2,
                            help="state dimension (double-well only)")
    sys_common.add_argument("--dt", type=float, default=1e-3,
                            help="grid step (double-well only)")
    sys_common.add_argument("--eps-c", type=float, default=0.3,
                            help="circle map kick amplitude")
    sys_common.add_argument("--t-burn", type=float, default=100.0,
                            help="burn-in span of the stationary sampler")

    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("noise-stats", parents=[run_common],
                       help="sample a path and report increment statistics")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--T", type=float, default=10.0)

    p = sub.add_parser("cocycle-check", parents=[run_common, sys_common],
                       help="composition self-check of the flow")
    p.add_argument("--s", default="0.5", help="comma list of first legs")
    p.add_argument("--t", default="0.5", help="comma list of second legs")
    p.add_argument("--n-seeds", type=int, default=1)
    p.add_argument("--points", type=int, default=4)

    p = sub.add_parser("gronwall", parents=[run_common, sys_common],
                       help="one-sided growth bound on pair separation")
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--pair-radius", type=float, default=3.0)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--T", type=float, default=20.0)

    p = sub.add_parser("lyapunov", parents=[run_common, sys_common],
                       help="top Lyapunov exponent along one trajectory")
    p.add_argument("--T", type=float, default=2000.0)
    p.add_argument("--x0", default=None, help="start state, comma separated")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--noise", choices=("sampled", "zero"), default="sampled")

    p = sub.add_parser("sync", parents=[run_common, sys_common],
                       help="two-point synchronization frequency")
    p.add_argument("--pair", action="append", default=None,
                   help="x1,..:y1,.. (repeatable)")
    p.add_argument("--T", type=float, default=100.0)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--delta", type=float, default=1e-3)

    p = sub.add_parser("stability", parents=[run_common, sys_common],
                       help="collapse frequency of a small probe ball")
    p.add_argument("--x", default=None, help="ball center")
    p.add_argument("--r", type=float, default=0.5)
    p.add_argument("--T", type=float, default=100.0)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--delta", type=float, default=1e-3)

    p = sub.add_parser("contract", parents=[run_common, sys_common],
                       help="joint steering of two starts into a ball")
    p.add_argument("--x", default=None)
    p.add_argument("--y", default=None)
    p.add_argument("--p", default=None, help="ball center")
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--T", type=float, default=50.0)
    p.add_argument("--trials", type=int, default=500)

    p = sub.add_parser("transit", parents=[run_common, sys_common],
                       help="visit frequency of a target ball")
    p.add_argument("--x", default=None)
    p.add_argument("--center", default=None)
    p.add_argument("--radius", type=float, default=0.25)
    p.add_argument("--T", type=float, default=50.0)
    p.add_argument("--trials", type=int, default=500)

    p = sub.add_parser("steer", parents=[run_common, sys_common],
                       help="deterministic steering demonstration")
    p.add_argument("--kind", choices=("transit", "contract"), required=True)
    p.add_argument("--x", default=None)
    p.add_argument("--y", default=None)
    p.add_argument("--eta0", type=float, default=100.0)
    p.add_argument("--eta1", type=float, default=20.0)
    p.add_argument("--eta2", type=float, default=20.0)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--T", type=float, default=50.0)

    p = sub.add_parser("pullback", parents=[run_common, sys_common],
                       help="pullback cloud sampling and convergence")
    p.add_argument("--T", type=float, default=50.0)
    p.add_argument("--T-list", default=None,
                   help="comma list of horizons for a convergence table")
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--trials", type=int, default=1,
                   help="realizations (with a 2-entry --T-list)")

    p = sub.add_parser("clusters", parents=[run_common, sys_common],
                       help="cluster count of the invariant random measure")
    p.add_argument("--T", type=float, default=500.0)
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--trials", type=int, default=400)
    p.add_argument("--eps-cluster", type=float, default=0.05)

    return top


def _load_config(path):
    values = {}
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise _UsageError(
                        f"{path}:{lineno}: expected key=value, got {line!r}")
                key, _, value = line.partition("=")
                key, value = key.strip(), value.strip()
                if key in values:
                    prev = values[key]
                    values[key] = (prev if isinstance(prev, list)
                                   else [prev]) + [value]
                else:
                    values[key] = value
    except OSError as exc:
        raise _UsageError(f"cannot read config {path}: {exc}")
    return values


def _apply_config(parser, command, argv, config_values):
    """Re-parse argv with config values installed as subcommand defaults."""
    sub_actions = [a for a in parser._actions
                   if isinstance(a, argparse._SubParsersAction)]
    subparser = sub_actions[0].choices[command]
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in config_values.items():
        action = actions.get(key)
        if action is None:
            raise _UsageError(f"config key {key!r} is not a {command} option")
        if isinstance(action, argparse._AppendAction):
            defaults[key] = value if isinstance(value, list) else [value]
        elif isinstance(value, list):
            raise _UsageError(f"config key {key!r} given more than once")
        elif action.type is not None:
            try:
                defaults[key] = action.type(value)
            except ValueError:
                raise _UsageError(f"config key {key!r} has bad value {value!r}")
        else:
            defaults[key] = value
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def _build_system(args):
    if getattr(args, "system", None) == "circlemap":
        return systems_mod.circle_map(eps_c=args.eps_c)
    return systems_mod.double_well(d=args.d, dt=args.dt)


def _default_state(sys_spec, kind):
    x = np.zeros(sys_spec.dim)
    if kind == "e1":
        x[0] = 1.0
    elif kind == "left":
        x[0] = -2.0
    elif kind == "right":
        x[0] = 2.0
    elif kind == "low":
        x[-1] = -1.0
    return tuple(x)


def _state_arg(args, name, sys_spec, kind):
    raw = getattr(args, name)
    if raw is None:
        return _default_state(sys_spec, kind)
    return _vec(raw, sys_spec.dim, what=name)


def _csv_writer(path, header, rows):
    def write():
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(",".join(header) + "\n")
            for row in rows:
                f.write(",".join("" if v is None else repr(float(v)) if
                                 isinstance(v, float) else str(v)
                                 for v in row) + "\n")
    return write


def _cmd_noise_stats(args):
    path = noise_mod.sample_wiener(args.seed, args.d, 0.0, args.T, args.dt)
    stats = noise_mod.wiener_statistics(path)
    result = {"d": args.d, "dt": args.dt, "T": args.T, **stats}
    csv_write = None
    if args.csv:
        def csv_write():
            with open(args.csv, "w", encoding="utf-8", newline="") as f:
                path.write_csv(f)
    def render(figdir):
        from . import figures
        return figures.render_noise_stats(path, stats, figdir)
    return result, csv_write, render


def _cmd_cocycle_check(args):
    sys_spec = _build_system(args)
    seeds = [seed_entropy(args.seed) + (i,) for i in range(args.n_seeds)]
    report = diag_mod.cocycle_check(
        sys_spec, seeds,
        _float_list(args.s, "--s"), _float_list(args.t, "--t"),
        n_points=args.points)
    rows = [(c["s"], c["t"], c["max_deviation"]) for c in report.combos]
    csv_write = _csv_writer(args.csv, ["s", "t", "max_deviation"], rows) \
        if args.csv else None
    def render(figdir):
        from . import figures
        return figures.render_cocycle(report, figdir)
    return report.summary(), csv_write, render


def _plan(args, sys_spec, t_max, trials, delta=None):
    kwargs = {}
    if delta is not None:
        kwargs["delta_sync"] = delta
    return diag_mod.TrialPlan(system=sys_spec, seed=args.seed, trials=trials,
                              t_max=t_max, jobs=args.jobs, **kwargs)


def _cmd_gronwall(args):
    sys_spec = _build_system(args)
    pairs = diag_mod.random_state_pairs(sys_spec, args.pairs, args.seed,
                                        radius=args.pair_radius)
    plan = _plan(args, sys_spec, args.T, args.trials)
    report = diag_mod.gronwall_check(plan, pairs)
    rows = list(enumerate(report.per_pair_worst))
    csv_write = _csv_writer(args.csv, ["pair", "worst_ratio"], rows) \
        if args.csv else None
    def render(figdir):
        from . import figures
        return figures.render_gronwall(report, figdir)
    return report.summary(), csv_write, render


def _cmd_lyapunov(args):
    sys_spec = _build_system(args)
    x0 = _state_arg(args, "x0", sys_spec, "e1" if sys_spec.dim > 1 else "zero")
    plan = _plan(args, sys_spec, args.T, 1)
    report = diag_mod.lyapunov_max(plan, x0, k=args.k, noise_kind=args.noise)
    rows = list(enumerate(report.batch_means))
    csv_write = _csv_writer(args.csv, ["batch", "mean"], rows) \
        if args.csv else None
    def render(figdir):
        from . import figures
        return figures.render_lyapunov(report, figdir)
    return report.summary(), csv_write, render


def _cmd_sync(args):
    sys_spec = _build_system(args)
    if args.pair:
        pairs = [_pair(text, sys_spec.dim, "--pair") for text in args.pair]
    elif sys_spec.state_space == "circle":
        pairs = [((0.0,), (math.pi,))]
    else:
        pairs = [(_default_state(sys_spec, "left"),
                  _default_state(sys_spec, "right"))]
    plan = _plan(args, sys_spec, args.T, args.trials, delta=args.delta)
    report = diag_mod.sync_probability(plan, pairs)
    rows = [
        (p, i, fp, report.final_distances[p][i])
        for p, fps in enumerate(report.first_passage)
        for i, fp in enumerate(fps)
    ]
    csv_write = _csv_writer(
        args.csv, ["pair", "trial", "first_passage", "final_distance"], rows) \
        if args.csv else None
    def render(figdir):
        from . import figures
        return figures.render_sync(report, figdir)
    return report.summary(), csv_write, render


def _cmd_stability(args):
    sys_spec = _build_system(args)
    x = _state_arg(args, "x", sys_spec, "e1")
    plan = _plan(args, sys_spec, args.T, args.trials, delta=args.delta)
    report = diag_mod.stability_test(plan, x, args.r)
    rows = list(enumerate(report.extras["diameters"]))
    csv_write = _csv_writer(args.csv, ["trial", "diameter"], rows) \
        if args.csv else None
    def render(figdir):
        from . import figures
        return figures.render_hit(report, figdir)
    return report.summary(), csv_write, render


def _cmd_contract(args):
    sys_spec = _build_system(args)
    x = _state_arg(args, "x", sys_spec, "left")
    y = _state_arg(args, "y", sys_spec, "right")
    p = _state_arg(args, "p", sys_spec, "e1")
    plan = _plan(args, sys_spec, args.T, args.trials)
    report = diag_mod.contractibility_test(plan, x, y, p, eps_ball=args.eps)
    rows = list(enumerate(report.extras["hit_times"]))
    csv_write = _csv_writer(args.csv, ["trial", "hit_time"], rows) \
        if args.csv else None
    def render(figdir):
        from . import figures
        return figures.render_hit(report, figdir)
    return report.summary(), csv_write, render


def _cmd_transit(args):
    sys_spec = _build_system(args)
    x = _state_arg(args, "x", sys_spec, "zero")
    center = _state_arg(args, "center", sys_spec, "low")
    plan = _plan(args, sys_spec, args.T, args.trials)
    report = diag_mod.transitivity_test(plan, x, center, args.radius)
    rows = list(enumerate(report.extras["hit_times"]))
    csv_write = _csv_writer(args.csv, ["trial", "hit_time"], rows) \
        if args.csv else None
    def render(figdir):
        from . import figures
        return figures.render_hit(report, figdir)
    return report.summary(), csv_write, render


def _cmd_steer(args):
    sys_spec = _build_system(args)
    x = _state_arg(args, "x", sys_spec, "left")
    y = _state_arg(args, "y", sys_spec, "right")
    report = diag_mod.steer_demo(
        sys_spec, args.kind, x, y, eta0=args.eta0, eta1=args.eta1,
        eta2=args.eta2, eps=args.eps, t_max=args.T)
    header = ["t"] + [f"x_{i + 1}" for i in range(sys_spec.dim)]
    if len(report.traces) > 1:
        header += [f"y_{i + 1}" for i in range(sys_spec.dim)]
    rows = []
    for i, t in enumerate(report.times):
        row = [t] + [float(v) for v in report.traces[0][i]]
        if len(report.traces) > 1:
            row += [float(v) for v in report.traces[1][i]]
        rows.append(row)
    csv_write = _csv_writer(args.csv, header, rows) if args.csv else None
    def render(figdir):
        from . import figures
        return figures.render_steer(report, figdir)
    return report.summary(), csv_write, render


def _cmd_pullback(args):
    sys_spec = _build_system(args)
    sampler = measures_mod.stationary_sampler(sys_spec, t_burn=args.t_burn)
    if args.T_list is not None:
        horizons = _float_list(args.T_list, "--T-list")
        if args.trials > 1:
            if len(horizons) != 2:
                raise _UsageError(
                    "--trials > 1 needs exactly two horizons in --T-list")
            seeds = [seed_entropy(args.seed) + (i,) for i in range(args.trials)]
            dists = measures_mod.pullback_convergence_many(
                sys_spec, sampler, seeds, horizons[0], horizons[1], args.m,
                jobs=args.jobs)
            result = {"T_a": horizons[0], "T_b": horizons[1], "m": args.m,
                      "trials": args.trials,
                      "dists": [float(v) for v in dists],
                      "max_dist": float(max(dists)),
                      "median_dist": float(np.median(dists))}
            rows = list(enumerate(result["dists"]))
            csv_write = _csv_writer(args.csv, ["realization", "dist"], rows) \
                if args.csv else None
            def render(figdir):
                from . import figures
                return figures.render_pullback_many(result["dists"], figdir)
            return result, csv_write, render
        rows_td = measures_mod.pullback_convergence(
            sys_spec, sampler, args.seed, horizons, args.m)
        result = {"m": args.m,
                  "rows": [{"T": t, "dist": d} for t, d in rows_td]}
        csv_write = _csv_writer(args.csv, ["T", "dist"], rows_td) \
            if args.csv else None
        def render(figdir):
            from . import figures
            return figures.render_pullback_convergence(rows_td, figdir)
        return result, csv_write, render
    measure = measures_mod.pullback_sample(
        sys_spec, sampler, args.seed, args.T, args.m)
    atoms = measure.atoms
    diam = float(sys_spec.distance(atoms[:, None, :], atoms[None, :, :]).max())
    result = {"T": args.T, "m": args.m, "cloud_diameter": diam,
              "atoms": [[float(v) for v in row] for row in atoms]}
    csv_write = None
    if args.csv:
        def csv_write():
            with open(args.csv, "w", encoding="utf-8", newline="") as f:
                measure.write_csv(f)
    def render(figdir):
        from . import figures
        return figures.render_pullback_cloud(measure, sys_spec, figdir)
    return result, csv_write, render


def _cmd_clusters(args):
    sys_spec = _build_system(args)
    sampler = measures_mod.stationary_sampler(sys_spec, t_burn=args.t_burn)
    keep = bool(args.csv)
    report = measures_mod.cluster_count(
        sys_spec, sampler, args.trials, args.T, args.m, args.eps_cluster,
        seed=args.seed, jobs=args.jobs, keep_clouds=keep)
    csv_write = None
    if args.csv:
        clouds = report.clouds
        def csv_write():
            with open(args.csv, "w", encoding="utf-8", newline="") as f:
                d = clouds.shape[-1]
                f.write(",".join(["trial", "atom"]
                                 + [f"x_{i + 1}" for i in range(d)]) + "\n")
                for ti, cloud in enumerate(clouds):
                    for ai, row in enumerate(cloud):
                        f.write(",".join([str(ti), str(ai)]
                                         + [repr(float(v)) for v in row]) + "\n")
    def render(figdir):
        from . import figures
        return figures.render_clusters(report, figdir)
    return report.summary(), csv_write, render


_HANDLERS = {
    "noise-stats": _cmd_noise_stats,
    "cocycle-check": _cmd_cocycle_check,
    "gronwall": _cmd_gronwall,
    "lyapunov": _cmd_lyapunov,
    "sync": _cmd_sync,
    "stability": _cmd_stability,
    "contract": _cmd_contract,
    "transit": _cmd_transit,
    "steer": _cmd_steer,
    "pullback": _cmd_pullback,
    "clusters": _cmd_clusters,
}

# argparse plumbing fields that are not experiment parameters.
_NON_PARAMS = ("command",)


def main(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            args = _apply_config(parser, args.command, argv,
                                 _load_config(args.config))
        if args.seed is None:
            env = os.environ.get("RDS_SEED")
            try:
                args.seed = int(env) if env else 0
            except ValueError:
                raise _UsageError(f"RDS_SEED {env!r} is not an integer")
        if args.jobs <= 0:
            args.jobs = default_jobs()
        result, csv_write, render = _HANDLERS[args.command](args)
        params = {k: v for k, v in sorted(vars(args).items())
                  if k not in _NON_PARAMS}
        report = {
            "schema": SCHEMA,
            "tool": "rdslab",
            "version": __version__,
            "command": args.command,
            "seed": args.seed,
            "params": jsonable(params),
            "result": jsonable(result),
        }
        if args.epoch is not None:
            report["epoch"] = args.epoch
        text = json.dumps(report, sort_keys=True, indent=2) + "\n"
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as f:
                f.write(text)
        else:
            sys.stdout.write(text)
        if csv_write is not None:
            csv_write()
        if args.figdir and render is not None:
            render(args.figdir)
        return 0
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError, OSError) as exc:
        message = str(exc).replace("\n", " ")
        print(f"error: {message}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
