"""Trajectory diagnostics: synchronization, stability, reachability,
Lyapunov exponents, one-sided growth bounds, steering demonstrations and the
composition self-check.

Monte Carlo diagnostics share one shape: independent driving realizations
per trial, events evaluated on a fixed time grid, frequencies reported with
Wilson intervals.  Reachability-style events are one-sided certificates: a
positive lower confidence bound certifies the event has positive
probability, while zero observed hits refutes nothing at a finite horizon.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import noise as noise_mod
from . import systems as systems_mod
from .noise import grid_index, seed_entropy
from .stats import batch_mean_ci, wilson_interval
from .util import run_trial_chunks

# Stream tags so distinct diagnostics draw from distinct lineages.
_SYNC_STREAM = 10
_STABILITY_STREAM = 11
_CONTRACT_STREAM = 12
_TRANSIT_STREAM = 13
_GRONWALL_STREAM = 14
_LYAPUNOV_STREAM = 15
_PAIR_STREAM = 16

_CENSOR_NOTE = ("one-sided certificate: a positive lower confidence bound "
                "certifies positive probability; zero hits refutes nothing "
                "at this horizon")


@dataclass(frozen=True)
class TrialPlan:
    """Shared layout of a Monte Carlo diagnostic run.

    t_grid defaults to stride 0.25 for continuous systems and stride 1 for
    discrete ones, always ending at t_max.  Each trial drives the system
    with an independent realization derived from the plan seed.
    """

    system: systems_mod.SystemSpec
    seed: object = 0
    trials: int = 200
    t_max: float = 100.0
    t_grid: tuple = None
    delta_sync: float = 1e-3
    eps_ball: float = 0.25
    jobs: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.delta_sync <= 0 or self.eps_ball <= 0:
            raise ValueError("tolerances must be positive")
        sys = self.system
        n_max = grid_index(self.t_max, sys.dt, what="t_max")
        if n_max < 1:
            raise ValueError("t_max must be at least one grid cell")
        if self.t_grid is None:
            stride = 0.25 if sys.time_kind == "continuous" else 1.0
            step = max(1, grid_index(stride, sys.dt, what="grid stride"))
            cells = list(range(0, n_max + 1, step))
        else:
            cells = [grid_index(t, sys.dt, what="grid time") for t in self.t_grid]
            if any(b <= a for a, b in zip(cells, cells[1:])):
                raise ValueError("t_grid must be strictly increasing")
            if cells and (cells[0] < 0 or cells[-1] > n_max):
                raise ValueError("t_grid must lie inside [0, t_max]")
        if not cells or cells[-1] != n_max:
            cells.append(n_max)
        object.__setattr__(self, "t_grid",
                           tuple(c * sys.dt for c in cells))
        object.__setattr__(self, "_cells", tuple(cells))

    @property
    def grid_cells(self):
        return self._cells

    def trial_seed(self, stream, index):
        return seed_entropy(self.seed) + (stream, index)


def _trial_snapshots(plan, x0, stream, cells):
    """Per-trial snapshots of a shared initial block, (trials, n_rec, B, dim)."""
    sys = plan.system
    x0 = np.asarray(x0, dtype=float)
    n = cells[-1]

    def run(i0, i1):
        seeds = [plan.trial_seed(stream, i) for i in range(i0, i1)]

        def incs_for(k0, k1):
            return np.stack([
                systems_mod.driving_cells(sys, s, k0, k1) for s in seeds
            ])

        states0 = np.broadcast_to(x0, (len(seeds),) + x0.shape)
        snaps = systems_mod.ensemble_flow(sys, states0, n, incs_for, cells)
        return np.moveaxis(snaps, 0, 1)

    return run_trial_chunks(run, plan.trials, plan.jobs)


@dataclass(frozen=True)
class SyncReport:
    """Synchronization frequencies for pairs flown under shared noise."""

    pairs: tuple
    trials: int
    t_max: float
    delta: float
    freqs: tuple
    cis: tuple
    first_passage: tuple      # per pair: per trial time or None (censored)
    censored_frac: tuple
    final_distances: tuple

    def summary(self):
        return {
            "pairs": [[list(x), list(y)] for x, y in self.pairs],
            "trials": self.trials,
            "t_max": self.t_max,
            "delta": self.delta,
            "freqs": list(self.freqs),
            "cis": [list(c) for c in self.cis],
            "first_passage": [list(fp) for fp in self.first_passage],
            "censored_frac": list(self.censored_frac),
        }


def sync_probability(plan, pairs):
    """Frequency with which initial pairs synchronize under shared noise.

    Both members of a pair see the same realization within a trial; the
    reported frequency is of final distance below delta_sync at t_max, and
    first-passage times below delta_sync are recorded per trial with
    censored runs marked.
    """
    sys = plan.system
    pairs = [(np.asarray(x, float), np.asarray(y, float)) for x, y in pairs]
    if not pairs:
        raise ValueError("need at least one pair")
    x0 = np.concatenate([np.stack(p) for p in pairs], axis=0)
    snaps = _trial_snapshots(plan, x0, _SYNC_STREAM, plan.grid_cells)
    dist = sys.distance(snaps[:, :, 0::2, :], snaps[:, :, 1::2, :])
    grid_times = np.asarray(plan.t_grid)
    below = dist < plan.delta_sync
    final = dist[:, -1, :]
    freqs, cis, fps, cens = [], [], [], []
    for p in range(len(pairs)):
        hits = int(np.sum(final[:, p] < plan.delta_sync))
        freqs.append(hits / plan.trials)
        cis.append(wilson_interval(hits, plan.trials))
        hit_any = below[:, :, p].any(axis=1)
        first = below[:, :, p].argmax(axis=1)
        fp = [
            float(grid_times[first[i]]) if hit_any[i] else None
            for i in range(plan.trials)
        ]
        fps.append(tuple(fp))
        cens.append(1.0 - float(hit_any.mean()))
    return SyncReport(
        pairs=tuple((tuple(x), tuple(y)) for x, y in pairs),
        trials=plan.trials,
        t_max=plan.t_max,
        delta=plan.delta_sync,
        freqs=tuple(freqs),
        cis=tuple(cis),
        first_passage=tuple(fps),
        censored_frac=tuple(cens),
        final_distances=tuple(tuple(float(v) for v in final[:, p])
                              for p in range(len(pairs))),
    )


@dataclass(frozen=True)
class HitReport:
    """Frequency certificate for an event observed over independent trials."""

    op: str
    event: str
    trials: int
    hits: int
    freq: float
    ci: tuple
    params: dict
    note: str = ""
    extras: dict = field(default_factory=dict)

    def summary(self):
        out = {
            "op": self.op,
            "event": self.event,
            "trials": self.trials,
            "hits": self.hits,
            "freq": self.freq,
            "ci": list(self.ci),
            "params": dict(self.params),
        }
        if self.note:
            out["note"] = self.note
        if self.extras:
            out["extras"] = dict(self.extras)
        return out


def stability_test(plan, x, r):
    """How often a small ball around x stays collapsed at t_max.

    Probes the ball with its center and the 2d axis points at radius r, all
    flown under shared noise; the diameter proxy is the largest pairwise
    distance of the probe block at t_max.
    """
    sys = plan.system
    x = np.asarray(x, dtype=float)
    if r < 0:
        raise ValueError("r must be nonnegative")
    probes = [x]
    for i in range(sys.dim):
        e = np.zeros(sys.dim)
        e[i] = r
        probes.extend([x + e, x - e])
    block = np.stack(probes)
    n_max = plan.grid_cells[-1]
    snaps = _trial_snapshots(plan, block, _STABILITY_STREAM, (n_max,))
    finals = snaps[:, 0]
    iu, ju = np.triu_indices(len(probes), k=1)
    diam = sys.distance(finals[:, iu, :], finals[:, ju, :]).max(axis=1)
    hits = int(np.sum(diam < plan.delta_sync))
    return HitReport(
        op="stability",
        event=f"probe diameter < {plan.delta_sync} at t_max",
        trials=plan.trials,
        hits=hits,
        freq=hits / plan.trials,
        ci=wilson_interval(hits, plan.trials),
        params={"x": [float(v) for v in x], "r": float(r),
                "t_max": plan.t_max, "delta": plan.delta_sync},
        extras={"diameters": [float(v) for v in diam]},
    )


def _first_hit_times(hit_mask, grid_times):
    hit_any = hit_mask.any(axis=1)
    first = hit_mask.argmax(axis=1)
    return [
        float(grid_times[first[i]]) if hit_any[i] else None
        for i in range(hit_mask.shape[0])
    ]


def contractibility_test(plan, x, y, p, eps_ball=None):
    """How often x and y are simultaneously steered into a ball around p.

    The event is existential over the plan grid: some tested time at which
    both trajectories (flown under shared noise) sit within eps_ball of p.
    """
    sys = plan.system
    eps = plan.eps_ball if eps_ball is None else eps_ball
    if eps <= 0:
        raise ValueError("eps_ball must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    snaps = _trial_snapshots(plan, np.stack([x, y]), _CONTRACT_STREAM,
                             plan.grid_cells)
    dist = sys.distance(snaps, p)
    both = (dist < eps).all(axis=2)
    hit_times = _first_hit_times(both, np.asarray(plan.t_grid))
    hits = int(both.any(axis=1).sum())
    return HitReport(
        op="contract",
        event=f"both trajectories within {eps} of p at some tested time",
        trials=plan.trials,
        hits=hits,
        freq=hits / plan.trials,
        ci=wilson_interval(hits, plan.trials),
        params={"x": [float(v) for v in x], "y": [float(v) for v in y],
                "p": [float(v) for v in p], "eps_ball": float(eps),
                "t_max": plan.t_max},
        note=_CENSOR_NOTE,
        extras={"hit_times": hit_times},
    )


def transitivity_test(plan, x, center, radius):
    """How often the trajectory from x visits a target ball on the grid."""
    sys = plan.system
    if radius <= 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=float)
    center = np.asarray(center, dtype=float)
    snaps = _trial_snapshots(plan, x[None, :], _TRANSIT_STREAM, plan.grid_cells)
    dist = sys.distance(snaps[:, :, 0, :], center)
    inside = dist < radius
    hit_times = _first_hit_times(inside, np.asarray(plan.t_grid))
    hits = int(inside.any(axis=1).sum())
    return HitReport(
        op="transit",
        event=f"trajectory enters ball of radius {radius} at some tested time",
        trials=plan.trials,
        hits=hits,
        freq=hits / plan.trials,
        ci=wilson_interval(hits, plan.trials),
        params={"x": [float(v) for v in x],
                "center": [float(v) for v in center],
                "radius": float(radius), "t_max": plan.t_max},
        note=_CENSOR_NOTE,
        extras={"hit_times": hit_times},
    )


@dataclass(frozen=True)
class LyapunovReport:
    lambda_hat: float
    ci: tuple
    exponents: tuple
    batch_means: tuple
    t_used: float
    renorm_interval: float
    noise_kind: str
    k: int

    def summary(self):
        return {
            "lambda_hat": self.lambda_hat,
            "ci": list(self.ci),
            "exponents": list(self.exponents),
            "batch_means": list(self.batch_means),
            "t_used": self.t_used,
            "renorm_interval": self.renorm_interval,
            "noise": self.noise_kind,
            "k": self.k,
        }


def lyapunov_max(plan, x0, k=1, noise_kind="sampled"):
    """Top-k Lyapunov exponents along one long trajectory.

    The tangent frame is renormalized (QR for k > 1, plain norm for k = 1)
    every 1.0 time units; lambda_hat averages the growth logs over the run
    and the interval is a Student-t CI over 20 batch means.  noise_kind
    "zero" drives the system with an all-zero input as a deterministic
    control.
    """
    sys = plan.system
    if sys.jacobian_stepper is None:
        raise ValueError(f"system {sys.name} has no tangent stepper")
    if not 1 <= k <= sys.dim:
        raise ValueError(f"k must lie in [1, {sys.dim}]")
    x = np.asarray(x0, dtype=float)
    if x.shape != (sys.dim,):
        raise ValueError(f"x0 must have shape ({sys.dim},)")
    renorm = 1.0
    r_cells = grid_index(renorm, sys.dt, what="renormalization interval")
    n_max = plan.grid_cells[-1]
    windows = n_max // r_cells
    n_batches = 20
    if windows < n_batches:
        raise ValueError(
            f"t_max {plan.t_max} gives {windows} renormalization windows; "
            f"need at least {n_batches} for batch means")
    windows = (windows // n_batches) * n_batches
    t_used = windows * renorm
    if noise_kind == "zero":
        path = systems_mod.zero_driving(sys, 0.0, t_used)
    elif noise_kind == "sampled":
        path = systems_mod.sample_driving(
            sys, plan.trial_seed(_LYAPUNOV_STREAM, 0), 0.0, t_used)
    else:
        raise ValueError(f"unknown noise kind {noise_kind!r}")
    v = np.eye(sys.dim)[:, :k]
    logs = np.empty((windows, k))
    for w in range(windows):
        block = path.cell_slice(w * r_cells, (w + 1) * r_cells)
        for j in range(r_cells):
            x, v = sys.jacobian_stepper(x, v, block[j], sys.dt)
        if k == 1:
            g = float(np.linalg.norm(v))
            logs[w, 0] = math.log(g)
            v = v / g
        else:
            q, r = np.linalg.qr(v)
            diag = np.abs(np.diag(r))
            logs[w] = np.log(diag)
            v = q
    exponents = logs.sum(axis=0) / t_used
    per_batch = logs[:, 0].reshape(n_batches, -1).sum(axis=1) \
        / (t_used / n_batches)
    mean, ci = batch_mean_ci(per_batch)
    return LyapunovReport(
        lambda_hat=float(exponents[0]),
        ci=ci,
        exponents=tuple(float(e) for e in exponents),
        batch_means=tuple(float(b) for b in per_batch),
        t_used=float(t_used),
        renorm_interval=renorm,
        noise_kind=noise_kind,
        k=k,
    )


@dataclass(frozen=True)
class GronwallReport:
    worst_ratio: float
    lipschitz: float
    trials: int
    n_pairs: int
    skipped_pairs: int
    per_pair_worst: tuple

    def summary(self):
        return {
            "worst_ratio": self.worst_ratio,
            "lipschitz": self.lipschitz,
            "trials": self.trials,
            "n_pairs": self.n_pairs,
            "skipped_pairs": self.skipped_pairs,
            "per_pair_worst": list(self.per_pair_worst),
        }


def gronwall_check(plan, pairs):
    """Worst observed ratio of pair separation to its one-sided growth bound.

    For a drift with one-sided Lipschitz constant L, the separation of two
    trajectories under shared noise satisfies |x_t - y_t| <=
    |x_0 - y_0| e^{L t}; the report's worst_ratio is the largest observed
    left side divided by right side over pairs, trials and grid times.
    Coincident pairs carry no information and are skipped.
    """
    sys = plan.system
    lipschitz = sys.param("one_sided_lipschitz")
    if lipschitz is None:
        raise ValueError(
            f"system {sys.name} declares no one-sided Lipschitz constant")
    pairs = [(np.asarray(x, float), np.asarray(y, float)) for x, y in pairs]
    dist0 = np.array([sys.distance(x, y) for x, y in pairs])
    keep = [i for i, v in enumerate(dist0) if v > 0.0]
    if not keep:
        raise ValueError("all pairs coincide; nothing to bound")
    kept_pairs = [pairs[i] for i in keep]
    x0 = np.concatenate([np.stack(p) for p in kept_pairs], axis=0)
    snaps = _trial_snapshots(plan, x0, _GRONWALL_STREAM, plan.grid_cells)
    dist = sys.distance(snaps[:, :, 0::2, :], snaps[:, :, 1::2, :])
    grid_times = np.asarray(plan.t_grid)
    bound = dist0[keep][None, None, :] * np.exp(
        lipschitz * grid_times)[None, :, None]
    ratios = dist / bound
    per_pair = ratios.max(axis=(0, 1))
    return GronwallReport(
        worst_ratio=float(ratios.max()),
        lipschitz=float(lipschitz),
        trials=plan.trials,
        n_pairs=len(pairs),
        skipped_pairs=len(pairs) - len(keep),
        per_pair_worst=tuple(float(v) for v in per_pair),
    )


def random_state_pairs(sys, n_pairs, seed, radius=3.0):
    """Seeded random pairs of states, uniform in the radius ball (or circle)."""
    gen = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(seed_entropy(seed) + (_PAIR_STREAM,))))
    if sys.state_space == "circle":
        angles = gen.uniform(0.0, systems_mod.TWO_PI, size=(n_pairs, 2, 1))
        return [(angles[i, 0], angles[i, 1]) for i in range(n_pairs)]
    raw = gen.standard_normal((n_pairs, 2, sys.dim))
    raw /= np.linalg.norm(raw, axis=-1, keepdims=True)
    radii = radius * gen.random((n_pairs, 2, 1)) ** (1.0 / sys.dim)
    pts = raw * radii
    return [(pts[i, 0], pts[i, 1]) for i in range(n_pairs)]


@dataclass(frozen=True)
class SteerReport:
    kind: str
    params: dict
    times: tuple
    dist_to_target: tuple     # per trajectory: distances at times
    final_states: tuple
    verdict: dict
    traces: tuple             # per trajectory: (n_times, dim) state arrays

    def summary(self):
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "times": list(self.times),
            "dist_to_target": [list(d) for d in self.dist_to_target],
            "final_states": [list(s) for s in self.final_states],
            "verdict": dict(self.verdict),
        }


def steer_demo(sys, kind, x, y=None, eta0=100.0, eta1=20.0, eta2=20.0,
               eps=0.1, t_max=50.0, target=None):
    """Drive the double-well system with an explicit steering input.

    kind "transit" follows the ramp that carries x onto y in time 1/eta0 and
    reports the terminal miss.  kind "contract" applies the kick-and-hold
    input to the trajectories from x and y and reports from when both stay
    inside the eps ball around the target (default (1, 0, ...)).
    """
    if sys.name != "doublewell":
        raise ValueError("steering demos are defined for the double-well system")
    x = np.asarray(x, dtype=float)
    if kind == "transit":
        if y is None:
            raise ValueError("transit steering needs a target state y")
        y = np.asarray(y, dtype=float)
        path = noise_mod.steering_path("transit", dt=sys.dt, x=x, y=y, eta0=eta0)
        cells = list(range(0, path.k_hi + 1))
        times = [c * sys.dt for c in cells]
        traj = systems_mod.flow_trajectory(sys, path, x, times)
        err = float(sys.distance(traj[-1], y))
        report_traces = (traj,)
        dists = (tuple(float(v) for v in sys.distance(traj, y)),)
        verdict = {"final_error": err, "t_arrive": times[-1]}
        params = {"x": [float(v) for v in x], "y": [float(v) for v in y],
                  "eta0": float(eta0)}
        finals = (tuple(float(v) for v in traj[-1]),)
    elif kind == "contract":
        if y is None:
            raise ValueError("contract steering compares two starts x and y")
        y = np.asarray(y, dtype=float)
        tgt = np.zeros(sys.dim) if target is None else np.asarray(target, float)
        if target is None:
            tgt[0] = 1.0
        path = noise_mod.steering_path("contract", dt=sys.dt, t_hi=t_max,
                                       eta1=eta1, eta2=eta2, d=sys.dim)
        stride = max(1, grid_index(0.25, sys.dt))
        cells = list(range(0, path.k_hi + 1, stride))
        if cells[-1] != path.k_hi:
            cells.append(path.k_hi)
        times = [c * sys.dt for c in cells]
        traj_x = systems_mod.flow_trajectory(sys, path, x, times)
        traj_y = systems_mod.flow_trajectory(sys, path, y, times)
        dist_x = sys.distance(traj_x, tgt)
        dist_y = sys.distance(traj_y, tgt)
        worst = np.maximum(dist_x, dist_y)
        # First grid time from which both trajectories stay inside the ball.
        suffix = np.maximum.accumulate(worst[::-1])[::-1]
        inside = suffix < eps
        t_star = float(times[int(inside.argmax())]) if inside.any() else None
        report_traces = (traj_x, traj_y)
        dists = (tuple(float(v) for v in dist_x),
                 tuple(float(v) for v in dist_y))
        verdict = {"contained_from": t_star, "eps": float(eps),
                   "worst_after_containment":
                       float(suffix[int(inside.argmax())]) if inside.any() else None}
        params = {"x": [float(v) for v in x], "y": [float(v) for v in y],
                  "eta1": float(eta1), "eta2": float(eta2),
                  "target": [float(v) for v in tgt], "t_max": float(t_max)}
        finals = (tuple(float(v) for v in traj_x[-1]),
                  tuple(float(v) for v in traj_y[-1]))
    else:
        raise ValueError(f"unknown steering kind {kind!r}")
    return SteerReport(
        kind=kind,
        params=params,
        times=tuple(float(t) for t in times),
        dist_to_target=dists,
        final_states=finals,
        verdict=verdict,
        traces=tuple(np.asarray(t) for t in report_traces),
    )


@dataclass(frozen=True)
class CocycleReport:
    max_deviation: float
    combos: tuple
    n_seeds: int
    n_points: int

    def summary(self):
        return {
            "max_deviation": self.max_deviation,
            "combos": [dict(c) for c in self.combos],
            "n_seeds": self.n_seeds,
            "n_points": self.n_points,
        }


def cocycle_check(sys, seeds, s_list, t_list, n_points=4, point_radius=2.0):
    """Verify that flowing s then t along the shifted path equals flowing s+t.

    Runs the direct flow once per seed and compares, componentwise, against
    the two-leg composition for every (s, t) combination.  The two legs
    consume the same increment cells in the same order, so the expected
    deviation is exactly zero.
    """
    s_cells = [grid_index(s, sys.dt, what="s") for s in s_list]
    t_cells = [grid_index(t, sys.dt, what="t") for t in t_list]
    if any(c <= 0 for c in s_cells + t_cells):
        raise ValueError("s and t must be positive grid times")
    horizon = max(s_cells) + max(t_cells)
    needed = sorted({sc + tc for sc in s_cells for tc in t_cells}
                    | set(s_cells))
    worst = {}
    for seed in seeds:
        ent = seed_entropy(seed)
        path = systems_mod.sample_driving(sys, ent + (0,), 0.0, horizon * sys.dt)
        gen = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(ent + (1,))))
        if sys.state_space == "circle":
            points = gen.uniform(0.0, systems_mod.TWO_PI, size=(n_points, 1))
        else:
            points = point_radius * (2.0 * gen.random((n_points, sys.dim)) - 1.0)
        direct = systems_mod.flow_trajectory(
            sys, path, points, [c * sys.dt for c in needed])
        at = dict(zip(needed, direct))
        for sc in s_cells:
            shifted = path.shift(sc * sys.dt)
            for tc in t_cells:
                composed = systems_mod.flow(sys, shifted, at[sc], tc * sys.dt)
                dev = float(np.max(np.abs(composed - at[sc + tc])))
                key = (sc, tc)
                worst[key] = max(worst.get(key, 0.0), dev)
    combos = tuple(
        {"s": sc * sys.dt, "t": tc * sys.dt, "max_deviation": worst[(sc, tc)]}
        for sc in s_cells for tc in t_cells
    )
    return CocycleReport(
        max_deviation=max(worst.values()),
        combos=combos,
        n_seeds=len(seeds),
        n_points=n_points,
    )
