"""Sampling and comparing the random invariant measures of a system.

The central object is the pullback cloud: m independent draws from a
stationary law, pushed forward from time -T to time 0 along one frozen
realization of the driving noise.  As T grows these clouds settle onto the
atoms of the invariant random measure attached to that realization, which is
what the cluster-count and diagonal-mass estimators quantify.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import noise as noise_mod
from . import systems as systems_mod
from .noise import grid_index, seed_entropy
from .stats import batch_mean_ci, wilson_interval
from .util import run_trial_chunks

# Stream tags appended to a realization seed, so the driving path and the
# initial draws of one experiment never share a lineage.
_PATH_STREAM = 0
_ATOM_STREAM = 1


@dataclass(frozen=True)
class StationarySampler:
    """Draws from a stationary law of a system.

    mode "exact" samples the uniform law on the circle, which the random
    rotation structure of the circle map preserves exactly.  mode "burn_in"
    starts every draw at a fixed point and runs the dynamics for t_burn time
    units under an independent realization, long enough for the double-well
    dynamics to forget the start.  Draws always use independent seed
    lineages, never offsets into a shared stream.
    """

    mode: str
    t_burn: float = 100.0
    start: tuple = ()

    def __post_init__(self):
        if self.mode not in ("exact", "burn_in"):
            raise ValueError(f"unknown sampler mode {self.mode!r}")
        if self.mode == "burn_in" and self.t_burn <= 0:
            raise ValueError("t_burn must be positive")

    def _check(self, sys):
        if self.mode == "exact" and sys.state_space != "circle":
            raise ValueError(
                f"exact sampling is unavailable for system {sys.name!r}")
        if self.mode == "burn_in" and sys.time_kind != "continuous":
            raise ValueError(
                f"burn-in sampling is unavailable for system {sys.name!r}")

    def draw(self, sys, m, seed, jobs=1):
        """m independent stationary draws, shape (m, dim)."""
        return self.draw_ensemble(sys, [seed], m, jobs=jobs)[0]

    def draw_ensemble(self, sys, seeds, m, jobs=1):
        """Stationary draws for several experiments, shape (len(seeds), m, dim)."""
        self._check(sys)
        if m < 1:
            raise ValueError("m must be at least 1")
        trials = len(seeds)
        entropies = [seed_entropy(s) for s in seeds]
        if self.mode == "exact":
            out = np.empty((trials, m, sys.dim))
            law = sys.noise_law
            for i, ent in enumerate(entropies):
                for j in range(m):
                    gen = np.random.Generator(
                        np.random.Philox(np.random.SeedSequence(ent + (j,))))
                    out[i, j] = law.draw_block(gen, 1)[0]
            return out
        n = grid_index(self.t_burn, sys.dt, what="burn-in time")
        start = np.asarray(self.start if self.start else np.zeros(sys.dim),
                           dtype=float)
        if start.shape != (sys.dim,):
            raise ValueError(f"start must have shape ({sys.dim},)")
        rows = trials * m
        chunk = max(128, min(noise_mod._BLOCK, 4_000_000 // max(rows, 1)))

        def burn_rows(r0, r1):
            gens = [
                np.random.Generator(np.random.Philox(np.random.SeedSequence(
                    entropies[r // m] + (r % m,))))
                for r in range(r0, r1)
            ]
            sqrt_dt = math.sqrt(sys.dt)

            def incs_for(k0, k1):
                blk = np.empty((len(gens), k1 - k0, sys.noise_dim))
                for r, gen in enumerate(gens):
                    blk[r] = gen.standard_normal((k1 - k0, sys.noise_dim))
                blk *= sqrt_dt
                return blk

            x0 = np.broadcast_to(start, (len(gens), 1, sys.dim))
            final = systems_mod.ensemble_flow(sys, x0, n, incs_for, [n], chunk)
            return final[0][:, 0, :]

        flat = run_trial_chunks(burn_rows, rows, jobs)
        return flat.reshape(trials, m, sys.dim)


def stationary_sampler(sys, t_burn=100.0, start=()):
    """The default stationary sampler for a system."""
    if sys.state_space == "circle":
        return StationarySampler("exact")
    return StationarySampler("burn_in", t_burn=t_burn, start=tuple(start))


@dataclass(frozen=True)
class EmpiricalRandomMeasure:
    """Uniformly weighted atoms sampled from one realization's random measure."""

    atoms: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim != 2 or atoms.shape[0] < 1:
            raise ValueError("atoms must have shape (m, dim) with m >= 1")
        if atoms.flags.writeable:
            atoms = atoms.copy()
            atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    @property
    def m(self):
        return self.atoms.shape[0]

    @property
    def weights(self):
        return np.full(self.m, 1.0 / self.m)

    def write_csv(self, f, trial=None):
        d = self.atoms.shape[1]
        cols = ["atom"] + [f"x_{i + 1}" for i in range(d)]
        if trial is None:
            f.write(",".join(cols) + "\n")
            for j, row in enumerate(self.atoms):
                f.write(",".join([str(j)]
                                 + [repr(float(v)) for v in row]) + "\n")
        else:
            f.write(",".join(["trial"] + cols) + "\n")
            for j, row in enumerate(self.atoms):
                f.write(",".join([str(trial), str(j)]
                                 + [repr(float(v)) for v in row]) + "\n")


def pullback_sample(sys, sampler, omega_seed, T, m, atom_seed=None):
    """Push m stationary draws from time -T to time 0 along one realization.

    The realization is pinned to omega_seed: larger T extends the same
    driving window further into the past instead of resampling it, and the
    initial draws are pinned independently of T as well.
    """
    n = grid_index(T, sys.dt, what="horizon")
    if n < 0:
        raise ValueError("horizon T must be nonnegative")
    if m < 1:
        raise ValueError("m must be at least 1")
    ent = seed_entropy(omega_seed)
    path = systems_mod.sample_driving(sys, ent + (_PATH_STREAM,), -n * sys.dt, 0)
    if atom_seed is None:
        atom_seed = ent + (_ATOM_STREAM,)
    atoms0 = sampler.draw(sys, m, atom_seed)
    atoms = systems_mod.flow(sys, path.shift(-n * sys.dt), atoms0, n * sys.dt)
    info = {"omega_seed": list(ent), "T": n * sys.dt, "m": m, "system": sys.name}
    return EmpiricalRandomMeasure(atoms, info)


def pullback_ensemble(sys, sampler, omega_seeds, T, m, jobs=1, atoms0=None):
    """Pullback clouds for many independent realizations, shape (trials, m, dim).

    Row i agrees bit for bit with pullback_sample(sys, sampler,
    omega_seeds[i], T, m).atoms; the batch form only changes how the same
    cells are scheduled.  atoms0 may carry precomputed stationary draws for
    exactly these seeds (they are deterministic in the seeds, so sharing them
    across horizons changes nothing).
    """
    n = grid_index(T, sys.dt, what="horizon")
    if n < 0:
        raise ValueError("horizon T must be nonnegative")
    ents = [seed_entropy(s) for s in omega_seeds]
    if atoms0 is None:
        atoms0 = sampler.draw_ensemble(
            sys, [ent + (_ATOM_STREAM,) for ent in ents], m, jobs=jobs)
    if n == 0:
        return atoms0
    path_seeds = [ent + (_PATH_STREAM,) for ent in ents]

    def push_rows(i0, i1):
        seeds = path_seeds[i0:i1]

        def incs_for(k0, k1):
            return np.stack([
                systems_mod.driving_cells(sys, s, k0 - n, k1 - n) for s in seeds
            ])

        return systems_mod.ensemble_flow(
            sys, atoms0[i0:i1], n, incs_for, [n])[0]

    return run_trial_chunks(push_rows, len(ents), jobs)


def energy_distance(sys, a, b):
    """Energy distance (V-statistic) between two atom clouds.

    Uses the system metric; identical clouds give exactly zero because the
    cross term coincides with the within terms float for float.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] < 1 or b.shape[0] < 1:
        raise ValueError("clouds must be non-empty (m, dim) arrays")

    def mean_cross(u, v):
        return float(sys.distance(u[:, None, :], v[None, :, :]).mean())

    return 2.0 * mean_cross(a, b) - mean_cross(a, a) - mean_cross(b, b)


def single_linkage_count(sys, atoms, eps):
    """Number of connected components of the strict eps-neighborhood graph."""
    atoms = np.asarray(atoms, dtype=float)
    dist = sys.distance(atoms[:, None, :], atoms[None, :, :])
    count, _ = connected_components(csr_matrix(dist < eps), directed=False)
    return int(count)


def pullback_convergence(sys, sampler, omega_seed, T_list, m):
    """Energy distances between clouds at consecutive horizons of T_list.

    All horizons share one realization and one set of initial draws, so the
    rows measure pure pullback convergence.  Returns [(T_k, dist_k)] with one
    row for each horizon after the first.
    """
    cells = [grid_index(T, sys.dt, what="horizon") for T in T_list]
    if len(cells) < 2:
        raise ValueError("need at least two horizons")
    if any(c < 0 for c in cells):
        raise ValueError("horizons must be nonnegative")
    if any(b < a for a, b in zip(cells, cells[1:])):
        raise ValueError("horizons must be non-decreasing")
    ent = seed_entropy(omega_seed)
    n_max = cells[-1]
    path = systems_mod.sample_driving(
        sys, ent + (_PATH_STREAM,), -n_max * sys.dt, 0)
    atoms0 = sampler.draw(sys, m, ent + (_ATOM_STREAM,))
    clouds = [
        systems_mod.flow(sys, path.shift(-c * sys.dt), atoms0, c * sys.dt)
        for c in cells
    ]
    return [
        (cells[k] * sys.dt, energy_distance(sys, clouds[k - 1], clouds[k]))
        for k in range(1, len(cells))
    ]


def pullback_convergence_many(sys, sampler, seeds, T_a, T_b, m, jobs=1):
    """Per-realization energy distance between horizons T_a and T_b."""
    atoms0 = sampler.draw_ensemble(
        sys, [seed_entropy(s) + (_ATOM_STREAM,) for s in seeds], m, jobs=jobs)
    clouds_a = pullback_ensemble(sys, sampler, seeds, T_a, m, jobs=jobs,
                                 atoms0=atoms0)
    clouds_b = pullback_ensemble(sys, sampler, seeds, T_b, m, jobs=jobs,
                                 atoms0=atoms0)
    return [
        energy_distance(sys, a, b) for a, b in zip(clouds_a, clouds_b)
    ]


@dataclass(frozen=True)
class DiagonalMassReport:
    diag_mass: float
    ci: tuple
    trials: int
    eps: float
    T: float
    m: int
    final_distances: tuple

    def summary(self):
        return {
            "diag_mass": self.diag_mass,
            "ci": list(self.ci),
            "trials": self.trials,
            "eps": self.eps,
            "T": self.T,
            "m": self.m,
            "final_distances": list(self.final_distances),
        }


def diagonal_mass(sys, sampler, trials, T, eps_cluster, m=2, seed=0, jobs=1):
    """Mass the averaged two-point motion leaves on the diagonal.

    Per realization, m independent stationary draws are pulled back over
    horizon T and the fraction of pairs ending within eps_cluster of each
    other is recorded; diag_mass is the average over realizations.  For the
    default m=2 the per-trial statistic is Bernoulli and the interval is a
    95% Wilson interval; for m > 2 a Student-t interval over trials is used.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if m < 2:
        raise ValueError("need at least 2 draws to probe the diagonal")
    ent = seed_entropy(seed)
    seeds = [ent + (i,) for i in range(trials)]
    clouds = pullback_ensemble(sys, sampler, seeds, T, m, jobs=jobs)
    iu, ju = np.triu_indices(m, k=1)
    dists = sys.distance(clouds[:, iu, :], clouds[:, ju, :])
    fractions = (dists < eps_cluster).mean(axis=1)
    mass = float(fractions.mean())
    if m == 2:
        hits = int(round(fractions.sum()))
        ci = wilson_interval(hits, trials)
        pair_dists = tuple(float(v) for v in dists[:, 0])
    else:
        _, ci = batch_mean_ci(fractions)
        ci = (max(0.0, ci[0]), min(1.0, ci[1]))
        pair_dists = tuple(float(v) for v in dists.ravel())
    return DiagonalMassReport(mass, ci, trials, float(eps_cluster),
                              grid_index(T, sys.dt) * sys.dt, m, pair_dists)


@dataclass(frozen=True)
class ClusterReport:
    """Vote-based cluster count of pullback clouds plus the diagonal check.

    n_hat_cloud is the per-trial single-linkage component count that wins a
    strict majority; when no value does, inconclusive is set instead of
    guessing.  n_hat_diag inverts the diagonal mass and is None (with
    diag_mass_zero set) when no pair ever lands together.
    """

    n_hat_cloud: int
    inconclusive: bool
    vote_fraction: float
    per_trial_counts: tuple
    diag_mass: float
    diag_ci: tuple
    n_hat_diag: float | None
    diag_mass_zero: bool
    estimators_disagree: bool
    eps: float
    T: float
    m: int
    trials: int
    clouds: object = None     # (trials, m, dim) array when requested

    def summary(self):
        return {
            "n_hat_cloud": self.n_hat_cloud,
            "inconclusive": self.inconclusive,
            "vote_fraction": self.vote_fraction,
            "per_trial_counts": list(self.per_trial_counts),
            "diag_mass": self.diag_mass,
            "diag_ci": list(self.diag_ci),
            "n_hat_diag": self.n_hat_diag,
            "diag_mass_zero": self.diag_mass_zero,
            "estimators_disagree": self.estimators_disagree,
            "eps": self.eps,
            "T": self.T,
            "m": self.m,
            "trials": self.trials,
        }


def cluster_count(sys, sampler, trials, T, m, eps_cluster, seed=0, jobs=1,
                  keep_clouds=False):
    """Estimate the almost-sure atom count of the invariant random measure.

    Two estimators run on independent realizations: a majority vote over
    per-trial single-linkage component counts of m-atom clouds, and the
    reciprocal of the diagonal mass measured on fresh pairs.  Small clouds
    cannot certify a component count, hence the m >= 20 floor.
    """
    if m < 20:
        raise ValueError("cluster voting needs m >= 20 atoms per cloud")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    ent = seed_entropy(seed)
    cloud_seeds = [ent + (0, i) for i in range(trials)]
    clouds = pullback_ensemble(sys, sampler, cloud_seeds, T, m, jobs=jobs)
    counts = [single_linkage_count(sys, cloud, eps_cluster) for cloud in clouds]
    values, tallies = np.unique(counts, return_counts=True)
    best = int(np.argmax(tallies))
    n_cloud = int(values[best])
    vote_fraction = float(tallies[best] / trials)
    inconclusive = 2 * int(tallies[best]) <= trials
    diag = diagonal_mass(sys, sampler, trials, T, eps_cluster, m=2,
                         seed=ent + (1,), jobs=jobs)
    if diag.diag_mass > 0.0:
        n_diag = 1.0 / diag.diag_mass
        diag_zero = False
        disagree = round(n_diag) != n_cloud
    else:
        n_diag = None
        diag_zero = True
        disagree = True
    return ClusterReport(
        n_hat_cloud=n_cloud,
        inconclusive=bool(inconclusive),
        vote_fraction=vote_fraction,
        per_trial_counts=tuple(int(c) for c in counts),
        diag_mass=diag.diag_mass,
        diag_ci=diag.ci,
        n_hat_diag=n_diag,
        diag_mass_zero=diag_zero,
        estimators_disagree=bool(disagree),
        eps=float(eps_cluster),
        T=grid_index(T, sys.dt) * sys.dt,
        m=m,
        trials=trials,
        clouds=clouds if keep_clouds else None,
    )
