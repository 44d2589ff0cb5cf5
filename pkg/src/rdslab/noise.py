"""Noise realizations on a uniform time grid.

Three kinds of driving input share one representation: Wiener paths for
continuous-time systems, i.i.d. draw sequences for discrete-time maps, and
deterministic steering inputs used to exhibit controllability events.

Paths are anchored so that the realization is zero at time 0.  Every
stochastic cell value is derived from a counter-based generator keyed by
(master key, cell block), so a given absolute grid cell always carries the
same value no matter when, or in what batch shape, it is materialized.  That
makes time shifts pure re-indexing and makes window extension reproducible.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

# Cells are generated in fixed blocks so that extending a window, or reading
# it chunk by chunk, reproduces identical values.
_BLOCK = 4096
_MASK64 = (1 << 64) - 1

# Relative slack when snapping times to the grid.
_GRID_RTOL = 1e-6


def seed_entropy(seed):
    """Normalize a seed (int or tuple of ints) to a flat entropy tuple."""
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def derive_key(seed):
    """Derive a 128-bit generator key from a seed or entropy tuple."""
    ss = np.random.SeedSequence(seed_entropy(seed))
    hi, lo = ss.generate_state(2, np.uint64)
    return (int(hi), int(lo))


def _block_generator(key, block_index):
    counter = np.array([0, block_index & _MASK64, 0, 0], dtype=np.uint64)
    bitgen = np.random.Philox(key=np.asarray(key, dtype=np.uint64), counter=counter)
    return np.random.Generator(bitgen)


def _cells(key, d, k0, k1, fill):
    """Materialize per-cell values for absolute cells k0 <= k < k1.

    fill(gen, n) draws an (n, d) block from a fresh generator; cells are cut
    out of fixed-size blocks so any overlapping request reproduces the same
    values bit for bit.
    """
    out = np.empty((k1 - k0, d))
    if k1 <= k0:
        return out
    first, last = k0 // _BLOCK, (k1 - 1) // _BLOCK
    for b in range(first, last + 1):
        lo = max(k0, b * _BLOCK)
        hi = min(k1, (b + 1) * _BLOCK)
        block = fill(_block_generator(key, b), _BLOCK)
        out[lo - k0:hi - k0] = block[lo - b * _BLOCK:hi - b * _BLOCK]
    return out


def wiener_increments(seed, d, dt, k0, k1):
    """N(0, dt I_d) increments for grid cells k0..k1-1 of a Wiener path."""
    key = derive_key(seed)
    raw = _cells(key, d, k0, k1, lambda g, n: g.standard_normal((n, d)))
    return raw * math.sqrt(dt)


def grid_index(t, dt, what="time"):
    """Snap t to the nearest grid index, rejecting off-grid values."""
    u = t / dt
    k = round(u)
    if abs(u - k) > _GRID_RTOL * max(1.0, abs(u)):
        raise ValueError(f"{what} {t!r} is not aligned to the dt={dt} grid")
    return int(k)


@dataclass(frozen=True)
class _Lineage:
    """Generative identity of a stochastic path.

    offset maps the path's cell k to generation cell k + offset, so shifted
    views keep producing the same absolute cells when extended.
    """
    key: tuple
    offset: int = 0


class _GridWindow:
    """Shared window logic for grid-indexed realizations."""

    def _check_window(self):
        if self.k_lo > 0 or self.k_hi < 0:
            raise ValueError(
                f"window [{self.k_lo}, {self.k_hi}] must contain cell 0")

    @property
    def n_cells(self):
        return self.k_hi - self.k_lo


@dataclass(frozen=True)
class NoisePath(_GridWindow):
    """A piecewise-linear path on the grid {k*dt : k_lo <= k <= k_hi}.

    increments[i] is the path change over cell k_lo + i.  The path value is
    zero at t = 0 by construction; values elsewhere are anchored cumulative
    sums of the increments, linearly interpolated inside cells.
    """

    d: int
    dt: float
    k_lo: int
    k_hi: int
    increments: np.ndarray
    lineage: _Lineage | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        self._check_window()
        inc = np.asarray(self.increments, dtype=float)
        if inc.shape != (self.n_cells, self.d):
            raise ValueError(
                f"increments shape {inc.shape} != ({self.n_cells}, {self.d})")
        if inc.flags.writeable:
            # Freeze a private copy; shifted views share frozen arrays as-is.
            inc = inc.copy()
            inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    @property
    def t_lo(self):
        return self.k_lo * self.dt

    @property
    def t_hi(self):
        return self.k_hi * self.dt

    @cached_property
    def _grid_values(self):
        # Anchor at cell 0 and accumulate outward, so extending the window on
        # the left cannot perturb values the old window already produced.
        i0 = -self.k_lo
        vals = np.zeros((self.n_cells + 1, self.d))
        if self.k_hi > 0:
            vals[i0 + 1:] = np.cumsum(self.increments[i0:], axis=0)
        if self.k_lo < 0:
            back = np.cumsum(self.increments[:i0][::-1], axis=0)[::-1]
            vals[:i0] = -back
        vals.setflags(write=False)
        return vals

    def evaluate(self, t):
        """Path value at time t (linear interpolation between grid nodes)."""
        u = t / self.dt
        slack = _GRID_RTOL * max(1.0, abs(u))
        if u < self.k_lo - slack or u > self.k_hi + slack:
            raise ValueError(
                f"time {t!r} lies outside the window "
                f"[{self.t_lo}, {self.t_hi}]; paths are never extrapolated")
        k = round(u)
        if abs(u - k) <= slack:
            return self._grid_values[int(k) - self.k_lo].copy()
        j = math.floor(u)
        frac = u - j
        i = j - self.k_lo
        return self._grid_values[i] + frac * self.increments[i]

    def shift(self, tau):
        """View of the path as seen from time tau: t -> w(t+tau) - w(tau).

        Pure re-indexing of the same increments; tau must be a grid time
        inside the window.
        """
        ks = grid_index(tau, self.dt, what="shift")
        if ks < self.k_lo or ks > self.k_hi:
            raise ValueError(
                f"shift {tau!r} falls outside the window [{self.t_lo}, {self.t_hi}]")
        lineage = None
        if self.lineage is not None:
            lineage = _Lineage(self.lineage.key, self.lineage.offset + ks)
        return NoisePath(self.d, self.dt, self.k_lo - ks, self.k_hi - ks,
                         self.increments, lineage)

    def extend_left(self, new_t_lo):
        """Regrow the window to the left, preserving existing cells exactly."""
        k_new = grid_index(new_t_lo, self.dt, what="new window edge")
        if k_new > self.k_lo:
            raise ValueError(
                f"new edge {new_t_lo!r} would shrink the window")
        if k_new == self.k_lo:
            return self
        if self.lineage is None:
            raise ValueError(
                "path has no generative lineage; deterministic paths cannot "
                "be extended")
        fresh = _cells(self.lineage.key, self.d,
                       k_new + self.lineage.offset, self.k_lo + self.lineage.offset,
                       lambda g, n: g.standard_normal((n, self.d)))
        fresh *= math.sqrt(self.dt)
        inc = np.concatenate([fresh, self.increments], axis=0)
        inc.setflags(write=False)
        return NoisePath(self.d, self.dt, k_new, self.k_hi, inc, self.lineage)

    def cell_slice(self, k0, k1):
        """Increments for cells k0..k1-1 as a read-only view."""
        if k0 < self.k_lo or k1 > self.k_hi:
            raise ValueError(
                f"cells [{k0}, {k1}) exceed the window [{self.k_lo}, {self.k_hi}]")
        i0 = k0 - self.k_lo
        return self.increments[i0:i0 + (k1 - k0)]

    def write_csv(self, f):
        """Dump grid values as delimited text: t, w_1..w_d."""
        header = ",".join(["t"] + [f"w_{i + 1}" for i in range(self.d)])
        f.write(header + "\n")
        for k in range(self.k_lo, self.k_hi + 1):
            row = self._grid_values[k - self.k_lo]
            f.write(",".join([repr(k * self.dt)]
                             + [repr(float(v)) for v in row]) + "\n")


def sample_wiener(seed, d, t_lo, t_hi, dt):
    """Sample a d-dimensional Wiener path on [t_lo, t_hi] with step dt.

    The window must contain 0 and its edges must sit on the dt grid.  Equal
    seeds reproduce equal paths bit for bit.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if d < 1:
        raise ValueError("d must be at least 1")
    k_lo = grid_index(t_lo, dt, what="window edge")
    k_hi = grid_index(t_hi, dt, what="window edge")
    key = derive_key(seed)
    inc = _cells(key, d, k_lo, k_hi, lambda g, n: g.standard_normal((n, d)))
    inc *= math.sqrt(dt)
    inc.setflags(write=False)
    return NoisePath(d, dt, k_lo, k_hi, inc, _Lineage(key))


def zero_path(d, dt, t_lo, t_hi):
    """Deterministic all-zero path (useful as a noise-off control)."""
    k_lo = grid_index(t_lo, dt, what="window edge")
    k_hi = grid_index(t_hi, dt, what="window edge")
    return NoisePath(d, dt, k_lo, k_hi, np.zeros((k_hi - k_lo, d)))


def steering_path(kind, *, dt, t_hi=None, t_lo=0.0, x=None, y=None,
                  eta0=None, eta1=None, eta2=None, d=None):
    """Deterministic steering input of one of two shapes.

    "transit" ramps at rate eta0 along y - x, so that following the input
    alone for time 1/eta0 moves the state from x to y.  "contract" pushes at
    rate eta1*eta2 along the first axis for time 1/eta1 and then holds, which
    parks the input at (eta2, 0, ...).  Rates must be positive; the result is
    an ordinary NoisePath without a generative lineage.
    """
    if kind == "transit":
        if x is None or y is None or eta0 is None:
            raise ValueError("transit steering needs x, y and eta0")
        if eta0 <= 0:
            raise ValueError("eta0 must be positive")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("x and y must be vectors of equal length")
        d = x.size
        if t_hi is None:
            t_hi = dt * math.ceil(1.0 / (eta0 * dt) - 1e-9)

        def value(times):
            return eta0 * times[:, None] * (y - x)[None, :]
    elif kind == "contract":
        if eta1 is None or eta2 is None or d is None:
            raise ValueError("contract steering needs eta1, eta2 and d")
        if eta1 <= 0 or eta2 <= 0:
            raise ValueError("eta1 and eta2 must be positive")
        if t_hi is None:
            raise ValueError("contract steering needs an explicit t_hi")

        def value(times):
            vals = np.zeros((times.size, d))
            vals[:, 0] = eta1 * eta2 * np.clip(times, 0.0, 1.0 / eta1)
            return vals
    else:
        raise ValueError(f"unknown steering kind {kind!r}")

    k_lo = grid_index(t_lo, dt, what="window edge")
    k_hi = grid_index(t_hi, dt, what="window edge")
    times = np.arange(k_lo, k_hi + 1) * dt
    inc = np.diff(value(times), axis=0)
    return NoisePath(d, dt, k_lo, k_hi, inc)


@dataclass(frozen=True)
class UniformLaw:
    """Uniform product law on [lo, hi]^d for i.i.d. draw sequences."""

    lo: float
    hi: float
    d: int = 1

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("law needs hi > lo")

    def draw_block(self, gen, n):
        return self.lo + (self.hi - self.lo) * gen.random((n, self.d))


def law_draws(seed, law, k0, k1):
    """Per-cell i.i.d. draws from law for absolute cells k0..k1-1."""
    key = derive_key(seed)
    return _cells(key, law.d, k0, k1, law.draw_block)


@dataclass(frozen=True)
class NoiseSeq(_GridWindow):
    """An i.i.d. draw sequence on integer times k_lo <= k < k_hi.

    draws[i] parameterizes the map applied over step k_lo + i.  Shifting
    re-indexes the same draws; extension regrows the window on the left from
    the sequence's lineage.
    """

    law: UniformLaw
    k_lo: int
    k_hi: int
    draws: np.ndarray
    lineage: _Lineage | None = None

    def __post_init__(self):
        self._check_window()
        arr = np.asarray(self.draws, dtype=float)
        if arr.shape != (self.n_cells, self.law.d):
            raise ValueError(
                f"draws shape {arr.shape} != ({self.n_cells}, {self.law.d})")
        if arr.flags.writeable:
            arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "draws", arr)

    @property
    def d(self):
        return self.law.d

    @property
    def dt(self):
        return 1.0

    def draw(self, k):
        """The draw governing step k."""
        if k < self.k_lo or k >= self.k_hi:
            raise ValueError(f"step {k} outside window [{self.k_lo}, {self.k_hi})")
        return self.draws[k - self.k_lo]

    def shift(self, tau):
        ks = int(tau)
        if ks != tau:
            raise ValueError("sequences shift by whole steps only")
        if ks < self.k_lo or ks > self.k_hi:
            raise ValueError(
                f"shift {tau!r} falls outside the window [{self.k_lo}, {self.k_hi}]")
        lineage = None
        if self.lineage is not None:
            lineage = _Lineage(self.lineage.key, self.lineage.offset + ks)
        return NoiseSeq(self.law, self.k_lo - ks, self.k_hi - ks,
                        self.draws, lineage)

    def extend_left(self, new_k_lo):
        k_new = int(new_k_lo)
        if k_new > self.k_lo:
            raise ValueError(f"new edge {new_k_lo!r} would shrink the window")
        if k_new == self.k_lo:
            return self
        if self.lineage is None:
            raise ValueError(
                "sequence has no generative lineage; deterministic sequences "
                "cannot be extended")
        fresh = _cells(self.lineage.key, self.law.d,
                       k_new + self.lineage.offset, self.k_lo + self.lineage.offset,
                       self.law.draw_block)
        return NoiseSeq(self.law, k_new, self.k_hi,
                        np.concatenate([fresh, self.draws], axis=0), self.lineage)

    def cell_slice(self, k0, k1):
        if k0 < self.k_lo or k1 > self.k_hi:
            raise ValueError(
                f"cells [{k0}, {k1}) exceed the window [{self.k_lo}, {self.k_hi}]")
        i0 = k0 - self.k_lo
        return self.draws[i0:i0 + (k1 - k0)]

    def write_csv(self, f):
        header = ",".join(["t"] + [f"a_{i + 1}" for i in range(self.law.d)])
        f.write(header + "\n")
        for k in range(self.k_lo, self.k_hi):
            row = self.draws[k - self.k_lo]
            f.write(",".join([repr(float(k))]
                             + [repr(float(v)) for v in row]) + "\n")


def sample_noise_seq(seed, law, t_lo, t_hi):
    """Sample an i.i.d. sequence under law on integer window [t_lo, t_hi)."""
    k_lo, k_hi = int(t_lo), int(t_hi)
    if (k_lo, k_hi) != (t_lo, t_hi):
        raise ValueError("sequence windows use whole steps")
    key = derive_key(seed)
    draws = _cells(key, law.d, k_lo, k_hi, law.draw_block)
    return NoiseSeq(law, k_lo, k_hi, draws, _Lineage(key))


def wiener_statistics(path):
    """Summary statistics used by the sanity report for sampled paths.

    Returns per-coordinate mean z-scores and variance ratios of the
    increments, the largest off-diagonal correlation, and the largest
    deviation of the shift group law checked on re-indexed cells.
    """
    inc = np.asarray(path.increments)
    n = inc.shape[0]
    if n < 2:
        raise ValueError("need at least 2 increments for statistics")
    mean = inc.mean(axis=0)
    var = inc.var(axis=0, ddof=1)
    z = mean / np.sqrt(path.dt / n)
    ratio = var / path.dt
    corr = np.corrcoef(inc, rowvar=False)
    if path.d == 1:
        max_corr = 0.0
    else:
        off = corr - np.diag(np.diag(corr))
        max_corr = float(np.max(np.abs(off)))
    # Group law: shifting by a then b must reproduce shifting by a+b.
    third = max(1, n // 3)
    a, b = path.k_lo + third, third
    a = min(max(a, path.k_lo), path.k_hi)
    b = min(b, path.k_hi - a)
    two_step = path.shift(a * path.dt).shift(b * path.dt)
    one_step = path.shift((a + b) * path.dt)
    law_dev = float(np.max(np.abs(two_step.increments - one_step.increments))) \
        if two_step.n_cells else 0.0
    return {
        "n_cells": int(n),
        "mean_z": [float(v) for v in z],
        "var_ratio": [float(v) for v in ratio],
        "max_abs_corr": float(max_corr),
        "shift_law_dev": law_dev,
    }
