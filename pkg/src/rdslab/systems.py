"""Example systems and their flows.

Two model systems exercise the rest of the lab: a double-well gradient-type
diffusion on R^d with additive noise, stepped by a tamed explicit scheme, and
an expanding-contracting circle map driven by an i.i.d. uniform rotation
parameter.  Both are packaged as SystemSpec values so diagnostics stay
generic over state space, metric and time kind.

Flows consume increment cells from a noise realization and never draw fresh
randomness, so composition along shifted windows reproduces single runs
exactly.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import noise as noise_mod
from .noise import NoisePath, NoiseSeq, UniformLaw, grid_index

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SystemSpec:
    """A stepped random dynamical system.

    stepper(x, w, dt) advances states of shape (..., dim) through one grid
    cell given that cell's driving value w; jacobian_stepper additionally
    transports a tangent frame.  params is a flat tuple of (name, value)
    pairs so specs stay hashable.
    """

    name: str
    state_space: str          # "euclidean" or "circle"
    dim: int
    noise_dim: int
    time_kind: str            # "continuous" or "discrete"
    dt: float
    stepper: Callable
    jacobian_stepper: Optional[Callable]
    noise_law: Optional[UniformLaw]
    params: tuple

    def param(self, name, default=None):
        for key, value in self.params:
            if key == name:
                return value
        return default

    def distance(self, a, b):
        """Metric on the state space, vectorized over leading axes."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if self.state_space == "circle":
            diff = np.abs(a[..., 0] - b[..., 0]) % TWO_PI
            return np.minimum(diff, TWO_PI - diff)
        return np.linalg.norm(a - b, axis=-1)


def double_well_drift(y):
    """Drift (1 - |y|^2) y of the double-well system, batched over (..., d)."""
    y = np.asarray(y, dtype=float)
    n2 = np.sum(y * y, axis=-1, keepdims=True)
    return (1.0 - n2) * y


def double_well_drift_jacobian(y):
    """Jacobian (1 - |y|^2) I - 2 y y^T of the drift at a single point."""
    y = np.asarray(y, dtype=float)
    n2 = float(y @ y)
    return (1.0 - n2) * np.eye(y.size) - 2.0 * np.outer(y, y)


def one_sided_lipschitz_constant():
    """One-sided Lipschitz constant of the double-well drift.

    The symmetric part of the drift Jacobian is bounded above by
    (1 - |y|^2) <= 1, attained at the origin, in every dimension.
    """
    return 1.0


def _double_well_stepper(tamed):
    def stepper(x, dw, dt):
        n2 = np.sum(x * x, axis=-1, keepdims=True)
        b = (1.0 - n2) * x
        if tamed:
            nb = np.sqrt(np.sum(b * b, axis=-1, keepdims=True))
            return x + b * (dt / (1.0 + dt * nb)) + dw
        return x + b * dt + dw

    return stepper


def _double_well_jacobian_stepper(tamed):
    def jac_stepper(x, v, dw, dt):
        x = np.asarray(x, dtype=float)
        d = x.size
        n2 = float(x @ x)
        b = (1.0 - n2) * x
        jac = (1.0 - n2) * np.eye(d) - 2.0 * np.outer(x, x)
        if tamed:
            nb = math.sqrt(float(b @ b))
            c = dt / (1.0 + dt * nb)
            dg = np.eye(d) + c * jac
            if nb > 0.0:
                # Derivative of the taming factor; vanishes smoothly at b = 0.
                dg -= (dt * dt / (1.0 + dt * nb) ** 2 / nb) * np.outer(b, jac @ b)
            x_new = x + c * b + dw
        else:
            dg = np.eye(d) + dt * jac
            x_new = x + dt * b + dw
        return x_new, dg @ v

    return jac_stepper


def double_well(d=2, dt=1e-3, tamed=True):
    """Double-well diffusion on R^d with additive unit noise."""
    if d < 1:
        raise ValueError("d must be at least 1")
    if dt <= 0:
        raise ValueError("dt must be positive")
    return SystemSpec(
        name="doublewell",
        state_space="euclidean",
        dim=d,
        noise_dim=d,
        time_kind="continuous",
        dt=float(dt),
        stepper=_double_well_stepper(tamed),
        jacobian_stepper=_double_well_jacobian_stepper(tamed),
        noise_law=None,
        params=(("one_sided_lipschitz", 1.0), ("tamed", bool(tamed))),
    )


def circle_step(x, alpha, eps_c):
    """One application of x -> x + eps_c sin(2 (x - alpha)) mod 2 pi."""
    x = np.asarray(x, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    return (x + eps_c * np.sin(2.0 * (x - alpha))) % TWO_PI


def circle_map(eps_c=0.3):
    """Random circle map with i.i.d. uniform phase at each step.

    Angles live in [0, 2 pi); states have shape (..., 1).  The map is an
    orientation-preserving diffeomorphism only for eps_c < 1/2, which the
    constructor enforces.
    """
    if not 0.0 < eps_c < 0.5:
        raise ValueError("eps_c must lie in (0, 0.5) for an invertible map")

    def stepper(x, alpha, dt):
        return circle_step(x, alpha, eps_c)

    def jac_stepper(x, v, alpha, dt):
        x = np.asarray(x, dtype=float)
        mult = 1.0 + 2.0 * eps_c * np.cos(2.0 * (x - np.asarray(alpha, float)))
        return circle_step(x, alpha, eps_c), mult * v

    return SystemSpec(
        name="circlemap",
        state_space="circle",
        dim=1,
        noise_dim=1,
        time_kind="discrete",
        dt=1.0,
        stepper=stepper,
        jacobian_stepper=jac_stepper,
        noise_law=UniformLaw(0.0, TWO_PI, d=1),
        params=(("eps_c", float(eps_c)),),
    )


def sample_driving(sys, seed, t_lo, t_hi):
    """Sample the driving realization appropriate for a system's time kind."""
    if sys.time_kind == "continuous":
        return noise_mod.sample_wiener(seed, sys.noise_dim, t_lo, t_hi, sys.dt)
    return noise_mod.sample_noise_seq(seed, sys.noise_law, int(t_lo), int(t_hi))


def driving_cells(sys, seed, k0, k1):
    """Driving values for absolute cells k0..k1-1 under a seed's lineage."""
    if sys.time_kind == "continuous":
        return noise_mod.wiener_increments(seed, sys.noise_dim, sys.dt, k0, k1)
    return noise_mod.law_draws(seed, sys.noise_law, k0, k1)


def zero_driving(sys, t_lo, t_hi):
    """All-zero driving input (continuous-time systems only)."""
    if sys.time_kind != "continuous":
        raise ValueError("zero driving is only defined for continuous time")
    return noise_mod.zero_path(sys.noise_dim, sys.dt, t_lo, t_hi)


def _check_path(sys, path):
    if sys.time_kind == "continuous":
        if not isinstance(path, NoisePath):
            raise TypeError("continuous-time systems are driven by NoisePath")
        if abs(path.dt - sys.dt) > 1e-12 * max(1.0, sys.dt):
            raise ValueError(
                f"path dt {path.dt} does not match system dt {sys.dt}")
    else:
        if not isinstance(path, NoiseSeq):
            raise TypeError("discrete-time systems are driven by NoiseSeq")
    if path.d != sys.noise_dim:
        raise ValueError(
            f"path dimension {path.d} does not match noise dimension "
            f"{sys.noise_dim}")


def _check_state(sys, x):
    x = np.array(x, dtype=float)
    if x.ndim < 1 or x.shape[-1] != sys.dim:
        raise ValueError(
            f"states must have shape (..., {sys.dim}), got {x.shape}")
    return x


def flow(sys, path, x0, t):
    """State at time t of the trajectory from x0 at time 0 under path.

    Steps through the grid cells of [0, t]; t must be a nonnegative grid
    time covered by the path window.  x0 may carry leading batch axes.
    """
    return flow_trajectory(sys, path, x0, [t])[-1]


def flow_trajectory(sys, path, x0, times):
    """States at several grid times (non-decreasing, all in [0, window end])."""
    _check_path(sys, path)
    x = _check_state(sys, x0)
    cells = [grid_index(t, sys.dt, what="flow time") for t in times]
    if any(c < 0 for c in cells):
        raise ValueError("flow times must be nonnegative")
    if any(b < a for a, b in zip(cells, cells[1:])):
        raise ValueError("flow times must be non-decreasing")
    if not cells:
        raise ValueError("need at least one flow time")
    if path.k_lo > 0 or path.k_hi < cells[-1]:
        raise ValueError(
            f"path window [{path.k_lo * path.dt}, {path.k_hi * path.dt}] does "
            f"not cover [0, {cells[-1] * sys.dt}]")
    out = np.empty((len(cells),) + x.shape)
    ptr = 0
    while ptr < len(cells) and cells[ptr] == 0:
        out[ptr] = x
        ptr += 1
    k = 0
    n = cells[-1]
    while k < n:
        k2 = min(n, (k // noise_mod._BLOCK + 1) * noise_mod._BLOCK)
        block = path.cell_slice(k, k2)
        for j in range(k2 - k):
            x = sys.stepper(x, block[j], sys.dt)
            kk = k + j + 1
            while ptr < len(cells) and cells[ptr] == kk:
                out[ptr] = x
                ptr += 1
        k = k2
    return out


def flow_pair(sys, path, x0, y0, t):
    """Flow two initial states under one shared realization."""
    return flow(sys, path, x0, t), flow(sys, path, y0, t)


def flow_with_tangent(sys, path, x0, v0, t):
    """Flow a state and a tangent frame v0 (dim, k) along the trajectory."""
    _check_path(sys, path)
    if sys.jacobian_stepper is None:
        raise ValueError(f"system {sys.name} has no tangent stepper")
    x = _check_state(sys, x0)
    if x.ndim != 1:
        raise ValueError("tangent flows take a single state")
    v = np.array(v0, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if v.shape[0] != sys.dim:
        raise ValueError(f"tangent frame must have shape ({sys.dim}, k)")
    n = grid_index(t, sys.dt, what="flow time")
    if n < 0:
        raise ValueError("flow times must be nonnegative")
    if path.k_lo > 0 or path.k_hi < n:
        raise ValueError("path window does not cover [0, t]")
    k = 0
    while k < n:
        k2 = min(n, (k // noise_mod._BLOCK + 1) * noise_mod._BLOCK)
        block = path.cell_slice(k, k2)
        for j in range(k2 - k):
            x, v = sys.jacobian_stepper(x, v, block[j], sys.dt)
        k = k2
    return x, v


def ensemble_flow(sys, x0, n_cells, incs_for, record_cells, chunk=noise_mod._BLOCK):
    """Advance an (L, B, dim) ensemble through n_cells grid cells.

    incs_for(k0, k1) supplies driving values of shape (L, k1 - k0, noise_dim)
    (or (1, ...) to share one realization across rows); each row's value is
    broadcast over that row's B states.  Returns snapshots after the cell
    counts in record_cells (sorted, possibly including 0 and n_cells) as an
    (n_rec, L, B, dim) array.

    States produced here match flow() bit for bit because the very same
    stepper runs on the very same increment values in the same order.
    """
    states = np.array(x0, dtype=float)
    if states.ndim != 3 or states.shape[-1] != sys.dim:
        raise ValueError(f"ensemble states must have shape (L, B, {sys.dim})")
    record = list(record_cells)
    if any(b < a for a, b in zip(record, record[1:])):
        raise ValueError("record cells must be non-decreasing")
    if record and (record[0] < 0 or record[-1] > n_cells):
        raise ValueError("record cells must lie in [0, n_cells]")
    out = np.empty((len(record),) + states.shape)
    ptr = 0
    while ptr < len(record) and record[ptr] == 0:
        out[ptr] = states
        ptr += 1
    k = 0
    while k < n_cells:
        k2 = min(n_cells, (k // chunk + 1) * chunk)
        dw = incs_for(k, k2)
        for j in range(k2 - k):
            states = sys.stepper(states, dw[:, j][:, None, :], sys.dt)
            kk = k + j + 1
            while ptr < len(record) and record[ptr] == kk:
                out[ptr] = states
                ptr += 1
        k = k2
    return out
