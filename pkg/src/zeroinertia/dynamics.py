"""Particle dynamics: first-order aggregation, inertial relaxation, adjoined system.

The second-order system is

    dx/dt = v,    eps dv/dt = -v + E(x),    E = -grad K * rho,

and is advanced with an integrating-factor step that treats the linear
relaxation exactly and freezes E over a substep.  That makes the scheme
stable for any h/eps, including eps far below h.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .measures import PhaseEnsemble, SpatialEnsemble
from .potentials import RadialPotential

__all__ = [
    "AdjointTrajectory",
    "IntegrationError",
    "SimConfig",
    "TrajectoryRecord",
    "adjoint_relaxation",
    "first_order_velocity",
    "interaction_field",
    "linear_closed_form",
    "self_field",
    "simulate_first_order",
    "simulate_second_order",
    "step_second_order",
]


class IntegrationError(RuntimeError):
    """Raised when a state goes non-finite; ``atom`` is the first offending index."""

    def __init__(self, message, atom=None, time=None):
        super().__init__(message)
        self.atom = atom
        self.time = time


@dataclass(frozen=True)
class SimConfig:
    """Run parameters shared by the first- and second-order integrators.

    ``step`` is the stepping unit; each step is split into ``substeps`` pieces
    with the interaction field refreshed on every piece.  Snapshots are taken
    every ``snapshot_interval`` (rounded to a whole number of steps; ``None``
    means every step) and at the horizon.  ``cutoff`` optionally skips pairs
    farther apart than the given radius; the default ``None`` is exact.
    """

    potential: RadialPotential
    epsilon: float = 0.01
    horizon: float = 2.0
    step: float = 1e-3
    substeps: int = 1
    include_self_term: bool = True
    snapshot_interval: float | None = None
    cutoff: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not (self.step > 0 and self.horizon > 0 and self.step <= self.horizon * (1 + 1e-12)):
            raise ValueError(f"need 0 < step <= horizon, got step={self.step}, horizon={self.horizon}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError("substeps must be a positive integer")
        if self.snapshot_interval is not None and self.snapshot_interval <= 0:
            raise ValueError("snapshot_interval must be positive")
        if self.cutoff is not None and self.cutoff <= 0:
            raise ValueError("cutoff must be positive")

    @property
    def cutoff2(self) -> float:
        return math.inf if self.cutoff is None else self.cutoff**2

    def schedule(self):
        """Step sizes covering [0, horizon] and the indices after which to snapshot."""
        n = max(1, math.ceil(self.horizon / self.step - 1e-9))
        steps = np.full(n, self.step)
        steps[-1] = self.horizon - self.step * (n - 1)
        every = 1 if self.snapshot_interval is None else max(1, round(self.snapshot_interval / self.step))
        marks = set(range(every, n + 1, every)) | {n}
        return steps, marks


@dataclass
class TrajectoryRecord:
    """Snapshots of a run.  ``fields`` optionally holds E at each snapshot's atoms."""

    times: np.ndarray
    states: list
    fields: list | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.states):
            raise ValueError("times and states must align")
        if len(self.times) and self.times[0] != 0.0:
            raise ValueError("a trajectory starts at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol:
            raise KeyError(f"no snapshot at t={t}")
        return i

    def at(self, t: float):
        return self.states[self.index_of(t)]

    @property
    def final(self):
        return self.states[-1]


def _check_dim(p: RadialPotential, d: int):
    if p.dim is not None and p.dim != d:
        raise ValueError(f"potential dimension {p.dim} does not match ensemble dimension {d}")


def self_field(rho: SpatialEnsemble, p: RadialPotential, cutoff2: float = math.inf) -> np.ndarray:
    """E = -grad K * rho evaluated at every atom of ``rho``."""
    _check_dim(p, rho.dim)
    return _kernels.self_field(rho.x, rho.w, p.code, p.packed, cutoff2)


def interaction_field(rho: SpatialEnsemble, p: RadialPotential, x, cutoff: float | None = None):
    """E(x) = -sum_j w_j grad K(x - x_j) at one point (shape (d,)) or many (shape (m, d))."""
    _check_dim(p, rho.dim)
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != rho.dim:
        raise ValueError(f"point dimension {pts.shape[1]} != ensemble dimension {rho.dim}")
    c2 = math.inf if cutoff is None else cutoff**2
    out = _kernels.field_at(np.ascontiguousarray(pts), rho.x, rho.w, p.code, p.packed, c2)
    return out[0] if single else out


def first_order_velocity(rho: SpatialEnsemble, p: RadialPotential, i: int,
                         include_self_term: bool = True) -> np.ndarray:
    """Velocity of atom ``i`` in the first-order model.

    With ``include_self_term`` this is the convolution form, sum over all j.
    Without it, the particle form ``-(1/N) sum_{j != i} grad K(x_i - x_j)``,
    which requires uniform weights.
    """
    if not 0 <= i < rho.n:
        raise IndexError(f"atom index {i} out of range for {rho.n} atoms")
    if include_self_term:
        return interaction_field(rho, p, rho.x[i])
    if not np.allclose(rho.w, 1.0 / rho.n, rtol=0, atol=1e-15):
        raise ValueError("the particle form without self term needs uniform weights")
    others = np.delete(np.arange(rho.n), i)
    diffs = rho.x[i] - rho.x[others]
    r2 = (diffs**2).sum(axis=1)
    phi = np.array([_kernels.radial_profile(p.code, p.packed, s) for s in r2])
    return -(phi[:, None] * diffs).sum(axis=0) / rho.n


# -- second order -----------------------------------------------------------------

def _relax(x, v, E, h, eps):
    a = math.exp(-h / eps)
    one_minus_a = -math.expm1(-h / eps)
    dv = v - E
    return x + E * h + eps * one_minus_a * dv, E + a * dv


def _check_finite(x, v, t):
    bad = ~(np.isfinite(x).all(axis=1) & np.isfinite(v).all(axis=1))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise IntegrationError(f"non-finite state at atom {i} (t={t})", atom=i, time=t)


def _advance(x, v, w, h, cfg, p):
    sub = h / cfg.substeps
    for _ in range(cfg.substeps):
        E = _kernels.self_field(x, w, p.code, p.packed, cfg.cutoff2)
        x, v = _relax(x, v, E, sub, cfg.epsilon)
    return x, v


def step_second_order(state: PhaseEnsemble, cfg: SimConfig) -> PhaseEnsemble:
    """One step of size ``cfg.step``.

    Per substep of length h, with E frozen at the start::

        v+ = E + (v - E) exp(-h/eps)
        x+ = x + E h + eps (v - E) (1 - exp(-h/eps))

    which is the exact flow when E is constant.
    """
    _check_finite(state.x, state.v, 0.0)
    _check_dim(cfg.potential, state.dim)
    x, v = _advance(state.x, state.v, state.w, cfg.step, cfg, cfg.potential)
    _check_finite(x, v, cfg.step)
    return PhaseEnsemble(x, v, state.w)


def simulate_second_order(f0: PhaseEnsemble, cfg: SimConfig) -> TrajectoryRecord:
    p = cfg.potential
    _check_dim(p, f0.dim)
    _check_finite(f0.x, f0.v, 0.0)
    steps, marks = cfg.schedule()
    w = f0.w
    x, v = np.array(f0.x), np.array(f0.v)
    times, states, fields = [0.0], [f0], []
    t = 0.0
    sub_count = cfg.substeps
    for n, h in enumerate(steps, start=1):
        sub = h / sub_count
        for k in range(sub_count):
            E = _kernels.self_field(x, w, p.code, p.packed, cfg.cutoff2)
            if k == 0 and (n - 1 == 0 or (n - 1) in marks):
                fields.append(E)
            x, v = _relax(x, v, E, sub, cfg.epsilon)
        t = cfg.step * (n - 1) + h
        if n in marks:
            _check_finite(x, v, t)
            times.append(t)
            states.append(PhaseEnsemble(x, v, w))
    fields.append(_kernels.self_field(x, w, p.code, p.packed, cfg.cutoff2))
    return TrajectoryRecord(np.array(times), states, fields)


# -- first order ------------------------------------------------------------------

def simulate_first_order(rho0: SpatialEnsemble, cfg: SimConfig) -> TrajectoryRecord:
    """Classical RK4 on dx_i/dt = E(x)_i; ``cfg.epsilon`` is ignored."""
    p = cfg.potential
    _check_dim(p, rho0.dim)
    steps, marks = cfg.schedule()
    w = rho0.w

    def rhs(y):
        return _kernels.self_field(y, w, p.code, p.packed, cfg.cutoff2)

    x = np.array(rho0.x)
    times, states, fields = [0.0], [rho0], []
    k1 = rhs(x)
    fields.append(k1)
    for n, h in enumerate(steps, start=1):
        k2 = rhs(x + 0.5 * h * k1)
        k3 = rhs(x + 0.5 * h * k2)
        k4 = rhs(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        k1 = rhs(x)
        if n in marks:
            t = cfg.step * (n - 1) + h
            if not np.isfinite(x).all():
                i = int(np.flatnonzero(~np.isfinite(x).all(axis=1))[0])
                raise IntegrationError(f"non-finite state at atom {i} (t={t})", atom=i, time=t)
            times.append(t)
            states.append(SpatialEnsemble(x, w))
            fields.append(k1)
    return TrajectoryRecord(np.array(times), states, fields)


# -- adjoined system ----------------------------------------------------------------

@dataclass
class AdjointTrajectory:
    """Solution of dv/dtau = -v + Gamma(x*) at a frozen configuration x*."""

    tau: np.ndarray
    vstar: np.ndarray
    v_exact: np.ndarray
    v_rk4: np.ndarray
    v0: np.ndarray = field(repr=False)

    def decay_ratio(self, exact: bool = False) -> np.ndarray:
        """|v(tau) - v*| / |v0 - v*| over the whole configuration."""
        v = self.v_exact if exact else self.v_rk4
        num = np.linalg.norm((v - self.vstar).reshape(len(self.tau), -1), axis=1)
        return num / np.linalg.norm(self.v0 - self.vstar)


def adjoint_relaxation(xstar: SpatialEnsemble, p: RadialPotential, v0, tau_max: float,
                       dtau: float = 1e-3) -> AdjointTrajectory:
    """Relax velocities toward the root Gamma(x*) with positions frozen.

    ``v0`` is either one velocity in R^d shared by all atoms or an (N, d)
    array.  Returned on the grid ``tau = 0, dtau, ..., tau_max``, both from the
    closed form and from RK4.
    """
    vstar = self_field(xstar, p)
    v0 = np.broadcast_to(np.asarray(v0, dtype=float), xstar.x.shape).copy()
    n = max(1, math.ceil(tau_max / dtau - 1e-9))
    tau = np.linspace(0.0, tau_max, n + 1)
    exact = vstar[None] + (v0 - vstar)[None] * np.exp(-tau)[:, None, None]
    exact[0] = v0  # v* + (v0 - v*) rounds; tau = 0 is the initial state exactly
    rk = np.empty_like(exact)
    rk[0] = v0
    v = v0.copy()
    for k in range(n):
        h = tau[k + 1] - tau[k]
        k1 = vstar - v
        k2 = vstar - (v + 0.5 * h * k1)
        k3 = vstar - (v + 0.5 * h * k2)
        k4 = vstar - (v + h * k3)
        v = v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        rk[k + 1] = v
    return AdjointTrajectory(tau, vstar, exact, rk, v0)


# -- closed form for the quadratic kernel ----------------------------------------------

CONFLUENT_TOL = 1e-12


def relaxation_rates(epsilon: float):
    """Roots of eps l^2 + l + 1 = 0 as ``(slow, fast)``; complex when eps > 1/4."""
    disc = 1.0 - 4.0 * epsilon
    if abs(disc) < CONFLUENT_TOL:
        lam = -1.0 / (2.0 * epsilon)
        return lam, lam
    if disc > 0:
        s = math.sqrt(disc)
        # product of the roots is 1/eps; avoids cancellation in the slow root
        return -2.0 / (1.0 + s), -(1.0 + s) / (2.0 * epsilon)
    s = math.sqrt(-disc) / (2.0 * epsilon)
    return complex(-1.0 / (2.0 * epsilon), s), complex(-1.0 / (2.0 * epsilon), -s)


def linear_closed_form(x0, v0, epsilon: float, t, c=0.0):
    """Exact solution of eps x'' + x' + x = c with x(0) = x0, x'(0) = v0.

    Works elementwise on arrays.  ``epsilon = 0`` returns the degenerate
    first-order solution ``x = c + (x0 - c) e^{-t}`` (``v0`` is then unused).
    ``t`` may be a scalar or a 1-D array; in the latter case a leading time
    axis is added.  Returns ``(x(t), v(t))``.
    """
    y0 = np.asarray(x0, dtype=float) - c
    v0 = np.asarray(v0, dtype=float)
    t = np.asarray(t, dtype=float)
    tt = t.reshape(t.shape + (1,) * y0.ndim)
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if epsilon == 0:
        e = np.exp(-tt)
        return c + y0 * e, -y0 * e
    disc = 1.0 - 4.0 * epsilon
    if abs(disc) < CONFLUENT_TOL:
        lam = -1.0 / (2.0 * epsilon)
        b = v0 - lam * y0
        e = np.exp(lam * tt)
        return c + (y0 + b * tt) * e, (b + lam * (y0 + b * tt)) * e
    if disc > 0:
        slow, fast = relaxation_rates(epsilon)
        a = (v0 - fast * y0) / (slow - fast)
        b = y0 - a
        es, ef = np.exp(slow * tt), np.exp(fast * tt)
        return c + a * es + b * ef, slow * a * es + fast * b * ef
    alpha = -1.0 / (2.0 * epsilon)
    beta = math.sqrt(-disc) / (2.0 * epsilon)
    b = (v0 - alpha * y0) / beta
    e = np.exp(alpha * tt)
    cs, sn = np.cos(beta * tt), np.sin(beta * tt)
    x = y0 * cs + b * sn
    dx = -y0 * beta * sn + b * beta * cs
    return c + e * x, e * (alpha * x + dx)
