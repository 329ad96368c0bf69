"""Diagnostics: exact Wasserstein-1 distances, the moment functional, rate fits.

``wasserstein1`` is exact in every mode:

* ``quantile``   1-D, any weights: integral of |F_mu - F_nu|.
* ``assignment`` uniform weights and equal atom counts: an optimal coupling
  is a permutation (Birkhoff), solved by ``scipy.optimize.linear_sum_assignment``.
* ``flow``       anything else: successive shortest paths on integer-lifted
  weights (see ``_flow.transport_ssp``).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from . import _flow
from .dynamics import TrajectoryRecord, self_field
from .measures import PhaseEnsemble, SpatialEnsemble, first_marginal
from .potentials import RadialPotential

__all__ = [
    "DiagnosticsSeries",
    "RateFit",
    "FIT_FLOOR",
    "boundary_layer_profile",
    "fit_rate",
    "moment_functional",
    "wasserstein1",
    "wasserstein1_bruteforce",
]

RATIONAL_MAX_DENOMINATOR = 10**12
# power of two: w * LIFT_SCALE is exact in floating point before rounding
LIFT_SCALE = 2**60
FIT_FLOOR = 1e-10
BRUTEFORCE_MAX = 8


def _points(mu, nu):
    if type(mu) is not type(nu):
        raise TypeError("W1 compares spatial with spatial or phase with phase ensembles")
    a, b = mu.points, nu.points
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty ensemble")
    return a, b


def _is_uniform(w):
    return np.all(w == w[0]) or np.allclose(w, 1.0 / len(w), rtol=0, atol=1e-15)


def _w1_quantile(a, wa, b, wb):
    """Integral of |F_a - F_b| over the line, merged over all breakpoints."""
    pts = np.concatenate([a, b])
    mass = np.concatenate([wa, -wb])
    order = np.argsort(pts, kind="stable")
    pts, mass = pts[order], mass[order]
    cdf_diff = np.cumsum(mass)[:-1]
    return float(np.abs(cdf_diff) @ np.diff(pts))


def _lift(wa, wb):
    """Integer supplies/demands with a common total.

    Weights that are exact small rationals (1/3, k/1000, ...) are lifted
    without error; otherwise they are rounded on a 2^-60 grid (finer than
    1e-12) and the rounding residue is put on the largest entry.
    """
    fr = [Fraction(float(x)).limit_denominator(10**6) for x in np.concatenate([wa, wb])]
    if all(abs(float(f) - x) <= 1e-15 for f, x in zip(fr, np.concatenate([wa, wb]))):
        L = math.lcm(*(f.denominator for f in fr))
        fa, fb = fr[: len(wa)], fr[len(wa):]
        if L <= RATIONAL_MAX_DENOMINATOR and sum(fa) == 1 and sum(fb) == 1:
            return (np.array([int(f * L) for f in fa], dtype=np.int64),
                    np.array([int(f * L) for f in fb], dtype=np.int64), L)

    def grid(w):
        ints = np.rint(np.asarray(w) * LIFT_SCALE).astype(np.int64)
        ints[int(np.argmax(ints))] += LIFT_SCALE - int(ints.sum())
        return ints

    return grid(wa), grid(wb), LIFT_SCALE


def _w1_flow(a, wa, b, wb):
    cost = cdist(a, b)
    sa, sb, total = _lift(wa, wb)
    flow = _flow.transport_ssp(cost, sa, sb)
    nz = np.nonzero(flow)
    return math.fsum(flow[nz] * cost[nz]) / total


def wasserstein1(mu, nu, method: str = "auto") -> float:
    """Exact W1 with Euclidean ground cost.

    Phase ensembles are compared as point clouds in R^{2d} with the plain
    Euclidean norm on (x, v).
    """
    a, b = _points(mu, nu)
    if method == "auto":
        if a.shape[1] == 1:
            method = "quantile"
        elif len(a) == len(b) and _is_uniform(mu.w) and _is_uniform(nu.w):
            method = "assignment"
        else:
            method = "flow"
    if method == "quantile":
        if a.shape[1] != 1:
            raise ValueError("quantile coupling needs 1-D atoms")
        return _w1_quantile(a[:, 0], mu.w, b[:, 0], nu.w)
    if method == "assignment":
        if len(a) != len(b) or not (_is_uniform(mu.w) and _is_uniform(nu.w)):
            raise ValueError("assignment needs equal atom counts and uniform weights")
        cost = cdist(a, b)
        rows, cols = linear_sum_assignment(cost)
        return math.fsum(cost[rows, cols]) / len(a)
    if method == "flow":
        return _w1_flow(a, mu.w, b, nu.w)
    raise ValueError(f"unknown method {method!r}")


def wasserstein1_bruteforce(mu, nu) -> float:
    """Minimum over all permutations of the mean matched distance (test oracle)."""
    a, b = _points(mu, nu)
    n = len(a)
    if len(b) != n:
        raise ValueError("brute force needs equal atom counts")
    if n > BRUTEFORCE_MAX:
        raise ValueError(f"brute force limited to N <= {BRUTEFORCE_MAX}, got {n}")
    if not (_is_uniform(mu.w) and _is_uniform(nu.w)):
        raise ValueError("brute force needs uniform weights")
    best = math.inf
    for perm in itertools.permutations(range(n)):
        total = math.fsum(math.dist(a[i], b[j]) for i, j in enumerate(perm))
        best = min(best, total)
    return best / n


def moment_functional(f: PhaseEnsemble, p: RadialPotential, field_values=None) -> float:
    """I = sum_i w_i |v_i + (grad K * rho)(x_i)|, rho the first marginal of f.

    ``field_values`` may pass a precomputed E = -grad K * rho at the atoms.
    """
    E = self_field(first_marginal(f), p) if field_values is None else field_values
    return float(f.w @ np.linalg.norm(f.v - E, axis=1))


class RateFit(NamedTuple):
    slope: float
    constant: float
    residual: float
    n_points: int


def fit_rate(pairs) -> RateFit:
    """Least squares of log(value) on log(epsilon).

    Returns the slope (empirical order), exp(intercept) (empirical constant)
    and the largest absolute log-residual.  Values below ``FIT_FLOOR`` are
    dropped as floating-point noise before fitting.
    """
    pairs = [(float(e), float(v)) for e, v in pairs]
    bad = [(e, v) for e, v in pairs if not (e > 0 and v > 0) or not (math.isfinite(e) and math.isfinite(v))]
    if bad:
        raise ValueError(f"rate fit needs positive finite (epsilon, value) pairs; log undefined for {bad}")
    kept = [(e, v) for e, v in pairs if v >= FIT_FLOOR]
    if len(kept) < 3:
        raise ValueError(f"insufficient points: rate fit needs >= 3 pairs above {FIT_FLOOR}, got {len(kept)}")
    le = np.log([e for e, _ in kept])
    lv = np.log([v for _, v in kept])
    slope, intercept = np.polyfit(le, lv, 1)
    resid = np.abs(lv - (slope * le + intercept)).max()
    return RateFit(float(slope), float(math.exp(intercept)), float(resid), len(kept))


def boundary_layer_profile(record_eps: TrajectoryRecord, reference: TrajectoryRecord,
                           p: RadialPotential, atoms=None, tol: float = 1e-9):
    """Velocity defect |v_eps,i(t) - v_i(t)|, v_i(t) = -(grad K * rho)(x_i(t)) on the reference.

    Snapshot times of the two records are matched to ``tol``; times present in
    only one of them are skipped.  Returns ``(times, defects)`` with
    ``defects`` of shape (n_times, n_tracked).
    """
    n_eps = record_eps.states[0].n
    n_ref = reference.states[0].n
    if n_eps != n_ref:
        raise ValueError(f"atom-count mismatch: {n_eps} vs {n_ref}")
    idx = np.arange(n_eps) if atoms is None else np.asarray(atoms)
    times, rows = [], []
    for k, t in enumerate(record_eps.times):
        j = int(np.argmin(np.abs(reference.times - t)))
        if abs(reference.times[j] - t) > tol:
            continue
        rho = reference.states[j]
        E = reference.fields[j] if reference.fields is not None else self_field(rho, p)
        f = record_eps.states[k]
        rows.append(np.linalg.norm(f.v[idx] - E[idx], axis=1))
        times.append(t)
    return np.array(times), np.array(rows)


@dataclass
class DiagnosticsSeries:
    """Per-snapshot diagnostics of one run.

    ``support`` is the radius of the spatial marginal.  ``w1`` is the W1
    distance of the spatial marginal to the reference run (NaN where not
    computed).  ``phase_w1`` is the phase-space W1 to the monokinetic
    projection of the reference, ``traj_err`` the largest atom-wise distance
    to the reference positions.
    """

    times: np.ndarray
    I: np.ndarray
    support: np.ndarray
    w1: np.ndarray
    momentum: np.ndarray
    phase_w1: np.ndarray | None = None
    traj_err: np.ndarray | None = None
    epsilon: float | None = None
    fitted: dict = field(default_factory=dict)

    CSV_COLUMNS = ("t", "I", "support", "w1", "momentum")

    def columns(self) -> dict:
        out = {"t": self.times, "I": self.I, "support": self.support, "w1": self.w1,
               "momentum": self.momentum}
        if self.phase_w1 is not None:
            out["phase_w1"] = self.phase_w1
        if self.traj_err is not None:
            out["traj_err"] = self.traj_err
        return out

    def to_csv(self, path) -> None:
        cols = [self.times, self.I, self.support, self.w1, self.momentum]
        with open(path, "w") as fh:
            fh.write(",".join(self.CSV_COLUMNS) + "\n")
            for row in zip(*cols):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "DiagnosticsSeries":
        data = np.genfromtxt(path, delimiter=",", names=True)
        data = np.atleast_1d(data)
        return cls(data["t"], data["I"], data["support"], data["w1"], data["momentum"])
