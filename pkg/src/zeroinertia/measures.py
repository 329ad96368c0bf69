"""Weighted atom ensembles standing in for measures in P_1.

A :class:`PhaseEnsemble` is a probability measure on R^d x R^d given by atoms
``(x_i, v_i)`` with weights ``w_i``; a :class:`SpatialEnsemble` is the same on
R^d.  Arrays are copied on construction and made read-only, so ensembles
behave as values.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate, special

__all__ = [
    "MollifierSpec",
    "PhaseEnsemble",
    "SpatialEnsemble",
    "ensemble_statistics",
    "first_marginal",
    "mollify_ensemble",
    "read_ensemble_csv",
    "support_radius",
    "write_ensemble_csv",
]

WEIGHT_TOL = 1e-12


def _frozen(a, ndim, name):
    a = np.array(a, dtype=float)
    if a.ndim == ndim - 1 and ndim == 2:
        a = a[:, None]
    if a.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    a.setflags(write=False)
    return a


def _check_weights(w, n):
    if w.shape != (n,):
        raise ValueError(f"expected {n} weights, got shape {w.shape}")
    if n < 1:
        raise ValueError("an ensemble needs at least one atom")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
        raise ValueError(f"weights sum to {math.fsum(w)!r}, not 1")


@dataclass(frozen=True, eq=False)
class SpatialEnsemble:
    x: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        x = _frozen(self.x, 2, "x")
        w = _frozen(self.w, 1, "w")
        _check_weights(w, x.shape[0])
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "w", w)

    @classmethod
    def uniform(cls, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        return cls(x, np.full(x.shape[0], 1.0 / x.shape[0]))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def points(self) -> np.ndarray:
        return self.x


@dataclass(frozen=True, eq=False)
class PhaseEnsemble:
    x: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        x = _frozen(self.x, 2, "x")
        v = _frozen(self.v, 2, "v")
        w = _frozen(self.w, 1, "w")
        if v.shape != x.shape:
            raise ValueError(f"x and v shapes differ: {x.shape} vs {v.shape}")
        _check_weights(w, x.shape[0])
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)

    @classmethod
    def uniform(cls, x, v):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        return cls(x, v, np.full(x.shape[0], 1.0 / x.shape[0]))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def points(self) -> np.ndarray:
        """Atoms as points of R^{2d}."""
        return np.hstack([self.x, self.v])


def first_marginal(f: PhaseEnsemble) -> SpatialEnsemble:
    return SpatialEnsemble(f.x, f.w)


def support_radius(f: PhaseEnsemble | SpatialEnsemble) -> float:
    """Largest Euclidean norm over stored atoms, zero-weight atoms included."""
    return float(np.sqrt((f.points**2).sum(axis=1)).max())


def ensemble_statistics(f: PhaseEnsemble):
    """Return ``(center of mass, total momentum, first v-moment)``."""
    com = f.w @ f.x
    momentum = f.w @ f.v
    vmoment = float(f.w @ np.linalg.norm(f.v, axis=1))
    return com, momentum, vmoment


# -- mollification ----------------------------------------------------------------

def _bump(r2):
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(r2 < 1.0, np.exp(-1.0 / (1.0 - np.minimum(r2, 1.0))), 0.0)


_TRUNCATED_GAUSSIAN_SCALE = 0.5


@dataclass(frozen=True)
class MollifierSpec:
    """Scale index ``n`` and a base density supported on the unit ball of R^{2d}.

    ``eta_n(z) = n^{2d} eta_1(n z)``.  ``n = math.inf`` is accepted as the
    zero-width limit (identity).  ``base`` is ``"bump"`` (the C^inf bump
    ``c exp(-1/(1-|z|^2))``) or ``"truncated_gaussian"``.
    """

    n: float
    dim: int
    base: str = "bump"

    def __post_init__(self):
        if not (self.n == math.inf or (float(self.n).is_integer() and self.n >= 1)):
            raise ValueError(f"mollifier index must be a positive integer or inf, got {self.n}")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.base not in ("bump", "truncated_gaussian"):
            raise ValueError(f"unknown mollifier base {self.base!r}")
        object.__setattr__(self, "_norm", self._normalizer())
        mass, vmoment = self._check_moments()
        if abs(mass - 1.0) > 1e-8 or vmoment > 1.0:
            raise ValueError(f"base mollifier fails normalization (mass={mass}, v-moment={vmoment})")

    @property
    def ambient_dim(self) -> int:
        return 2 * self.dim

    def _profile(self, r):
        if self.base == "bump":
            return _bump(r * r)
        return np.where(r < 1.0, np.exp(-0.5 * (r / _TRUNCATED_GAUSSIAN_SCALE) ** 2), 0.0)

    def _normalizer(self):
        D = self.ambient_dim
        sphere = 2 * math.pi ** (D / 2) / special.gamma(D / 2)
        val, _ = integrate.quad(lambda r: float(self._profile(np.array(r))) * r ** (D - 1), 0, 1)
        return 1.0 / (sphere * val)

    def density(self, z):
        """Base density eta_1 at points ``z`` of shape (..., 2d)."""
        z = np.asarray(z, dtype=float)
        return self._norm * self._profile(np.linalg.norm(z, axis=-1))

    def _check_moments(self, n_samples=4000):
        D = self.ambient_dim
        sphere = 2 * math.pi ** (D / 2) / special.gamma(D / 2)
        mass, _ = integrate.quad(
            lambda r: self._norm * float(self._profile(np.array(r))) * sphere * r ** (D - 1), 0, 1)
        # first moment of the v-block, Monte Carlo on the base itself
        z = self.sample(np.random.default_rng(12345), n_samples)
        vmoment = float(np.linalg.norm(z[:, self.dim:], axis=1).mean())
        return mass, vmoment

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` points from eta_1 by rejection from the uniform ball."""
        D = self.ambient_dim
        peak = float(self._profile(np.array(0.0)))
        out = np.empty((size, D))
        filled = 0
        while filled < size:
            m = 2 * (size - filled) + 16
            g = rng.standard_normal((m, D))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            r = rng.random(m) ** (1.0 / D)
            accept = rng.random(m) * peak < self._profile(r)
            z = (g * r[:, None])[accept][: size - filled]
            out[filled:filled + len(z)] = z
            filled += len(z)
        return out


def mollify_ensemble(f: PhaseEnsemble, m: MollifierSpec, seed) -> PhaseEnsemble:
    """Jitter every atom by an independent draw from eta_n.

    This samples f * eta_n atom by atom: each joint displacement lies in the
    ball of radius 1/n, so W_1 to the input and the growth of the support are
    both at most 1/n.  Weights are untouched.
    """
    if m.dim != f.dim:
        raise ValueError(f"mollifier dim {m.dim} does not match ensemble dim {f.dim}")
    if m.n == math.inf:
        return PhaseEnsemble(f.x, f.v, f.w)
    rng = np.random.default_rng(seed)
    z = m.sample(rng, f.n) / m.n
    return PhaseEnsemble(f.x + z[:, : f.dim], f.v + z[:, f.dim:], f.w)


# -- CSV ----------------------------------------------------------------------------

def write_ensemble_csv(f: PhaseEnsemble | SpatialEnsemble, path) -> None:
    """Header ``w,x1..xd[,v1..vd]``; values written with ``repr`` so they round-trip."""
    d = f.dim
    header = ["w"] + [f"x{k + 1}" for k in range(d)]
    cols = [f.w[:, None], f.x]
    if isinstance(f, PhaseEnsemble):
        header += [f"v{k + 1}" for k in range(d)]
        cols.append(f.v)
    data = np.hstack(cols)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in data:
            writer.writerow([repr(float(val)) for val in row])


def read_ensemble_csv(path) -> PhaseEnsemble | SpatialEnsemble:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    if not header or header[0] != "w":
        raise ValueError(f"{path}: header must start with 'w'")
    xs = [h for h in header if h.startswith("x")]
    vs = [h for h in header if h.startswith("v")]
    d = len(xs)
    expected = ["w"] + [f"x{k + 1}" for k in range(d)] + ([f"v{k + 1}" for k in range(d)] if vs else [])
    if header != expected:
        raise ValueError(f"{path}: unexpected header {header}")
    if not rows:
        raise ValueError(f"{path}: no atoms")
    data = np.array([[float(c) for c in r] for r in rows])
    w, x = data[:, 0], data[:, 1:1 + d]
    if vs:
        return PhaseEnsemble(x, data[:, 1 + d:], w)
    return SpatialEnsemble(x, w)
