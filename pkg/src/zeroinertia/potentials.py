"""Radial interaction potentials with bounded, Lipschitz gradients.

Four kinds are provided::

    gaussian_attractive    K = -A exp(-r^2 / 2 s^2)
    gaussian_pair          K = -Ca exp(-r^2 / 2 la^2) + Cr exp(-r^2 / 2 lr^2)
    smoothed_morse         K = -Ca exp(-q / la) + Cr exp(-q / lr),  q = sqrt(r^2 + delta^2)
    quadratic_with_cutoff  K = r^2 / 2 for r <= R1, quintic blend of K' on
                           [R1, R1 + width] to a constant slope R1 + width / 2

All of them satisfy grad K in W^{1,inf}: the gradient is bounded and globally
Lipschitz.  A pure quadratic (width 0) is rejected.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import minimize_scalar

from . import _kernels

__all__ = [
    "DomainError",
    "InvalidParameterError",
    "RadialPotential",
    "evaluate_kernel",
    "gradient_bounds",
]

_KINDS = {
    "gaussian_attractive": (_kernels.GAUSSIAN_ATTRACTIVE, ("amplitude", "length")),
    "gaussian_pair": (
        _kernels.GAUSSIAN_PAIR,
        ("attraction", "attraction_length", "repulsion", "repulsion_length"),
    ),
    "smoothed_morse": (
        _kernels.SMOOTHED_MORSE,
        ("attraction", "attraction_length", "repulsion", "repulsion_length", "smoothing"),
    ),
    "quadratic_with_cutoff": (_kernels.QUADRATIC_WITH_CUTOFF, ("cutoff", "blend_width")),
}

_DEFAULTS = {
    "gaussian_attractive": {"amplitude": 1.0, "length": 1.0},
    "gaussian_pair": {
        "attraction": 1.0,
        "attraction_length": 1.0,
        "repulsion": 0.6,
        "repulsion_length": 0.5,
    },
    "smoothed_morse": {
        "attraction": 1.0,
        "attraction_length": 1.0,
        "repulsion": 0.5,
        "repulsion_length": 0.5,
        "smoothing": 0.25,
    },
    "quadratic_with_cutoff": {"cutoff": 5.0, "blend_width": 1.0},
}

_SMOOTHSTEP = Polynomial([0.0, 0.0, 0.0, 10.0, -15.0, 6.0])


class DomainError(ValueError):
    """Raised for non-finite or malformed evaluation points."""


class InvalidParameterError(ValueError):
    """Raised when a potential's parameters make it inadmissible."""


@dataclass(frozen=True)
class RadialPotential:
    """An admissible radial kernel K.

    ``params`` holds the named amplitudes and length scales of ``kind``;
    missing names take the defaults listed in ``_DEFAULTS``.  ``dim`` is
    optional and, when set, is enforced on evaluation points.

    Bounds (``sup |grad K|`` and the Lipschitz constant of ``grad K``) are
    computed once at construction.
    """

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    dim: int | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidParameterError(
                f"unknown potential kind {self.kind!r}; expected one of {sorted(_KINDS)}"
            )
        names = _KINDS[self.kind][1]
        unknown = set(self.params) - set(names)
        if unknown:
            raise InvalidParameterError(f"{self.kind}: unknown parameters {sorted(unknown)}")
        merged = dict(_DEFAULTS[self.kind])
        merged.update({k: float(v) for k, v in self.params.items()})
        for k, v in merged.items():
            if not np.isfinite(v):
                raise InvalidParameterError(f"{self.kind}: parameter {k} is not finite")
        _check_params(self.kind, merged)
        if self.dim is not None and int(self.dim) < 1:
            raise InvalidParameterError("dim must be a positive integer")
        object.__setattr__(self, "params", merged)
        object.__setattr__(self, "_code", _KINDS[self.kind][0])
        object.__setattr__(self, "_packed", self._pack(merged))
        object.__setattr__(self, "_bounds", self._compute_bounds())

    # constructors -------------------------------------------------------
    @classmethod
    def gaussian_attractive(cls, amplitude=1.0, length=1.0, dim=None):
        return cls("gaussian_attractive", {"amplitude": amplitude, "length": length}, dim)

    @classmethod
    def gaussian_pair(cls, attraction=1.0, attraction_length=1.0, repulsion=0.6,
                      repulsion_length=0.5, dim=None):
        return cls("gaussian_pair", {
            "attraction": attraction, "attraction_length": attraction_length,
            "repulsion": repulsion, "repulsion_length": repulsion_length,
        }, dim)

    @classmethod
    def smoothed_morse(cls, attraction=1.0, attraction_length=1.0, repulsion=0.5,
                       repulsion_length=0.5, smoothing=0.25, dim=None):
        return cls("smoothed_morse", {
            "attraction": attraction, "attraction_length": attraction_length,
            "repulsion": repulsion, "repulsion_length": repulsion_length,
            "smoothing": smoothing,
        }, dim)

    @classmethod
    def quadratic_with_cutoff(cls, cutoff=5.0, blend_width=1.0, dim=None):
        return cls("quadratic_with_cutoff", {"cutoff": cutoff, "blend_width": blend_width}, dim)

    # serialization --------------------------------------------------------
    def to_mapping(self) -> dict:
        """Flat key/value form, e.g. ``{"kind": "gaussian_pair", "attraction": 1.0, ...}``."""
        out = {"kind": self.kind}
        out.update(self.params)
        return out

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object], dim=None) -> "RadialPotential":
        items = dict(mapping)
        try:
            kind = str(items.pop("kind"))
        except KeyError:
            raise InvalidParameterError("potential block needs a 'kind' entry") from None
        try:
            params = {k: float(v) for k, v in items.items()}
        except (TypeError, ValueError) as exc:
            raise InvalidParameterError(f"non-numeric potential parameter: {exc}") from None
        return cls(kind, params, dim)

    # kernel access ----------------------------------------------------------
    @property
    def code(self) -> int:
        return self._code

    @property
    def packed(self) -> np.ndarray:
        """Parameter vector in the layout expected by the compiled kernels."""
        return self._packed

    @property
    def length_scale(self) -> float:
        p = self.params
        if self.kind == "gaussian_attractive":
            return p["length"]
        if self.kind == "quadratic_with_cutoff":
            return p["cutoff"]
        return max(p["attraction_length"], p["repulsion_length"])

    def gradient_bound(self) -> float:
        return self._bounds[0]

    def lipschitz_bound(self) -> float:
        return self._bounds[1]

    def _pack(self, p):
        k = self.kind
        if k == "gaussian_attractive":
            vals = [p["amplitude"], p["length"]]
        elif k == "gaussian_pair":
            vals = [p["attraction"], p["attraction_length"], p["repulsion"], p["repulsion_length"]]
        elif k == "smoothed_morse":
            vals = [p["attraction"], p["attraction_length"], p["repulsion"],
                    p["repulsion_length"], p["smoothing"]]
        else:
            vals = [p["cutoff"], p["blend_width"], p["cutoff"] + 0.5 * p["blend_width"]]
        out = np.zeros(6)
        out[: len(vals)] = vals
        out.setflags(write=False)
        return out

    # radial profiles (vectorized, r >= 0) ------------------------------------
    def potential_r(self, r):
        """K as a function of the radius."""
        r = np.asarray(r, dtype=float)
        p = self.params
        k = self.kind
        if k == "gaussian_attractive":
            return -p["amplitude"] * np.exp(-0.5 * (r / p["length"]) ** 2)
        if k == "gaussian_pair":
            return (-p["attraction"] * np.exp(-0.5 * (r / p["attraction_length"]) ** 2)
                    + p["repulsion"] * np.exp(-0.5 * (r / p["repulsion_length"]) ** 2))
        if k == "smoothed_morse":
            q = np.sqrt(r * r + p["smoothing"] ** 2)
            return (-p["attraction"] * np.exp(-q / p["attraction_length"])
                    + p["repulsion"] * np.exp(-q / p["repulsion_length"]))
        R1, width = p["cutoff"], p["blend_width"]
        tail = R1 + 0.5 * width
        # K on the blend, as a polynomial in u = (r - R1) / width
        t = Polynomial([0.0, 1.0])
        slope = R1 + width * t + (tail - R1 - width * t) * _SMOOTHSTEP
        blend = 0.5 * R1 * R1 + width * slope.integ()
        u = np.clip((r - R1) / width, 0.0, 1.0)
        end = blend(1.0)
        return np.where(r <= R1, 0.5 * r * r,
                        np.where(r >= R1 + width, end + tail * (r - R1 - width), blend(u)))

    def dK_r(self, r):
        """K'(r); |grad K(x)| = |K'(|x|)|."""
        r = np.asarray(r, dtype=float)
        phi = np.vectorize(lambda s: _kernels.radial_profile(self._code, self._packed, s))(r * r)
        return phi * r

    def d2K_r(self, r):
        """K''(r), the radial eigenvalue of the Hessian."""
        r = np.asarray(r, dtype=float)
        p = self.params
        k = self.kind
        if k == "gaussian_attractive":
            A, s = p["amplitude"], p["length"]
            return A / s**2 * (1 - (r / s) ** 2) * np.exp(-0.5 * (r / s) ** 2)
        if k == "gaussian_pair":
            Ca, la, Cr, lr = (p["attraction"], p["attraction_length"],
                              p["repulsion"], p["repulsion_length"])
            return (Ca / la**2 * (1 - (r / la) ** 2) * np.exp(-0.5 * (r / la) ** 2)
                    - Cr / lr**2 * (1 - (r / lr) ** 2) * np.exp(-0.5 * (r / lr) ** 2))
        if k == "smoothed_morse":
            Ca, la, Cr, lr, dl = (p["attraction"], p["attraction_length"], p["repulsion"],
                                  p["repulsion_length"], p["smoothing"])
            q = np.sqrt(r * r + dl * dl)
            g = Ca / la * np.exp(-q / la) - Cr / lr * np.exp(-q / lr)
            dg = -Ca / la**2 * np.exp(-q / la) + Cr / lr**2 * np.exp(-q / lr)
            phi = g / q
            dphi = (dg / q - g / q**2) * r / q
            return phi + r * dphi
        R1, width = p["cutoff"], p["blend_width"]
        tail = R1 + 0.5 * width
        u = np.clip((r - R1) / width, 0.0, 1.0)
        S = _SMOOTHSTEP(u)
        dS = _SMOOTHSTEP.deriv()(u)
        inner = (1 - S) + (tail - r) * dS / width
        return np.where(r <= R1, 1.0, np.where(r >= R1 + width, 0.0, inner))

    # bounds ---------------------------------------------------------------------
    def _compute_bounds(self):
        p = self.params
        if self.kind == "gaussian_attractive":
            A, s = abs(p["amplitude"]), p["length"]
            return (float(A / s * np.exp(-0.5)), float(A / s**2))
        if self.kind == "quadratic_with_cutoff":
            r_max = p["cutoff"] + p["blend_width"]
        elif self.kind == "gaussian_pair":
            r_max = 12.0 * self.length_scale
        else:
            r_max = p["smoothing"] + 60.0 * self.length_scale
        grad = _radial_sup(lambda r: np.abs(self.dK_r(r)), r_max)

        def lip(r):
            r = np.asarray(r, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                tangential = np.abs(np.vectorize(
                    lambda s: _kernels.radial_profile(self._code, self._packed, s))(r * r))
            return np.maximum(np.abs(self.d2K_r(r)), tangential)

        return (grad, _radial_sup(lip, r_max))


def _check_params(kind, p):
    if kind == "gaussian_attractive":
        if p["length"] <= 0:
            raise InvalidParameterError("gaussian_attractive: length must be > 0")
    elif kind in ("gaussian_pair", "smoothed_morse"):
        if p["attraction_length"] <= 0 or p["repulsion_length"] <= 0:
            raise InvalidParameterError(f"{kind}: length scales must be > 0")
        if kind == "smoothed_morse" and p["smoothing"] <= 0:
            raise InvalidParameterError("smoothed_morse: smoothing must be > 0 (pointy otherwise)")
    else:
        if p["blend_width"] <= 0:
            raise InvalidParameterError(
                "quadratic_with_cutoff: blend_width must be > 0; "
                "an uncut quadratic has an unbounded gradient"
            )
        if p["cutoff"] < 0:
            raise InvalidParameterError("quadratic_with_cutoff: cutoff must be >= 0")


def _radial_sup(fun, r_max, n_grid=4001):
    """Maximum of a nonnegative radial function on [0, r_max], grid then golden refine."""
    r = np.linspace(0.0, r_max, n_grid)
    vals = fun(r)
    best = float(vals.max())
    dr = r[1] - r[0]
    # refine around the few largest grid values
    for idx in np.argsort(vals)[-3:]:
        lo, hi = max(r[idx] - dr, 0.0), min(r[idx] + dr, r_max)
        res = minimize_scalar(lambda s: -float(fun(np.array([s]))[0]), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return best


def _as_point(p: RadialPotential, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DomainError(f"expected a single point, got shape {x.shape}")
    if p.dim is not None and x.shape[0] != p.dim:
        raise DomainError(f"point has dimension {x.shape[0]}, potential expects {p.dim}")
    if not np.all(np.isfinite(x)):
        raise DomainError("evaluation point must be finite")
    return x


def evaluate_kernel(p: RadialPotential, x) -> tuple[float, np.ndarray]:
    """Return ``(K(x), grad K(x))`` at a single point."""
    x = _as_point(p, x)
    r2 = float(x @ x)
    phi = _kernels.radial_profile(p.code, p.packed, r2)
    return float(p.potential_r(np.sqrt(r2))), phi * x


def gradient_bounds(p: RadialPotential) -> tuple[float, float]:
    """``(sup |grad K|, Lipschitz constant of grad K)``."""
    return p.gradient_bound(), p.lipschitz_bound()
