"""Initial data for the named scenarios."""
from __future__ import annotations

import numpy as np

from ..dynamics import self_field
from ..measures import PhaseEnsemble, SpatialEnsemble, read_ensemble_csv
from ..potentials import RadialPotential
from .config import ExperimentSpec, SpecError

__all__ = ["build_initial", "default_potential", "two_atom_positions"]


def default_potential(scenario: str) -> RadialPotential:
    if scenario == "two_atom_quadratic":
        return RadialPotential.quadratic_with_cutoff(cutoff=5.0, blend_width=1.0)
    if scenario == "ring_2d":
        return RadialPotential.gaussian_pair()
    return RadialPotential.gaussian_attractive(amplitude=1.0, length=1.0)


def two_atom_positions(dim: int) -> np.ndarray:
    # separation sqrt(5) ~ 2.24, well inside the default cutoff of 5
    base = np.array([1.0, 0.5, 0.25])
    x = np.zeros((2, dim))
    k = min(dim, 3)
    x[0, :k] = base[:k]
    x[1, :k] = -base[:k]
    return x


def build_initial(spec: ExperimentSpec) -> tuple[PhaseEnsemble, RadialPotential]:
    """Initial phase ensemble and potential, deterministic in ``spec.seed``."""
    p = spec.potential or default_potential(spec.scenario)
    rng = np.random.default_rng(spec.seed)
    if spec.scenario == "two_atom_quadratic":
        rho = SpatialEnsemble.uniform(two_atom_positions(spec.dim))
    elif spec.scenario == "gaussian_blob":
        rho = SpatialEnsemble.uniform(spec.blob_scale * rng.standard_normal((spec.n_atoms, spec.dim)))
    elif spec.scenario == "ring_2d":
        theta = rng.uniform(0.0, 2 * np.pi, spec.n_atoms)
        r = spec.ring_radius * (1.0 + 0.05 * rng.standard_normal(spec.n_atoms))
        rho = SpatialEnsemble.uniform(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
    else:
        try:
            loaded = read_ensemble_csv(spec.input_csv)
        except OSError as exc:
            raise SpecError(f"cannot read {spec.input_csv}: {exc.strerror}") from None
        if loaded.dim != spec.dim:
            raise SpecError(f"{spec.input_csv} has dimension {loaded.dim}, spec says {spec.dim}")
        if isinstance(loaded, PhaseEnsemble):
            return loaded, p
        rho = loaded
    E = self_field(rho, p)
    if spec.velocity_init == "matched":
        v = E
    elif spec.velocity_init == "zero":
        v = np.zeros_like(rho.x)
    else:
        v = E + spec.velocity_noise * rng.standard_normal(rho.x.shape)
    return PhaseEnsemble(rho.x, v, rho.w), p
