"""Measure-level views of the particle solvers.

For atomic data the push-forward of f0 along the characteristics of the
kinetic equation is exactly the particle system started from the atoms of f0,
so the kinetic solution is obtained by transporting atoms; no phase-space grid
is involved.  The same holds for the macroscopic equation and the first-order
flow.
"""
from __future__ import annotations

from .dynamics import SimConfig, TrajectoryRecord, self_field, simulate_first_order, simulate_second_order
from .measures import PhaseEnsemble, SpatialEnsemble
from .potentials import RadialPotential

__all__ = ["monokinetic_projection", "push_forward_kinetic", "push_forward_macroscopic"]


def push_forward_kinetic(f0: PhaseEnsemble, cfg: SimConfig) -> TrajectoryRecord:
    """f_t = T^{t,eps}_{E[f]} # f0, as phase-space snapshots."""
    return simulate_second_order(f0, cfg)


def push_forward_macroscopic(rho0: SpatialEnsemble, cfg: SimConfig) -> TrajectoryRecord:
    """rho_t = T^t # rho0 along the first-order flow; the eps -> 0 reference."""
    return simulate_first_order(rho0, cfg)


def monokinetic_projection(rho: SpatialEnsemble, p: RadialPotential) -> PhaseEnsemble:
    """Lift rho to rho(x) delta(v + grad K * rho(x))."""
    return PhaseEnsemble(rho.x, self_field(rho, p), rho.w)
