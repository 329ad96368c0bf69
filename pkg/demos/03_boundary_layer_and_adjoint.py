"""Velocities relax to the field on the fast time scale t ~ eps.

Starting from velocities unrelated to the field, the defect |v - E| decays
within a layer of width eps ln(1/eps).  Freezing positions and rescaling time
(tau = t / eps) gives the adjoined system, whose relaxation is exactly exp(-tau).
"""
# %%
import math

import numpy as np

from zeroinertia import (
    PhaseEnsemble, RadialPotential, SimConfig, SpatialEnsemble, adjoint_relaxation,
    boundary_layer_profile, self_field, simulate_first_order, simulate_second_order,
)

rng = np.random.default_rng(1)
potential = RadialPotential.gaussian_attractive()
x = rng.standard_normal((150, 2))
rho0 = SpatialEnsemble.uniform(x)
v0 = rng.standard_normal((150, 2))
print("initial defect, worst atom:", float(np.linalg.norm(v0 - self_field(rho0, potential), axis=1).max()))

# %% The defect across the layer for a few eps.
for eps in (0.1, 0.025, 0.00625):
    t_star = eps * math.log(1 / eps)
    run = simulate_second_order(PhaseEnsemble.uniform(x, v0),
                                SimConfig(potential, epsilon=eps, horizon=3 * t_star, step=t_star / 50,
                                          snapshot_interval=t_star))
    ref = simulate_first_order(rho0, SimConfig(potential, horizon=3 * t_star, step=t_star / 10,
                                               snapshot_interval=t_star))
    times, defect = boundary_layer_profile(run, ref, potential)
    row = "  ".join(f"t={t / t_star:.0f}t*: {d.max():.2e}" for t, d in zip(times, defect))
    print(f"eps={eps:<8g} {row}")

# %% Adjoined system: the decay ratio is exp(-tau) whatever the configuration.
traj = adjoint_relaxation(rho0, potential, v0, 5.0)
for tau in (1.0, 2.0, 5.0):
    k = int(np.argmin(np.abs(traj.tau - tau)))
    print(f"tau={tau:g}: ratio {traj.decay_ratio()[k]:.12f}  exp(-tau) {math.exp(-tau):.12f}")
