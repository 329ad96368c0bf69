"""Two atoms under a quadratic attraction: the smallest zero-inertia example.

Each atom obeys eps x'' + x' + x = c with c the (fixed) center of mass, so the
first-order limit x' = c - x is solved in closed form.  We integrate the
second-order system numerically and watch the gap to that limit shrink like eps.
"""
# %%
import math

import numpy as np

from zeroinertia import (
    PhaseEnsemble, RadialPotential, SimConfig, fit_rate, linear_closed_form, simulate_second_order,
)

potential = RadialPotential.quadratic_with_cutoff()
x0 = np.array([[1.0, 0.5], [-1.0, -0.5]])
v0 = np.zeros_like(x0)
print(f"potential: {potential.kind}, cutoff radius {potential.params['cutoff']}")

# %% The first-order limit decays to the center of mass like exp(-t).
horizon = 2.0
limit = x0 * math.exp(-horizon)
print("limit positions at t=2:\n", limit)

# %% Sweep eps and record the worst deviation along the trajectory.
errors = []
for eps in (0.1, 0.05, 0.025, 0.0125, 0.00625):
    cfg = SimConfig(potential, epsilon=eps, horizon=horizon, step=2.5e-4, snapshot_interval=0.01)
    rec = simulate_second_order(PhaseEnsemble.uniform(x0, v0), cfg)
    gap = max(float(np.abs(f.x - x0 * math.exp(-t)).max()) for t, f in zip(rec.times, rec.states))
    # the stepper tracks the exact second-order solution up to its O(h) step error
    x_exact, _ = linear_closed_form(x0[0, 0], v0[0, 0], eps, rec.times, c=0.0)
    drift = float(np.abs(np.array([f.x[0, 0] for f in rec.states]) - x_exact).max())
    errors.append((eps, gap))
    print(f"eps={eps:<8g} sup_t |x_eps - x| = {gap:.3e}   stepper vs closed form {drift:.1e}")

# %% A log-log fit recovers the linear rate.
fit = fit_rate(errors)
print(f"fitted rate: error ~ {fit.constant:.3f} * eps^{fit.slope:.3f}")
