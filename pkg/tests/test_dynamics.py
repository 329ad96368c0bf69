import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zeroinertia import (
    IntegrationError,
    PhaseEnsemble,
    RadialPotential,
    SimConfig,
    SpatialEnsemble,
    TrajectoryRecord,
    adjoint_relaxation,
    evaluate_kernel,
    first_order_velocity,
    interaction_field,
    linear_closed_form,
    self_field,
    simulate_first_order,
    simulate_second_order,
    step_second_order,
    support_radius,
)
from zeroinertia.dynamics import relaxation_rates

GAUSS = RadialPotential.gaussian_attractive()
QUAD = RadialPotential.quadratic_with_cutoff(cutoff=5.0, blend_width=1.0)
ZERO = RadialPotential.gaussian_attractive(amplitude=0.0)


# -- interaction field ---------------------------------------------------------------

def test_field_trivial_cases():
    assert np.array_equal(interaction_field(SpatialEnsemble.uniform([[0.0, 0.0]]), GAUSS, [0.0, 0.0]), [0, 0])
    sym = SpatialEnsemble.uniform([[1.0, 0.5], [-1.0, -0.5]])
    assert np.allclose(interaction_field(sym, GAUSS, [0.0, 0.0]), 0.0, atol=1e-17)


@pytest.mark.parametrize("kind", ["gaussian_attractive", "gaussian_pair", "smoothed_morse", "quadratic_with_cutoff"])
def test_field_matches_double_loop(kind):
    p = RadialPotential(kind)
    rng = np.random.default_rng(8)
    x = rng.normal(scale=1.5, size=(10, 2))
    w = rng.random(10)
    w /= w.sum()
    rho = SpatialEnsemble(x, w)
    E_all = self_field(rho, p)
    for i in range(10):
        oracle = np.array([-math.fsum(w[j] * evaluate_kernel(p, x[i] - x[j])[1][k] for j in range(10))
                           for k in range(2)])
        scale = max(np.abs(oracle).max(), 1e-300)
        assert np.abs(interaction_field(rho, p, x[i]) - oracle).max() <= 1e-14 * scale
        assert np.abs(E_all[i] - oracle).max() <= 1e-14 * scale
    gmax = p.gradient_bound()
    assert np.linalg.norm(E_all, axis=1).max() <= gmax


def test_field_many_points_and_cutoff():
    rng = np.random.default_rng(2)
    rho = SpatialEnsemble.uniform(rng.normal(size=(30, 2)))
    y = rng.normal(size=(5, 2))
    many = interaction_field(rho, GAUSS, y)
    assert np.allclose(many, [interaction_field(rho, GAUSS, yi) for yi in y], rtol=0, atol=0)
    # a cutoff beyond every pair distance changes nothing
    far = interaction_field(rho, GAUSS, y, cutoff=100.0)
    assert np.allclose(far, many, rtol=1e-15, atol=1e-17)
    assert np.allclose(self_field(rho, GAUSS, 100.0**2), self_field(rho, GAUSS), rtol=1e-14, atol=1e-17)


def test_first_order_velocity():
    x = np.array([[0.7, -0.2], [-0.3, 0.4]])
    rho = SpatialEnsemble.uniform(x)
    r = x[0] - x[1]
    assert np.allclose(first_order_velocity(rho, QUAD, 0), -r / 2, rtol=1e-15)
    assert np.allclose(first_order_velocity(rho, QUAD, 0, include_self_term=False), -r / 2, rtol=1e-15)
    coincident = SpatialEnsemble.uniform(np.ones((4, 2)))
    assert np.array_equal(first_order_velocity(coincident, GAUSS, 2), [0.0, 0.0])
    with pytest.raises(IndexError):
        first_order_velocity(rho, QUAD, 2)
    with pytest.raises(ValueError):
        first_order_velocity(SpatialEnsemble([[0.0], [1.0]], [0.25, 0.75]), QUAD, 0, include_self_term=False)


def test_particle_and_convolution_forms_agree():
    rho = SpatialEnsemble.uniform(np.random.default_rng(4).normal(size=(12, 3)))
    for i in range(12):
        a = first_order_velocity(rho, GAUSS, i)
        b = first_order_velocity(rho, GAUSS, i, include_self_term=False)
        assert np.allclose(a, b, rtol=1e-13, atol=1e-16)


def test_velocity_sum_vanishes():
    rho = SpatialEnsemble.uniform(np.random.default_rng(5).normal(size=(50, 2)))
    E = self_field(rho, RadialPotential.gaussian_pair())
    assert np.abs(rho.w @ E).max() < 1e-16


# -- second-order stepper ----------------------------------------------------------------

def test_free_relaxation_step():
    f = PhaseEnsemble([[0.0]], [[1.0]], [1.0])
    g = step_second_order(f, SimConfig(ZERO, epsilon=0.1, step=0.05, horizon=1.0))
    assert g.v[0, 0] == pytest.approx(math.exp(-0.5), rel=1e-15)
    assert g.v[0, 0] == pytest.approx(0.606531, abs=1e-6)
    assert g.x[0, 0] == pytest.approx(0.1 * (1 - math.exp(-0.5)), rel=1e-15)


def test_constant_field_step_exact():
    # a single atom feels no self-field; relative to that E = 0 fixed point the step is exact
    rng = np.random.default_rng(0)
    for _ in range(20):
        x0, v0 = rng.normal(size=(1, 3)), rng.normal(size=(1, 3))
        eps, h = 10 ** rng.uniform(-3, 0), 10 ** rng.uniform(-4, -1)
        g = step_second_order(PhaseEnsemble(x0, v0, [1.0]), SimConfig(GAUSS, epsilon=eps, step=h, horizon=1.0))
        assert np.allclose(g.v, v0 * math.exp(-h / eps), rtol=1e-14, atol=0)
        assert np.allclose(g.x, x0 + eps * v0 * -math.expm1(-h / eps), rtol=1e-14, atol=1e-300)


def test_step_small_ratio_taylor():
    f = PhaseEnsemble([[0.0]], [[2.0]], [1.0])
    for ratio in (1e-2, 1e-3, 1e-4):
        g = step_second_order(f, SimConfig(ZERO, epsilon=1.0, step=ratio, horizon=1.0))
        assert abs(g.v[0, 0] - (2.0 - ratio * 2.0)) <= 2.0 * ratio**2


def test_step_stiff_ratio_is_stable():
    rng = np.random.default_rng(3)
    f = PhaseEnsemble.uniform(rng.normal(size=(20, 2)), 50 * rng.normal(size=(20, 2)))
    g = step_second_order(f, SimConfig(GAUSS, epsilon=1e-12, step=0.1, horizon=1.0))
    E = self_field(SpatialEnsemble(f.x, f.w), GAUSS)
    assert np.all(np.isfinite(g.v)) and np.allclose(g.v, E, rtol=0, atol=1e-15)


def test_step_momentum_factor():
    rng = np.random.default_rng(9)
    f = PhaseEnsemble.uniform(rng.normal(size=(60, 2)), rng.normal(size=(60, 2)))
    h, eps = 0.01, 0.05
    g = step_second_order(f, SimConfig(RadialPotential.smoothed_morse(), epsilon=eps, step=h, horizon=1.0))
    P0 = math.fsum(f.w[i] * f.v[i, 0] for i in range(60)), math.fsum(f.w[i] * f.v[i, 1] for i in range(60))
    P1 = g.w @ g.v
    assert np.allclose(P1, np.array(P0) * math.exp(-h / eps), rtol=1e-10, atol=1e-16)


def test_nonfinite_state_reports_atom():
    f = PhaseEnsemble.uniform([[0.0], [1.0]], [[0.0], [0.0]])
    object.__setattr__(f, "v", np.array([[0.0], [np.nan]]))
    with pytest.raises(IntegrationError) as err:
        step_second_order(f, SimConfig(GAUSS, epsilon=0.1, step=0.01, horizon=1.0))
    assert err.value.atom == 1


# -- trajectories -------------------------------------------------------------------------

def test_single_atom_free_relaxation():
    x0, v0, eps = np.array([[0.3, -1.0]]), np.array([[2.0, 0.5]]), 0.05
    cfg = SimConfig(GAUSS, epsilon=eps, horizon=0.5, step=0.01, snapshot_interval=0.05)
    rec = simulate_second_order(PhaseEnsemble(x0, v0, [1.0]), cfg)
    for t, f in zip(rec.times, rec.states):
        assert np.allclose(f.x, x0 + eps * v0 * -math.expm1(-t / eps), rtol=1e-13, atol=1e-15)
        assert np.allclose(f.v, v0 * math.exp(-t / eps), rtol=1e-12, atol=1e-300)


def test_symmetric_data_stays_symmetric():
    x = np.array([[1.0, 0.3], [-1.0, -0.3]])
    v = np.array([[0.2, -0.5], [-0.2, 0.5]])
    rec = simulate_second_order(PhaseEnsemble.uniform(x, v),
                                SimConfig(RadialPotential.gaussian_pair(), epsilon=0.02, horizon=1.0, step=0.01))
    for f in rec.states:
        assert np.array_equal(f.x[0], -f.x[1]) and np.array_equal(f.v[0], -f.v[1])


def test_snapshot_schedule():
    cfg = SimConfig(GAUSS, epsilon=0.1, horizon=1.0, step=0.03, snapshot_interval=0.09)
    rec = simulate_second_order(PhaseEnsemble.uniform([[0.0]], [[1.0]]), cfg)
    assert rec.times[0] == 0.0 and rec.times[-1] == pytest.approx(1.0, abs=1e-15)
    assert np.all(np.diff(rec.times) > 0)
    assert len(rec.fields) == len(rec.times)
    assert rec.index_of(0.09) == 1
    with pytest.raises(KeyError):
        rec.index_of(0.1)


def test_record_validation():
    s = SpatialEnsemble.uniform([[0.0]])
    with pytest.raises(ValueError):
        TrajectoryRecord([0.0, 0.0], [s, s])
    with pytest.raises(ValueError):
        TrajectoryRecord([0.1], [s])


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(GAUSS, step=2.0, horizon=1.0)
    with pytest.raises(ValueError):
        SimConfig(GAUSS, epsilon=0.0)
    with pytest.raises(ValueError):
        SimConfig(GAUSS, substeps=0)


def test_support_envelope_over_eps():
    rng = np.random.default_rng(12)
    x = rng.normal(size=(80, 2))
    v = rng.normal(size=(80, 2))
    f0 = PhaseEnsemble.uniform(x, v)
    T = 1.0
    vb = max(np.linalg.norm(v, axis=1).max(), GAUSS.gradient_bound())
    envelope = support_radius(SpatialEnsemble.uniform(x)) + vb * T
    for eps in (0.1, 0.01, 0.001):
        rec = simulate_second_order(f0, SimConfig(GAUSS, epsilon=eps, horizon=T, step=1e-3, snapshot_interval=0.05))
        assert max(support_radius(SpatialEnsemble(f.x, f.w)) for f in rec.states) <= envelope


def test_substeps_refine():
    rng = np.random.default_rng(1)
    f0 = PhaseEnsemble.uniform(rng.normal(size=(20, 2)), rng.normal(size=(20, 2)))
    fine = simulate_second_order(f0, SimConfig(GAUSS, epsilon=0.05, horizon=0.5, step=1e-4)).final
    errs = [np.abs(simulate_second_order(f0, SimConfig(GAUSS, epsilon=0.05, horizon=0.5, step=0.01,
                                                       substeps=s)).final.x - fine.x).max()
            for s in (1, 4)]
    assert errs[1] < errs[0] / 2


# -- first order --------------------------------------------------------------------------

def test_first_order_two_atom_closed_form():
    x = np.array([[0.8, 0.1], [-0.4, 0.3]])
    rec = simulate_first_order(SpatialEnsemble.uniform(x), SimConfig(QUAD, horizon=1.0, step=1e-3))
    r0 = np.linalg.norm(x[0] - x[1])
    r1 = np.linalg.norm(rec.final.x[0] - rec.final.x[1])
    assert r1 == pytest.approx(r0 * math.exp(-1.0), rel=1e-6)
    # the relative coordinate keeps its direction: contraction toward the fixed center
    com = x.mean(axis=0)
    assert np.allclose(rec.final.x, com + (x - com) * math.exp(-1.0), rtol=1e-10)


def _rk4_error(h):
    x = np.array([[1.0, 0.5], [-1.0, -0.5]])
    rec = simulate_first_order(SpatialEnsemble.uniform(x), SimConfig(QUAD, horizon=2.0, step=h))
    return np.abs(rec.final.x - x * math.exp(-2.0)).max()


def test_rk4_order():
    errs = [_rk4_error(h) for h in (0.2, 0.1, 0.05)]
    assert errs[0] / errs[1] >= 8 * 0.8 and errs[1] / errs[2] >= 8 * 0.8


def test_first_order_com_and_coincident():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(100, 2))
    rec = simulate_first_order(SpatialEnsemble.uniform(x),
                               SimConfig(RadialPotential.gaussian_pair(), horizon=2.0, step=0.01, snapshot_interval=0.1))
    c0 = x.mean(axis=0)
    for t, s in zip(rec.times, rec.states):
        assert np.abs(s.w @ s.x - c0).max() <= 1e-10 * (1 + t)
    gmax = RadialPotential.gaussian_pair().gradient_bound()
    for a, b, ta, tb in zip(rec.states, rec.states[1:], rec.times, rec.times[1:]):
        assert np.linalg.norm(b.x - a.x, axis=1).max() <= gmax * (tb - ta) * (1 + 1e-9)
    same = SpatialEnsemble.uniform(np.full((5, 2), 0.3))
    assert np.array_equal(simulate_first_order(same, SimConfig(GAUSS, horizon=1.0, step=0.1)).final.x, same.x)


# -- adjoined system ---------------------------------------------------------------------

def test_adjoint_relaxation():
    rng = np.random.default_rng(0)
    xs = SpatialEnsemble.uniform(rng.normal(size=(15, 2)))
    v0 = rng.normal(size=(15, 2))
    traj = adjoint_relaxation(xs, GAUSS, v0, 5.0)
    assert np.array_equal(traj.v_rk4[0], v0) and np.array_equal(traj.v_exact[0], v0)
    ratio = traj.decay_ratio()
    for tau in (1.0, 2.0, 5.0):
        k = int(round(tau / 1e-3))
        assert traj.tau[k] == pytest.approx(tau)
        assert abs(ratio[k] - math.exp(-tau)) <= 1e-10
    long = adjoint_relaxation(xs, GAUSS, v0, 40.0, dtau=0.01)
    assert np.allclose(long.v_rk4[-1], self_field(xs, GAUSS), atol=1e-15)
    shared = adjoint_relaxation(xs, GAUSS, [1.0, -1.0], 1.0)
    assert np.all(shared.v0 == [1.0, -1.0])


# -- closed form -------------------------------------------------------------------------

def test_closed_form_initial_state():
    for eps in (0.0, 0.01, 0.25, 0.7):
        x, v = linear_closed_form([1.5, -0.5], [0.3, 0.2], eps, 0.0, c=0.1)
        assert np.allclose(x, [1.5, -0.5], rtol=1e-15)
        if eps > 0:
            assert np.allclose(v, [0.3, 0.2], rtol=1e-14)


def closed_form_residual(eps, x0, v0, c, times):
    """Largest |eps x'' + x' + x - c| by central differences, relative to the size of the terms.

    The difference step resolves the fastest time scale, min(eps, 1).
    """
    h = 1e-3 * min(eps, 1.0)
    worst = 0.0
    for t in times:
        x, _ = linear_closed_form(x0, v0, eps, np.array([t - h, t, t + h]), c=c)
        xdd = (x[2] - 2 * x[1] + x[0]) / h**2
        xd = (x[2] - x[0]) / (2 * h)
        scale = max(abs(eps * xdd), abs(xd), abs(x[1] - c), 1e-300)
        worst = max(worst, abs(eps * xdd + xd + x[1] - c) / scale)
    return worst


@pytest.mark.parametrize("eps", [0.01, 0.1, 0.2, 0.25, 0.25 + 1e-13, 0.4, 2.0])
def test_closed_form_residual(eps):
    times = np.linspace(0.01, 3.0, 40)
    assert closed_form_residual(eps, 0.7, -1.3, 0.2, times) <= 1e-6
    # returned velocity is the derivative of the returned position
    h = 1e-4 * min(eps, 1.0)
    for t in times:
        x, v = linear_closed_form(0.7, -1.3, eps, np.array([t - h, t, t + h]), c=0.2)
        assert v[1] == pytest.approx((x[2] - x[0]) / (2 * h), rel=1e-6, abs=1e-9)


def test_slow_root_series():
    for eps in (1e-2, 1e-3, 1e-4):
        slow, fast = relaxation_rates(eps)
        assert abs(slow - (-1.0 - eps)) <= 3 * eps**2
        assert fast < -1 / (2 * eps)


def test_closed_form_matches_stepper_on_two_atoms():
    # quadratic kernel inside the cutoff: each atom obeys eps x'' + x' + x = com
    x = np.array([[1.0, 0.5], [-1.0, -0.5]])
    v = np.array([[0.3, 0.0], [-0.3, 0.0]])
    eps = 0.05
    rec = simulate_second_order(PhaseEnsemble.uniform(x, v), SimConfig(QUAD, epsilon=eps, horizon=1.0, step=1e-4,
                                                                         snapshot_interval=0.1))
    xe, _ = linear_closed_form(x, v, eps, rec.times)
    assert np.abs(np.stack([f.x for f in rec.states]) - xe).max() < 2e-4


@given(st.floats(1e-4, 3.0), st.floats(-2, 2), st.floats(-2, 2), st.floats(0.0, 4.0))
@settings(max_examples=100, deadline=None)
def test_closed_form_is_real_and_finite(eps, x0, v0, t):
    x, v = linear_closed_form(x0, v0, eps, t)
    assert np.isrealobj(x) and np.isfinite(x) and np.isfinite(v)
    # energy-like bound: a damped oscillator never exceeds its initial amplitude by much
    assert abs(x) <= abs(x0) + 2 * abs(v0) * max(eps, 1.0) + 1e-12
