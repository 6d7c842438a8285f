"""
Internal model: gains, compact-support nonlinearity, regulator law, Van der Pol immersion
"""

import numpy as np
import pytest

from src.data.models import build_exosystem, build_plant, immersion_for, tau_vdp, vdp_field, vdp_phi
from src.errors import NotHurwitz
from src.regulator.internal_model import (
    GainSpec,
    InternalModelSpec,
    RegulatorState,
    build_gain_vector,
    build_phi_c,
    internal_model_field,
    is_hurwitz,
    observer_rhs,
    regulator_rhs,
)
from src.regulator.support import compute_support_box
from src.sim.boxes import Box
from src.sim.hybrid import VectorField, integrate_flow

EPS, A = 1.5, 1.0
SUPPORT = Box.from_bounds([[-5.0, 5.0], [-5.0, 5.0]])


def vdp_model(support=SUPPORT):
    return InternalModelSpec(d=2, phi=vdp_phi(EPS, A), support_box=support, blend_width=0.5)


def flipped_phi(xi):
    # phi = -f with f(xi) = -xi_1 - eps (xi_2 - 3 a xi_1^2 xi_2)
    xi = np.asarray(xi, dtype=float)
    return xi[..., 0] + EPS * (xi[..., 1] - 3 * A * xi[..., 0] ** 2 * xi[..., 1])


def test_scenario_gain_vector():
    spec = GainSpec(kappa=3.0, c=(4.0, 4.0), k=8.0)
    assert build_gain_vector(spec, 2).tolist() == [12.0, 36.0]
    assert spec.G.tolist() == [12.0, 36.0]


def test_unit_kappa_gain_vector():
    spec = GainSpec(kappa=1.0, c=(2.0, 1.0), k=1.0)
    assert build_gain_vector(spec, 2).tolist() == [1.0, 2.0]


def test_marginal_polynomial_rejected():
    with pytest.raises(NotHurwitz):
        GainSpec(kappa=1.0, c=(0.0, 1.0), k=1.0)


@pytest.mark.parametrize("kappa", [0.5, 1.0, 3.0, 7.25])
def test_gain_structure(kappa):
    c = (6.0, 11.0, 6.0)
    G = GainSpec(kappa=kappa, c=c, k=1.0).G
    for i in range(1, 4):
        assert G[i - 1] / kappa ** i == pytest.approx(c[3 - i], rel=1e-15)


@pytest.mark.parametrize(
    "coeffs, expected",
    [
        ((1, 4, 4), True),
        ((1, 0, 1), False),
        ((1, 8, 96, 288), True),
        ((1, 1, 1, 5), False),
        ((1, 6, 11, 6), True),
        ((1, -1, 2), False),
    ],
)
def test_routh_hurwitz(coeffs, expected):
    assert is_hurwitz(coeffs) is expected


def test_gain_order_mismatch():
    with pytest.raises(ValueError):
        build_gain_vector(GainSpec(kappa=1.0, c=(2.0, 1.0), k=1.0), 3)


def test_phi_c_matches_phi_inside_support():
    phi_c = build_phi_c(vdp_model())
    rng = np.random.default_rng(0)
    inside = SUPPORT.sample(rng, 10_000)
    assert np.array_equal(phi_c(inside), vdp_phi(EPS, A)(inside))
    assert phi_c(np.array([1.0, 2.0])) == vdp_phi(EPS, A)(np.array([1.0, 2.0]))


def test_phi_c_vanishes_outside_blend_band():
    phi_c = build_phi_c(vdp_model())
    rng = np.random.default_rng(1)
    points = rng.uniform(5.5, 50.0, size=(10_000, 2)) * rng.choice([-1.0, 1.0], size=(10_000, 2))
    points[:, 1] = rng.uniform(-4.0, 4.0, size=10_000)
    assert np.all(phi_c(points) == 0.0)
    assert phi_c(np.array([0.0, 5.6])) == 0.0


def test_phi_c_blend_band_is_continuous():
    spec = vdp_model()
    phi_c = build_phi_c(spec)
    phi = vdp_phi(EPS, A)
    line = np.column_stack([np.linspace(4.0, 6.0, 1000), np.full(1000, 1.0)])
    values = phi_c(line)
    step = 2.0 / 999
    clipped = spec.support_box.inflate(0.5).clip(line)
    assert np.all(np.abs(values) <= np.abs(phi(clipped)) + 1e-12)
    # Lipschitz bound of beta * phi on the inflated box
    grad_phi = 1 + 6 * EPS * A * 5.5 * 5.5 + EPS * (1 + 3 * A * 5.5 ** 2)
    bound = np.max(np.abs(phi(clipped))) / 0.5 + grad_phi
    assert np.max(np.abs(np.diff(values))) <= bound * step
    midline = np.array([5.25, 1.0])
    assert abs(phi_c(midline)) == pytest.approx(0.5 * abs(phi(midline)))


def test_internal_model_field_at_origin():
    phi_c = build_phi_c(vdp_model())
    assert internal_model_field(np.zeros(2), phi_c).tolist() == [0.0, 0.0]


def test_internal_model_field_flipped_nonlinearity():
    spec = InternalModelSpec(d=2, phi=flipped_phi, support_box=SUPPORT)
    out = internal_model_field(np.array([1.0, 2.0]), build_phi_c(spec))
    assert out.tolist() == pytest.approx([2.0, 5.0])


def test_internal_model_field_stable_cycle_nonlinearity():
    out = internal_model_field(np.array([1.0, 2.0]), build_phi_c(vdp_model()))
    assert out.tolist() == pytest.approx([2.0, -7.0])


def test_internal_model_field_far_outside():
    out = internal_model_field(np.array([40.0, -30.0]), build_phi_c(vdp_model()))
    assert out.tolist() == [-30.0, 0.0]


def test_regulator_rhs_zero_error_is_feedforward():
    gains = GainSpec(kappa=3.0, c=(4.0, 4.0), k=8.0)
    phi_c = build_phi_c(vdp_model())
    xi = np.array([0.3, -0.7])
    xi_dot, u = regulator_rhs(RegulatorState(xi=xi), 0.0, gains, phi_c)
    assert np.array_equal(xi_dot, internal_model_field(xi, phi_c))
    assert u == 0.3


def test_regulator_rhs_unit_error():
    gains = GainSpec(kappa=3.0, c=(4.0, 4.0), k=8.0)
    xi_dot, u = regulator_rhs(RegulatorState(xi=np.zeros(2)), 1.0, gains, build_phi_c(vdp_model()))
    assert xi_dot.tolist() == [-96.0, -288.0]
    assert u == -8.0


@pytest.mark.parametrize("alpha", [-3.0, 0.5, 2.0])
def test_regulator_rhs_linear_in_error(alpha):
    gains = GainSpec(kappa=3.0, c=(4.0, 4.0), k=8.0)
    phi_c = build_phi_c(vdp_model())
    state = RegulatorState(xi=np.array([1.0, -0.4]))
    base_dot, base_u = regulator_rhs(state, 0.0, gains, phi_c)
    one_dot, one_u = regulator_rhs(state, 0.25, gains, phi_c)
    scaled_dot, scaled_u = regulator_rhs(state, alpha * 0.25, gains, phi_c)
    np.testing.assert_allclose(scaled_dot - base_dot, alpha * (one_dot - base_dot), rtol=1e-12)
    assert scaled_u - base_u == pytest.approx(alpha * (one_u - base_u))


def test_tau_vdp_examples():
    assert tau_vdp([0.0, 0.0], EPS, A).tolist() == [0.0, 0.0]
    assert tau_vdp([1.0, 0.0], EPS, A).tolist() == pytest.approx([-1.0, 0.0])


def attractor_support():
    W0 = Box.from_bounds([[-3.0, 3.0], [-3.0, 3.0]])
    exo = build_exosystem("van_der_pol", None, W0, 2.0)
    tau = immersion_for("van_der_pol", None, "integrator").tau
    return compute_support_box(exo, build_plant("integrator", None), 2, tau=tau)


def cycle(h=1e-3, duration=10.0):
    field = vdp_field(EPS, A)
    settled = integrate_flow(field, [1.0, 0.0], 0.0, 20.0, 1e-2).final_state
    return integrate_flow(field, settled, 0.0, duration, h)


def test_tau_chain_property():
    h = 1e-3
    traj = cycle(h)
    xi = tau_vdp(traj.states, EPS, A)
    d_tau1 = np.gradient(xi[:, 0], h)[1:-1]
    assert np.max(np.abs(d_tau1 - xi[1:-1, 1])) <= 1e-3


def test_immersion_residual_on_limit_cycle():
    h = 1e-3
    traj = cycle(h)
    u = tau_vdp(traj.states, EPS, A)[:, 0]
    du = np.gradient(u, h)
    ddu = np.gradient(du, h)
    residual = ddu + vdp_phi(EPS, A)(np.column_stack([u, du]))
    assert np.max(np.abs(residual[2:-2])) <= 1e-2


def test_steady_state_input_reproduced():
    # integrator plant: u_ss = d/dt y_r(w) = -w_1
    gains = GainSpec(kappa=3.0, c=(4.0, 4.0), k=8.0)
    phi_c = build_phi_c(vdp_model())
    field = vdp_field(EPS, A)
    for w in cycle(duration=7.5).states[::250]:
        _, u = regulator_rhs(RegulatorState(xi=tau_vdp(w, EPS, A)), 0.0, gains, phi_c)
        assert u == pytest.approx(field.fn(w)[1])


def test_open_loop_observer_tracks_tau():
    gains = GainSpec(kappa=3.0, c=(4.0, 4.0), k=8.0)
    phi_c = build_phi_c(vdp_model(attractor_support()))
    field = vdp_field(EPS, A)

    def fn(x):
        w = x[:2]
        u_ss = float(tau_vdp(w, EPS, A)[0])
        return np.concatenate([field.fn(w), observer_rhs(x[2:], u_ss, gains, phi_c)])

    start = cycle(duration=1.0).final_state
    traj = integrate_flow(VectorField(dimension=4, fn=fn, name="observer"), np.concatenate([start, [0, 0]]), 0.0, 10.0, 1e-3)
    final = traj.final_state
    assert np.linalg.norm(final[2:] - tau_vdp(final[:2], EPS, A)) < 1e-2


def test_support_box_covers_tau_on_attractor():
    W0 = Box.from_bounds([[-3.0, 3.0], [-3.0, 3.0]])
    exo = build_exosystem("van_der_pol", {"eps": EPS, "a": A}, W0, 2.0)
    plant = build_plant("integrator", None)
    immersion = immersion_for("van_der_pol", None, "integrator")
    S = compute_support_box(exo, plant, 2, tau=immersion.tau)
    samples = tau_vdp(cycle().states, EPS, A)
    assert np.all(S.contains_rows(samples))


def test_numeric_support_box_matches_closed_form():
    W0 = Box.from_bounds([[-3.0, 3.0], [-3.0, 3.0]])
    exo = build_exosystem("van_der_pol", None, W0, 2.0)
    plant = build_plant("integrator", None)
    tau = immersion_for("van_der_pol", None, "integrator").tau
    closed = compute_support_box(exo, plant, 2, tau=tau)
    numeric = compute_support_box(exo, plant, 2, tau=None)
    np.testing.assert_allclose(numeric.lo_array, closed.lo_array, atol=0.25)
    np.testing.assert_allclose(numeric.hi_array, closed.hi_array, atol=0.25)
