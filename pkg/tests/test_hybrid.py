"""
Fixed-step RK4 flows and scheduled jumps
"""

import math

import numpy as np
import pytest

from src.data.models import harmonic_field, vdp_field
from src.errors import NonFiniteState, ScheduleConflict, StepMisaligned
from src.sim.hybrid import (
    TAG_POST,
    TAG_PRE,
    JumpSchedule,
    VectorField,
    integrate_flow,
    run_hybrid,
    step_count,
)


def zero_field(dim):
    return VectorField(dimension=dim, fn=lambda x: np.zeros_like(x), name="zero")


def decay_field():
    return VectorField(dimension=1, fn=lambda x: -x, name="decay")


def unit_drift():
    return VectorField(dimension=1, fn=lambda x: np.ones_like(x), name="drift")


def test_zero_field_is_identity():
    traj = integrate_flow(zero_field(2), [1.0, 0.0], 0.0, 1.0, 0.01)
    assert len(traj) == 101
    assert np.all(traj.states == np.array([1.0, 0.0]))
    assert traj.times[-1] == 1.0


def test_exponential_decay():
    traj = integrate_flow(decay_field(), [1.0], 0.0, 1.0, 0.001)
    assert abs(traj.final_state[0] - math.exp(-1.0)) < 1e-9


def test_harmonic_oscillator_full_period():
    # h chosen so 2*pi is a whole number of steps
    h = 2 * math.pi / 6283
    traj = integrate_flow(harmonic_field(1.0), [1.0, 0.0], 0.0, 2 * math.pi, h)
    np.testing.assert_allclose(traj.final_state, [1.0, 0.0], atol=1e-6)


def test_misaligned_interval_rejected():
    with pytest.raises(StepMisaligned):
        integrate_flow(decay_field(), [1.0], 0.0, 1.0005, 0.001)
    with pytest.raises(StepMisaligned):
        step_count(0.0, 0.15, 0.0)


def test_step_count_tolerates_rounding():
    assert step_count(0.0, 0.15, 0.001) == 150
    assert step_count(0.0, 30.0, 0.001) == 30000


def test_nan_raises_non_finite():
    bad = VectorField(dimension=1, fn=lambda x: x * np.nan, name="nan")
    with pytest.raises(NonFiniteState):
        integrate_flow(bad, [1.0], 0.0, 1.0, 0.1)


def test_state_ceiling_raises_non_finite():
    blowup = VectorField(dimension=1, fn=lambda x: x ** 2, name="blowup")
    with pytest.raises(NonFiniteState) as info:
        integrate_flow(blowup, [1.0], 0.0, 2.0, 0.01, state_ceiling=1e3)
    assert info.value.t is not None and info.value.t <= 1.05


@pytest.mark.parametrize("h", [1e-2, 5e-3])
def test_rk4_fourth_order(h):
    exact = math.exp(-1.0)
    coarse = abs(integrate_flow(decay_field(), [1.0], 0.0, 1.0, h).final_state[0] - exact)
    fine = abs(integrate_flow(decay_field(), [1.0], 0.0, 1.0, h / 2).final_state[0] - exact)
    assert 14.0 <= coarse / fine <= 18.0


def test_halving_jumps():
    halve = JumpSchedule(period=1.0, action=lambda t, x: x / 2, name="halve")
    traj = run_hybrid(zero_field(1), [5.0], [halve], t_end=3.0, h=0.1)
    assert traj.jump_times() == pytest.approx([1.0, 2.0, 3.0])
    assert [float(s[0]) for s in traj.post_jump_states()] == [2.5, 1.25, 0.625]
    assert traj.tags[0] not in (TAG_PRE, TAG_POST)


def test_sawtooth_reset():
    reset = JumpSchedule(period=1.0, action=lambda t, x: np.zeros_like(x), name="reset")
    traj = run_hybrid(unit_drift(), [0.0], [reset], t_end=2.5, h=0.01)
    flow = [i for i, tag in enumerate(traj.tags) if tag not in (TAG_PRE, TAG_POST)]
    for i in flow:
        assert traj.states[i, 0] == pytest.approx(math.fmod(traj.times[i], 1.0), abs=1e-9)
    pre = [traj.states[i, 0] for i, _ in traj.jump_indices()]
    assert pre == pytest.approx([1.0, 1.0], abs=1e-9)


def test_jump_records_are_paired():
    halve = JumpSchedule(period=0.3, action=lambda t, x: x / 2, name="halve")
    traj = run_hybrid(decay_field(), [1.0], [halve], t_end=1.5, h=0.01)
    pairs = traj.jump_indices()
    assert len(pairs) == 5
    for pre, post in pairs:
        assert traj.tags[post] == TAG_POST
        assert traj.times[pre] == traj.times[post]
    dt = np.diff(traj.times)
    assert np.all(dt >= 0)
    assert np.count_nonzero(dt == 0) == len(pairs)


def test_at_start_fires_at_t0():
    bump = JumpSchedule(period=1.0, action=lambda t, x: x + 1, at_start=True, name="bump")
    traj = run_hybrid(zero_field(1), [0.0], [bump], t_end=2.0, h=0.1)
    assert traj.jump_times() == pytest.approx([0.0, 1.0, 2.0])
    assert traj.tags[0] == TAG_PRE
    assert traj.final_state[0] == 3.0


def test_coinciding_jumps_need_order():
    a = JumpSchedule(period=1.0, action=lambda t, x: x + 1, name="a")
    b = JumpSchedule(period=0.5, action=lambda t, x: x * 2, name="b")
    with pytest.raises(ScheduleConflict):
        run_hybrid(zero_field(1), [1.0], [a, b], t_end=1.0, h=0.1)


def test_declared_order_applies_ascending():
    add = JumpSchedule(period=1.0, action=lambda t, x: x + 1, order=1, name="add")
    double = JumpSchedule(period=1.0, action=lambda t, x: x * 2, order=0, name="double")
    traj = run_hybrid(zero_field(1), [1.0], [add, double], t_end=1.0, h=0.1)
    assert traj.final_state[0] == 3.0
    assert len(traj.jump_indices()) == 1


def test_run_hybrid_is_deterministic():
    field = vdp_field(1.5, 1.0)
    halve = JumpSchedule(period=0.25, action=lambda t, x: 0.9 * x, name="shrink")
    first = run_hybrid(field, [1.0, 0.0], [halve], t_end=2.0, h=0.001)
    second = run_hybrid(field, [1.0, 0.0], [halve], t_end=2.0, h=0.001)
    assert np.array_equal(first.states, second.states)
    assert np.array_equal(first.times, second.times)
    assert first.tags == second.tags


def test_van_der_pol_settles_on_limit_cycle():
    traj = run_hybrid(vdp_field(1.5, 1.0), [1.0, 0.0], [], t_end=20.0, h=0.001)
    loop = traj.states[traj.times >= 12.5]
    samples = traj.states[(traj.times >= 10.0) & (traj.times < 12.5)][::10]
    gaps = [np.min(np.linalg.norm(loop - p, axis=1)) for p in samples]
    assert max(gaps) <= 0.05
