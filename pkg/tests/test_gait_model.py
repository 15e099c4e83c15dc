import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gaitguide.errors import ModulationOutOfRange
from gaitguide.gait_model import (
    DEFAULT_GEOMETRY,
    DEFAULT_PROFILE,
    PHASE_BOUNDARIES,
    Coarse,
    GaitPhase,
    RopeGeometry,
    ThighProfile,
    advance_gait,
    emit_rope_samples,
    initial_state,
    phase_of,
    rope_length,
    simulate_walk,
    swing_bump,
    wrap_angle,
)
from oracles import rope_oracle

angles = st.floats(-math.pi, math.pi, allow_nan=False)


def test_rope_length_matches_trig_oracle_1000_draws():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        l1 = tuple(rng.uniform(-0.3, 0.3, 2))
        l2 = tuple(rng.uniform(-0.3, 0.3, 2))
        theta = float(rng.uniform(-math.pi, math.pi))
        g = RopeGeometry(l1, l2)
        worst = max(worst, abs(rope_length(theta, g) - rope_oracle(theta, l1, l2)))
    assert worst < 1e-9


def test_rope_length_scalar_and_array_agree():
    th = np.linspace(-1, 1, 101)
    arr = rope_length(th)
    assert np.allclose(arr, [rope_length(float(v)) for v in th], atol=1e-15, rtol=0)


def test_rope_length_at_zero_is_vector_sum():
    (ax, ay), (bx, by) = DEFAULT_GEOMETRY.l1, DEFAULT_GEOMETRY.l2
    assert rope_length(0.0) == pytest.approx(math.hypot(ax + bx, ay + by), abs=1e-15)


def test_phase_partition():
    assert phase_of(0.0) is GaitPhase.INITIAL_CONTACT
    assert phase_of(0.6) is GaitPhase.INITIAL_SWING
    assert phase_of(0.9999) is GaitPhase.TERMINAL_SWING
    for lo, hi, ph in zip(PHASE_BOUNDARIES, PHASE_BOUNDARIES[1:], GaitPhase):
        assert phase_of(lo) is ph
        assert phase_of((lo + hi) / 2) is ph
    with pytest.raises(ValueError):
        phase_of(1.0)


@given(st.floats(0.0, 1.0, exclude_max=True))
def test_stance_is_sixty_percent(f):
    assert (phase_of(f).coarse is Coarse.SWING) == (f >= 0.6)


@given(st.floats(-5, 5, allow_nan=False))
def test_profile_is_periodic_and_bounded(f):
    a = DEFAULT_PROFILE(f)
    assert a == pytest.approx(DEFAULT_PROFILE(f + 1.0), abs=1e-12)
    assert min(DEFAULT_PROFILE.angles) - 1e-12 <= a <= max(DEFAULT_PROFILE.angles) + 1e-12


def test_profile_is_smooth_across_wrap():
    eps = 1e-6
    left = (DEFAULT_PROFILE(1.0 - eps) - DEFAULT_PROFILE(1.0 - 2 * eps)) / eps
    right = (DEFAULT_PROFILE(2 * eps) - DEFAULT_PROFILE(eps)) / eps
    assert abs(left) < 1e-3 and abs(right) < 1e-3


def test_profile_rejects_non_periodic():
    with pytest.raises(ValueError):
        ThighProfile((0.0, 1.0), (0.1, 0.2))


def test_swing_bump_zero_outside_swing():
    f = np.linspace(0, 0.6, 50, endpoint=False)
    assert np.all(swing_bump(f) == 0.0)
    assert swing_bump(0.8) == pytest.approx(1.0)


@given(angles, angles)
def test_wrap_angle_range(a, b):
    w = wrap_angle(a + 7 * b)
    assert -math.pi < w <= math.pi
    assert math.cos(w) == pytest.approx(math.cos(a + 7 * b), abs=1e-9)


def test_straight_walk_speed_and_cadence():
    s = initial_state()
    assert s.cadence == pytest.approx(0.8 / 0.45)
    for _ in range(1000):
        s = advance_gait(s, 0.01)
    assert s.position[0] == pytest.approx(8.0, abs=1e-9)
    assert s.position[1] == 0.0
    assert s.heading == 0.0
    # 10 s at 1.78 steps/s
    assert s.steps == 17


def test_legs_in_antiphase():
    s = initial_state(right_fraction=0.1)
    assert (s.left.phase_fraction - s.right.phase_fraction) % 1.0 == pytest.approx(0.5)


def test_modulation_only_during_swing_and_turns_left():
    s = initial_state()  # right leg at initial contact: stance
    # right stride lengthened: the body turns left by base*mod/w_hip per step
    heads = []
    for _ in range(int(1.125 / 0.01) + 2):
        s = advance_gait(s, 0.01, 0.0, 0.2)
        for e in s.events:
            heads.append((e.leg, e.dpsi))
    right = [d for leg, d in heads if leg == "right"]
    assert right and right[0] == pytest.approx(0.45 * 0.2 / 0.30)
    assert all(d == 0.0 for leg, d in heads if leg == "left")
    assert s.heading > 0


@given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_step_heading_change_formula(ml, mr):
    s = initial_state(right_fraction=0.3)
    total = 0.0
    for _ in range(300):
        s = advance_gait(s, 0.01, ml, mr)
        for e in s.events:
            base = s.base_stride
            sign = 1.0 if e.leg == "right" else -1.0
            assert e.dpsi == pytest.approx(sign * (e.stride - base) / s.w_hip, abs=1e-12)
            total += e.dpsi
    assert wrap_angle(s.heading - total) == pytest.approx(0.0, abs=1e-9)


def test_modulation_bound_enforced():
    with pytest.raises(ModulationOutOfRange):
        advance_gait(initial_state(), 0.01, 0.31, 0.0)


def test_rope_samples_noise_keyed_on_seed():
    s = initial_state()
    a = emit_rope_samples(s, noise_sigma=0.002, rng=3, index=9)
    b = emit_rope_samples(s, noise_sigma=0.002, rng=3, index=9)
    c = emit_rope_samples(s, noise_sigma=0.002, rng=3, index=10)
    assert a == b and a != c
    assert emit_rope_samples(s).left_len == rope_length(s.left.thigh_angle)


def test_simulate_walk_shapes():
    samples, states = simulate_walk(initial_state(), 50)
    assert len(samples) == len(states) == 50
    assert all(b.t > a.t for a, b in zip(samples, samples[1:]))
    assert all(x.left_len > 0 and x.right_len > 0 for x in samples)
