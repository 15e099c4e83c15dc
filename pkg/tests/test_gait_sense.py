import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaitguide.errors import NonMonotonicTime, NotCalibrated
from gaitguide.gait_model import (
    Coarse,
    RopeSample,
    advance_gait,
    emit_rope_samples,
    initial_state,
    rope_length,
    simulate_walk,
)
from gaitguide.gait_sense import (
    Recognizer,
    RecognizerConfig,
    estimate_stride,
    ingest,
    read_rope_csv,
    theta_from_length,
)
from oracles import truth_events


def run(samples, rec=None):
    rec = rec or Recognizer()
    steps, ests = [], []
    for s in samples:
        e = rec.ingest(s)
        steps.extend(e.new_steps)
        ests.append(e)
    return rec, steps, ests


def test_standing_stream_has_no_steps():
    rec = Recognizer()
    for k in range(500):
        e = rec.ingest(RopeSample(k * 0.01, 0.3, 0.3))
    assert e.step_count == 0
    assert e.left.phase is Coarse.STANCE and e.right.phase is Coarse.STANCE
    assert e.cadence_hat == 0.0


def test_non_monotonic_time_rejected():
    rec = Recognizer()
    rec.ingest(RopeSample(1.0, 0.3, 0.3))
    with pytest.raises(NonMonotonicTime):
        rec.ingest(RopeSample(1.0, 0.3, 0.3))


def test_ten_right_steps_timed_within_20ms():
    # right contacts at 0.79 + k * 1.125 s: the tenth lands at 10.91 s
    samples, states = simulate_walk(initial_state(right_fraction=0.3), 1100)
    truth = [e for e in truth_events(states) if e.leg == "right"]
    rec, steps, _ = run(samples)
    right = [s for s in steps if s.leg == "right"]
    assert len(truth) == 10 and len(right) == 10
    err = np.abs(np.array([s.t for s in right]) - np.array([e.t for e in truth]))
    assert err.max() <= 0.020


def test_thousand_steps_exact_count_and_phase_accuracy():
    # 1000 steps at 1.78 steps/s is a little over 562 s
    samples, states = simulate_walk(initial_state(right_fraction=0.3), 56300)
    truth = truth_events(states)
    assert len(truth) >= 1000
    rec, steps, ests = run(samples)
    for leg in ("left", "right"):
        assert sum(e.leg == leg for e in truth) == sum(s.leg == leg for s in steps)
    # every true step is matched by exactly one detected step
    tt = np.array(sorted(e.t for e in truth))
    te = np.array(sorted(s.t for s in steps))
    assert len(tt) == len(te) and np.max(np.abs(tt - te)) < 0.020
    ok = n = 0
    for e, x in zip(ests, states):
        for leg in ("left", "right"):
            n += 1
            ok += e.leg(leg).phase is getattr(x, leg).phase.coarse
    assert ok / n >= 0.98


def test_noisy_fifty_steps_monte_carlo():
    # sigma = 2 mm, 100 seeds: 50 true steps -> detected count within one
    s0 = initial_state(right_fraction=0.3)
    n_ticks = 2830
    for seed in range(100):
        samples, states = simulate_walk(s0, n_ticks, noise_sigma=0.002, seed=seed)
        n_true = len(truth_events(states))
        _, steps, _ = run(samples)
        assert 49 <= len(steps) <= 51, (seed, len(steps), n_true)


@pytest.mark.parametrize("rate", [50.0, 100.0, 200.0])
def test_sample_rate_tolerance(rate):
    dt = 1.0 / rate
    samples, states = simulate_walk(initial_state(right_fraction=0.3), int(20 / dt), dt=dt)
    rec = Recognizer(RecognizerConfig(rate_hz=rate))
    _, steps, _ = run(samples, rec)
    assert abs(len(steps) - len(truth_events(states))) == 0


def test_cadence_estimate():
    samples, _ = simulate_walk(initial_state(right_fraction=0.3), 1000)
    rec, steps, ests = run(samples)
    assert ests[-1].cadence_hat == pytest.approx(0.8 / 0.45, rel=1e-3)
    # step_count non-decreasing, cadence only after two steps
    counts = [e.step_count for e in ests]
    assert all(b >= a for a, b in zip(counts, counts[1:]))
    assert all(e.cadence_hat == 0.0 for e in ests if e.step_count < 2)


def test_replay_deterministic():
    samples, _ = simulate_walk(initial_state(right_fraction=0.3), 800, noise_sigma=0.002, seed=4)
    _, a, ea = run(samples)
    _, b, eb = run(samples)
    assert a == b and ea == eb


def test_functional_ingest_form():
    rec = Recognizer()
    rec2, est = ingest(rec, RopeSample(0.0, 0.3, 0.3))
    assert rec2 is rec and est.step_count == 0


@given(st.floats(-0.6, 0.9))
def test_theta_from_length_inverts_rope_length(theta):
    assert theta_from_length(rope_length(theta)) == pytest.approx(theta, abs=1e-9)


def _walk_mod(mod, calibration=None, n=1200):
    s = initial_state(right_fraction=0.3)
    rec = Recognizer(calibration=calibration)
    for k in range(n):
        rec.ingest(emit_rope_samples(s, t=k * 0.01))
        s = advance_gait(s, 0.01, mod, mod)
    return rec


def test_stride_uncalibrated_defaults_and_strict():
    rec = Recognizer()
    assert estimate_stride(rec) == 0.45
    with pytest.raises(NotCalibrated):
        estimate_stride(rec, strict=True)
    with pytest.raises(NotCalibrated):
        rec.calibrate(0.45)


def test_stride_self_consistent_after_calibration():
    rec = _walk_mod(0.0)
    scale = rec.calibrate(0.45)
    assert scale > 0
    assert estimate_stride(rec, strict=True) == pytest.approx(0.45, abs=0.01)
    # a fresh walk using that calibration
    rec2 = _walk_mod(0.0, calibration=scale)
    assert estimate_stride(rec2) == pytest.approx(0.45, abs=0.01)


def test_stride_monotone_in_modulation():
    scale = _walk_mod(0.0).calibrate(0.45)
    plain = estimate_stride(_walk_mod(0.0, scale))
    longer = estimate_stride(_walk_mod(0.2, scale))
    assert longer > plain


def test_read_rope_csv(tmp_path):
    p = tmp_path / "rope.csv"
    p.write_text("t,left_len,right_len\n0.0,0.3,0.31\n0.01,0.3,0.32\n")
    out = read_rope_csv(p)
    assert out == [RopeSample(0.0, 0.3, 0.31), RopeSample(0.01, 0.3, 0.32)]
    bad = tmp_path / "bad.csv"
    bad.write_text("t,a\n0,1\n")
    with pytest.raises(ValueError):
        read_rope_csv(bad)
