import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adsilence.audio_ingest import FrameSequence
from adsilence.energy_analysis import (
    FLOOR_DB,
    EnergyTrack,
    SilenceEvent,
    detect_silence_frames,
    energy_track,
    frame_energy_db,
    merge_silence_events,
)
from oracles import rms_db


def track(values):
    return EnergyTrack(np.asarray(values, dtype=np.float64))


def test_zero_frame_hits_floor():
    assert frame_energy_db(np.zeros(1920)) == FLOOR_DB == -120.0


def test_full_scale_constant():
    assert frame_energy_db(np.ones(1920)) == 0.0


def test_constant_thousandth_is_minus_sixty():
    assert frame_energy_db(np.full(1920, 0.001)) == pytest.approx(-60.0, abs=1e-9)


def test_sine_matches_brute_force_rms():
    n = np.arange(1920)
    frame = 0.5 * np.sin(2 * np.pi * 1000.0 * n / 48000.0)  # 40 whole periods
    expected = rms_db(frame.tolist())
    assert expected == pytest.approx(20 * math.log10(0.5 / math.sqrt(2)), abs=1e-9)
    assert abs(frame_energy_db(frame) - expected) < 1e-3
    assert frame_energy_db(frame) == pytest.approx(-9.031, abs=1e-3)


def test_tiny_nonzero_frame_clamped():
    assert frame_energy_db(np.full(1920, 1e-9)) == FLOOR_DB


def test_empty_frame_raises():
    with pytest.raises(Exception):
        frame_energy_db(np.array([]))


def test_energy_track_composition():
    frames = np.stack([np.zeros(1920), np.ones(1920), np.full(1920, 0.001)])
    e = energy_track(FrameSequence(frames)).energies_db
    np.testing.assert_allclose(e, [-120.0, 0.0, -60.0], atol=1e-9)


def test_energy_track_single_frame():
    assert len(energy_track(FrameSequence(np.ones((1, 1920))))) == 1


def test_energy_track_matches_scalar_loop():
    rng = np.random.default_rng(3)
    frames = rng.uniform(-1, 1, (100, 1920)) * rng.uniform(0, 1, (100, 1))
    frames[7] = 0.0
    e = energy_track(FrameSequence(frames), block_frames=13).energies_db
    expected = [rms_db(f.tolist()) for f in frames]
    np.testing.assert_allclose(e, expected, rtol=0, atol=1e-9)


def test_float32_frames_measured_in_float64():
    rng = np.random.default_rng(4)
    frames = rng.uniform(-1, 1, (5, 1920)).astype(np.float32)
    e = energy_track(FrameSequence(frames)).energies_db
    expected = [rms_db(f.astype(np.float64).tolist()) for f in frames]
    np.testing.assert_allclose(e, expected, atol=1e-9)


def test_gain_law_over_random_frames():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(1000):
        frame = rng.uniform(-1, 1, 1920) * 10 ** rng.uniform(-2.5, 0)
        g = 10 ** rng.uniform(-2, 0)
        shift = frame_energy_db(g * frame) - frame_energy_db(frame)
        worst = max(worst, abs(shift - 20 * math.log10(g)))
    assert worst < 1e-9


@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=200), st.randoms())
def test_permutation_invariant(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    a, b = frame_energy_db(np.array(values)), frame_energy_db(np.array(shuffled))
    assert a == pytest.approx(b, abs=1e-9)


def test_threshold_is_inclusive():
    idx = detect_silence_frames(track([-59.9, -60.0, -70.0, -10.0]), eta=-60.0)
    assert idx.tolist() == [1, 2]


def test_no_silence_in_loud_track():
    assert detect_silence_frames(track(np.zeros(50))).size == 0


def test_detection_matches_linear_scan():
    rng = np.random.default_rng(6)
    e = rng.uniform(-120, 0, 1000)
    e[::97] = -60.0
    got = detect_silence_frames(track(e), -60.0).tolist()
    assert got == [i for i, v in enumerate(e) if v <= -60.0]


@given(
    st.lists(st.floats(-120, 0), min_size=0, max_size=300),
    st.floats(-120, 0),
    st.floats(-120, 0),
)
def test_detection_monotone_in_eta(values, a, b):
    lo, hi = sorted((a, b))
    t = track(values)
    assert set(detect_silence_frames(t, lo).tolist()) <= set(detect_silence_frames(t, hi).tolist())


def test_merge_single_run():
    ev = merge_silence_events([1, 2], track([0, -70, -65, 0]))
    assert [(e.start_frame, e.end_frame) for e in ev] == [(1, 2)]


def test_merge_gap_splits():
    ev = merge_silence_events([5, 9], track(np.full(12, -70.0)))
    assert [(e.start_frame, e.end_frame) for e in ev] == [(5, 5), (9, 9)]


def test_merge_anchor_is_argmin():
    e = np.zeros(8)
    e[3:6] = [-61, -75, -61]
    (ev,) = merge_silence_events([3, 4, 5], track(e))
    assert ev == SilenceEvent(3, 5, 4, -75.0)


def test_merge_anchor_tie_takes_earliest():
    (ev,) = merge_silence_events([0, 1, 2], track([-70, -80, -80]))
    assert ev.anchor_frame == 1


def test_merge_empty():
    assert merge_silence_events([], track([0.0])) == []


@settings(max_examples=200)
@given(st.lists(st.floats(-120, 0), min_size=1, max_size=200), st.floats(-100, -20))
def test_merge_partitions_detected_frames(values, eta):
    t = track(values)
    idx = detect_silence_frames(t, eta)
    events = merge_silence_events(idx, t)
    covered = [i for ev in events for i in range(ev.start_frame, ev.end_frame + 1)]
    assert covered == idx.tolist()
    for prev, nxt in zip(events, events[1:]):
        assert prev.end_frame + 1 < nxt.start_frame
    for ev in events:
        run = t.energies_db[ev.start_frame:ev.end_frame + 1]
        assert ev.start_frame <= ev.anchor_frame <= ev.end_frame
        assert np.all(run <= eta)
        assert ev.min_energy_db == run.min()
