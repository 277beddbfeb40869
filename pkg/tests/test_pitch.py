import numpy as np
import pytest

from stanalyzer.audio import AudioClip
from stanalyzer.pitch import estimate_frame_f0, track_pitch
from stanalyzer.vad import SpeechSegment

from conftest import tone

RATE = 16000


def harmonic_signal(f0, duration_s, rng, n_harmonics=5, rate=RATE):
    """Decaying-amplitude harmonic stack with random phases."""
    t = np.arange(int(round(duration_s * rate))) / rate
    x = np.zeros_like(t)
    for k in range(1, n_harmonics + 1):
        if k * f0 >= rate / 2:
            break
        x += 0.5**k * np.sin(2 * np.pi * k * f0 * t + rng.uniform(0, 2 * np.pi))
    return 0.5 * x / np.max(np.abs(x))


class TestEstimateFrameF0:
    def test_pure_220hz(self):
        frame = tone(220, 0.04)
        f0, conf = estimate_frame_f0(frame, RATE)
        assert f0 == pytest.approx(220, rel=0.02)
        assert conf > 0.9

    def test_white_noise_unvoiced(self, rng):
        frame = rng.normal(0, 0.3, 640)
        f0, conf = estimate_frame_f0(frame, RATE)
        assert f0 is None
        assert conf < 0.6

    def test_zero_frame(self):
        f0, conf = estimate_frame_f0(np.zeros(640), RATE)
        assert f0 is None
        assert conf == 0.0

    def test_window_too_short(self):
        with pytest.raises(ValueError):
            estimate_frame_f0(np.zeros(500), RATE)

    def test_lag_oracle_for_known_tone(self):
        # the expected lag is rate / f0; estimate must land on it
        for f0_true in (110.0, 200.0, 320.0):
            frame = tone(f0_true, 0.04, amplitude=0.7)
            f0, _ = estimate_frame_f0(frame, RATE)
            expected_lag = RATE / f0_true
            assert RATE / f0 == pytest.approx(expected_lag, rel=0.02)

    def test_gain_invariance(self, rng):
        frame = harmonic_signal(150, 0.04, rng)
        a, ca = estimate_frame_f0(frame, RATE)
        b, cb = estimate_frame_f0(frame * 1.7, RATE)
        assert a == pytest.approx(b, rel=1e-9)
        assert ca == pytest.approx(cb, abs=1e-9)

    def test_octave_sanity_random_fundamentals(self, rng):
        for _ in range(100):
            f0_true = rng.uniform(80, 300)
            frame = harmonic_signal(f0_true, 0.04, rng)
            f0, conf = estimate_frame_f0(frame, RATE)
            assert conf >= 0.6
            assert f0 == pytest.approx(f0_true, rel=0.02)

    def test_f0_stays_in_range(self, rng):
        frame = harmonic_signal(448, 0.04, rng, n_harmonics=2)
        f0, conf = estimate_frame_f0(frame, RATE)
        if f0 is not None:
            assert 50.0 <= f0 <= 450.0


class TestTrackPitch:
    def test_no_segments_all_absent(self):
        clip = AudioClip(tone(200, 1.0), RATE)
        track = track_pitch(clip, [])
        assert track.f0_hz.size == 98  # (16000 - 400) // 160 + 1
        assert not track.present().any()
        assert np.all(track.voicing == 0.0)

    def test_outside_segment_forced_absent(self):
        clip = AudioClip(tone(200, 2.0), RATE)
        seg = SpeechSegment(0, 0.5, 1.0, 0.0)
        track = track_pitch(clip, [seg])
        t = track.frame_times_s
        outside = (t < 0.5 - 1e-9) | (t > 1.0 - 1e-9)
        assert not track.present()[outside].any()
        assert track.present()[(t >= 0.5) & (t <= 0.9)].all()

    def test_glide_tracks_instantaneous_frequency(self):
        duration = 1.0
        t = np.arange(int(RATE * duration)) / RATE
        # linear 110 -> 220 Hz chirp: phase = 2*pi*(f0*t + rate_of_change*t^2/2)
        phase = 2 * np.pi * (110 * t + 55 * t**2)
        clip = AudioClip(0.5 * np.sin(phase), RATE)
        track = track_pitch(clip, [SpeechSegment(0, 0.0, duration, 0.0)])
        present = track.present()
        assert present.sum() > 50
        centers = track.frame_times_s[present] + 0.020  # center of 40 ms window
        instantaneous = 110 + 110 * centers
        assert np.all(
            np.abs(track.f0_hz[present] - instantaneous) / instantaneous < 0.05
        )
        diffs = np.diff(track.f0_hz[present])
        assert np.all(diffs > -0.05 * track.f0_hz[present][:-1])  # monotone within 5 %

    def test_median_smoothing_removes_isolated_spike(self):
        clip = AudioClip(tone(110, 1.0), RATE)
        seg = SpeechSegment(0, 0.0, 1.0, 0.0)
        track = track_pitch(clip, [seg])
        present_idx = np.flatnonzero(track.present())
        # inject the spike scenario directly through the smoothing helper
        from stanalyzer.pitch import _median3_present

        values = track.f0_hz.copy()
        mid = present_idx[len(present_idx) // 2]
        values[mid] = 440.0
        smoothed = _median3_present(values)
        assert smoothed[mid] == pytest.approx(110, rel=0.02)

    def test_all_estimates_within_vad_gate(self, rng):
        samples = np.concatenate(
            [np.zeros(8000), tone(180, 1.0, amplitude=0.4), np.zeros(8000)]
        )
        clip = AudioClip(samples, RATE)
        seg = SpeechSegment(0, 0.5, 1.5, 0.0)
        track = track_pitch(clip, [seg])
        present_times = track.frame_times_s[track.present()]
        assert np.all(present_times >= 0.5 - 1e-9)
        assert np.all(present_times <= 1.5 - 1e-9)
