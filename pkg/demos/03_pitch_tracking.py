"""Pitch tracking: steady tone, rising glide, and unvoiced noise.

The tracker only reports f0 inside speech segments and where the
normalized autocorrelation is confident; everything else stays absent.
"""

import numpy as np

from stanalyzer.audio import AudioClip
from stanalyzer.pitch import estimate_frame_f0, track_pitch
from stanalyzer.vad import SpeechSegment

rate = 16000
rng = np.random.default_rng(7)

frame = 0.5 * np.sin(2 * np.pi * 220 * np.arange(640) / rate)
f0, conf = estimate_frame_f0(frame, rate)
print(f"220 Hz tone     -> f0 {f0:7.2f} Hz, confidence {conf:.3f}")

f0, conf = estimate_frame_f0(rng.normal(0, 0.3, 640), rate)
print(f"white noise     -> f0 {f0}, confidence {conf:.3f} (unvoiced)")

# a 110 -> 220 Hz glide over one second
t = np.arange(rate) / rate
glide = 0.5 * np.sin(2 * np.pi * (110 * t + 55 * t**2))
clip = AudioClip(np.concatenate([np.zeros(rate // 2), glide, np.zeros(rate // 2)]), rate)
segments = [SpeechSegment(0, 0.5, 1.5, 0.0)]
track = track_pitch(clip, segments)

present = track.present()
print(f"glide: {present.sum()} voiced frames of {track.f0_hz.size}")
for k in np.flatnonzero(present)[:: max(present.sum() // 6, 1)]:
    print(f"  t={track.frame_times_s[k]:.2f} s  f0={track.f0_hz[k]:6.1f} Hz  voicing={track.voicing[k]:.2f}")
print("frames outside the segment are all absent:",
      not track.present()[(track.frame_times_s < 0.5) | (track.frame_times_s > 1.5)].any())
