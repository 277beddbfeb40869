"""Decode a recording and walk it through the spectral front-end.

Synthesizes a one-second 1 kHz tone, encodes it as a WAV container, then
shows every stage: decode -> frame -> power spectrum -> mel -> MFCC.
"""

import numpy as np

from stanalyzer.audio import (
    AudioClip,
    FrameGrid,
    decode_recording,
    encode_recording,
    frame_signal,
)
from stanalyzer.features import extract_features, mel_energies, power_spectrum

rate = 16000
t = np.arange(rate) / rate
samples = 0.5 * np.sin(2 * np.pi * 1000 * t)

# round-trip through the container format
wav_bytes = encode_recording(AudioClip(samples, rate))
clip = decode_recording(wav_bytes)
print(
    f"decoded {clip.duration_s:.3f} s at {clip.sample_rate} Hz, "
    f"{clip.samples.size} samples in [{clip.samples.min():.3f}, {clip.samples.max():.3f}]"
)

grid = FrameGrid()
frames = frame_signal(clip, grid)
print(
    f"framed into {frames.shape[0]} frames of {grid.frame_length} samples "
    f"(25 ms window, 10 ms hop, pre-emphasis {grid.pre_emphasis})"
)

spec = power_spectrum(frames)
peak_bin = int(np.argmax(spec.power.mean(axis=0)))
print(
    f"power spectrum: {spec.power.shape[1]} bins of {spec.bin_hz:.2f} Hz; "
    f"average peak at bin {peak_bin} = {peak_bin * spec.bin_hz:.0f} Hz"
)

mel = mel_energies(spec)
print(f"mel energies: {mel.shape[1]} filters, frame 0 peaks at filter {int(np.argmax(mel[0]))}")

features = extract_features(frames, grid)
print(
    f"MFCC matrix: {features.mfcc.shape}, log-energy range "
    f"[{features.log_energy.min():.2f}, {features.log_energy.max():.2f}]"
)
print("first frame c0..c4:", np.round(features.mfcc[0, :5], 3))
