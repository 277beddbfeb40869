"""Shared fixtures and independent oracles.

The oracles here are deliberately naive (O(n^2) DFT, direct struct packing)
so they stay independent of the library code they check.
"""

import struct

import numpy as np
import pytest


def naive_dft(x):
    """O(n^2) reference DFT. Never uses numpy.fft."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    k = np.arange(n)
    out = np.empty(n, dtype=np.complex128)
    for bin_index in range(n):
        angle = -2.0 * np.pi * bin_index * k / n
        out[bin_index] = np.sum(x * (np.cos(angle) + 1j * np.sin(angle)))
    return out


def make_wav(samples, rate=16000, encoding="int16"):
    """Pack samples into a RIFF/WAVE byte string, independent of the codec
    under test. samples: (n,) or (n, channels) floats in [-1, 1]."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    n_channels = arr.shape[1]
    if encoding == "int16":
        ints = np.clip(np.round(arr * 32768.0), -32768, 32767).astype("<i2")
        payload = ints.tobytes()
        fmt_tag, bits, width = 1, 16, 2
    elif encoding == "float32":
        payload = arr.astype("<f4").tobytes()
        fmt_tag, bits, width = 3, 32, 4
    else:
        raise ValueError(encoding)
    block = width * n_channels
    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 36 + len(payload)),
            b"WAVE",
            b"fmt ",
            struct.pack(
                "<IHHIIHH", 16, fmt_tag, n_channels, rate, rate * block, block, bits
            ),
            b"data",
            struct.pack("<I", len(payload)),
        ]
    )
    return header + payload


def tone(freq, duration_s, rate=16000, amplitude=0.5, phase=0.0):
    t = np.arange(int(round(duration_s * rate))) / rate
    return amplitude * np.sin(2.0 * np.pi * freq * t + phase)


def voice(freqs, duration_s, rate=16000, amplitude=0.3):
    """A synthetic 'speaker': a fixed chord identifying the voice."""
    t = np.arange(int(round(duration_s * rate))) / rate
    x = np.zeros_like(t)
    for i, freq in enumerate(freqs):
        x += amplitude / (i + 1) * np.sin(2.0 * np.pi * freq * t)
    return x

CLIENT_VOICE = (400.0, 1200.0, 2000.0)
THERAPIST_VOICE = (750.0, 2200.0, 3400.0)


def two_speaker_session(rng, plan, rate=16000, dither=1e-4):
    """Build (samples, truth) from a plan of (speaker|None, duration_s).

    speaker is "client", "therapist", or None for silence. truth lists
    (speaker, start_s, end_s) for the speech stretches.
    """
    pieces = []
    truth = []
    t = 0.0
    for who, duration in plan:
        n = int(round(duration * rate))
        piece = rng.uniform(-dither, dither, n)
        if who == "client":
            piece = piece + voice(CLIENT_VOICE, duration, rate)
            truth.append((who, t, t + duration))
        elif who == "therapist":
            piece = piece + voice(THERAPIST_VOICE, duration, rate)
            truth.append((who, t, t + duration))
        pieces.append(piece)
        t += duration
    return np.concatenate(pieces), truth


def therapist_enrollment_wav(rng, duration_s=7.0, rate=16000):
    samples = rng.uniform(-1e-4, 1e-4, int((duration_s + 1.0) * rate))
    start = rate // 2
    samples[start : start + int(duration_s * rate)] += voice(
        THERAPIST_VOICE, duration_s, rate
    )
    return make_wav(samples)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
