"""Decode, normalize, and frame raw recordings.

Everything downstream consumes the canonical representation produced here:
16 kHz mono float samples in [-1, 1], framed on a 25 ms / 10 ms grid with
pre-emphasis and a Hamming window.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from math import gcd

import numpy as np
from scipy.signal import resample_poly

CANONICAL_RATE = 16000
SUPPORTED_RATES = (8000, 16000, 44100, 48000)

INT16_SCALE = 32768.0  # fixed scale factor: -32768 maps to -1.0 exactly


class MalformedContainer(ValueError):
    """The byte stream is not a well-formed RIFF/PCM container."""


class UnsupportedEncoding(ValueError):
    """The container uses a codec other than 16-bit PCM or 32-bit float."""


class UnsupportedRate(ValueError):
    """Requested resampling rate is not one of the supported rates."""


@dataclass(frozen=True)
class AudioClip:
    """Mono audio at a known sample rate.

    samples are float64 in [-1, 1]; duration is exactly
    ``len(samples) / sample_rate``.
    """

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise ValueError("AudioClip samples must be one-dimensional")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if samples.size and (np.min(samples) < -1.0 or np.max(samples) > 1.0):
            raise ValueError("samples outside [-1.0, 1.0]")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class FrameGrid:
    """Framing parameters: 25 ms frames every 10 ms with pre-emphasis 0.97."""

    frame_length: int = 400
    hop: int = 160
    pre_emphasis: float = 0.97
    window: np.ndarray = field(default_factory=lambda: np.hamming(400))

    def __post_init__(self):
        if self.hop > self.frame_length:
            raise ValueError("hop must not exceed frame_length")
        window = np.asarray(self.window, dtype=np.float64)
        object.__setattr__(self, "window", window)
        if window.size != self.frame_length:
            raise ValueError("window length must equal frame_length")
        if np.min(window) <= 0.0 or np.max(window) > 1.08:
            raise ValueError("window weights must lie in (0, 1.08]")

    @property
    def hop_s(self) -> float:
        return self.hop / CANONICAL_RATE

    @property
    def frame_s(self) -> float:
        return self.frame_length / CANONICAL_RATE


def _read_chunk_header(data: bytes, pos: int) -> tuple[bytes, int, int]:
    if pos + 8 > len(data):
        raise MalformedContainer("truncated chunk header")
    cid = data[pos : pos + 4]
    (size,) = struct.unpack_from("<I", data, pos + 4)
    return cid, size, pos + 8


def decode_recording(data: bytes, source_id: str = "") -> AudioClip:
    """Decode a RIFF/WAVE byte stream into a mono AudioClip.

    Accepts 16-bit integer PCM and 32-bit float encodings, any channel
    count. Multi-channel input is averaged to mono; integer samples are
    scaled by 1/32768.
    """
    if len(data) < 12:
        raise MalformedContainer("too short for a RIFF header")
    if data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedContainer("missing RIFF/WAVE magic")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        cid, size, body = _read_chunk_header(data, pos)
        if body + size > len(data):
            raise MalformedContainer(f"chunk {cid!r} overruns container")
        if cid == b"fmt ":
            if size < 16:
                raise MalformedContainer("fmt chunk too small")
            fmt = struct.unpack_from("<HHIIHH", data, body)
        elif cid == b"data":
            payload = data[body : body + size]
        pos = body + size + (size & 1)  # chunks are word aligned

    if fmt is None:
        raise MalformedContainer("no fmt chunk")
    if payload is None:
        raise MalformedContainer("no data chunk")

    audio_format, n_channels, sample_rate, _byte_rate, block_align, bits = fmt
    if n_channels == 0 or sample_rate == 0:
        raise MalformedContainer("fmt declares zero channels or rate")

    if audio_format == 1 and bits == 16:
        dtype, width = np.dtype("<i2"), 2
    elif audio_format == 3 and bits == 32:
        dtype, width = np.dtype("<f4"), 4
    else:
        raise UnsupportedEncoding(
            f"format tag {audio_format} at {bits} bits is not supported"
        )

    frame_bytes = width * n_channels
    if block_align not in (0, frame_bytes):
        raise MalformedContainer("block_align inconsistent with fmt")
    if len(payload) % frame_bytes != 0:
        raise MalformedContainer("data size is not a whole number of frames")

    raw = np.frombuffer(payload, dtype=dtype).reshape(-1, n_channels)
    mono = raw.astype(np.float64).mean(axis=1)
    if audio_format == 1:
        mono /= INT16_SCALE
    else:
        mono = np.clip(mono, -1.0, 1.0)
    return AudioClip(samples=mono, sample_rate=sample_rate, source_id=source_id)


def encode_recording(clip: AudioClip) -> bytes:
    """Encode a clip as 16-bit mono RIFF/PCM at its sample rate.

    Inverse of :func:`decode_recording` for 16-bit input: decode -> encode
    -> decode is bit-exact on the samples.
    """
    ints = np.clip(np.round(clip.samples * INT16_SCALE), -32768, 32767)
    payload = ints.astype("<i2").tobytes()
    rate = clip.sample_rate
    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 36 + len(payload)),
            b"WAVE",
            b"fmt ",
            struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 2, 2, 16),
            b"data",
            struct.pack("<I", len(payload)),
        ]
    )
    return header + payload


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Band-limited (polyphase windowed-sinc) resampling to target_rate."""
    if target_rate not in SUPPORTED_RATES:
        raise UnsupportedRate(f"target rate {target_rate} not in {SUPPORTED_RATES}")
    if clip.sample_rate == target_rate:
        return clip
    g = gcd(target_rate, clip.sample_rate)
    up, down = target_rate // g, clip.sample_rate // g
    out = resample_poly(clip.samples, up, down)
    out = np.clip(out, -1.0, 1.0)  # FIR overshoot can exceed full scale
    return AudioClip(samples=out, sample_rate=target_rate, source_id=clip.source_id)


def pre_emphasize(samples: np.ndarray, coefficient: float = 0.97) -> np.ndarray:
    """First-difference filter y[n] = x[n] - c*x[n-1], y[0] = x[0]."""
    out = np.empty_like(samples, dtype=np.float64)
    if samples.size == 0:
        return out
    out[0] = samples[0]
    out[1:] = samples[1:] - coefficient * samples[:-1]
    return out


def frame_count(n_samples: int, grid: FrameGrid) -> int:
    if n_samples < grid.frame_length:
        return 0
    return (n_samples - grid.frame_length) // grid.hop + 1


def frame_signal(clip: AudioClip, grid: FrameGrid | None = None) -> np.ndarray:
    """Slice a clip into pre-emphasized, windowed frames.

    Returns an array of shape (n_frames, frame_length) where frame k covers
    samples [k*hop, k*hop + frame_length) of the pre-emphasized signal. A
    clip shorter than one frame yields zero frames.
    """
    if grid is None:
        grid = FrameGrid()
    n = frame_count(clip.samples.size, grid)
    if n == 0:
        return np.empty((0, grid.frame_length), dtype=np.float64)
    emphasized = pre_emphasize(clip.samples, grid.pre_emphasis)
    idx = np.arange(grid.frame_length)[None, :] + grid.hop * np.arange(n)[:, None]
    return emphasized[idx] * grid.window[None, :]
