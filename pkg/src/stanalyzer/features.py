"""Spectral front-end: power spectrogram, mel energies, MFCCs, log-energy.

The configuration is the canonical speech setup: 512-point FFT, 26
triangular mel filters over 0-8000 Hz, orthonormal DCT-II truncated to 13
coefficients, natural log with a 1e-10 floor.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from .audio import CANONICAL_RATE, FrameGrid

FFT_SIZE = 512
N_MEL_FILTERS = 26
N_COEFFS = 13
LOG_FLOOR = 1e-10

FEATURES_MAGIC = b"STFM"
FEATURES_VERSION = 1


@dataclass(frozen=True)
class SpectrogramSlice:
    """Per-frame power spectrum rows covering [start_s, end_s)."""

    power: np.ndarray  # (n_frames, fft_size // 2 + 1), values >= 0
    bin_hz: float
    start_s: float
    end_s: float


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-frame MFCC rows plus log-energy, on the 10 ms hop grid."""

    mfcc: np.ndarray  # (n_frames, N_COEFFS)
    log_energy: np.ndarray  # (n_frames,)
    hop_s: float = 0.010
    frame_s: float = 0.025

    def __post_init__(self):
        if self.mfcc.shape[0] != self.log_energy.shape[0]:
            raise ValueError("mfcc and log_energy row counts differ")
        if not (np.all(np.isfinite(self.mfcc)) and np.all(np.isfinite(self.log_energy))):
            raise ValueError("features must be finite")

    @property
    def n_frames(self) -> int:
        return self.mfcc.shape[0]

    @property
    def frame_times_s(self) -> np.ndarray:
        return np.arange(self.n_frames) * self.hop_s


def power_spectrum(
    frames: np.ndarray,
    fft_size: int = FFT_SIZE,
    sample_rate: int = CANONICAL_RATE,
    start_s: float = 0.0,
    hop_s: float = 0.010,
) -> SpectrogramSlice:
    """|DFT|^2 of each windowed frame, zero-padded to fft_size.

    Returns bins 0..fft_size/2 (inclusive); deterministic for identical
    input.
    """
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    if frames.shape[1] > fft_size:
        raise ValueError("frame length exceeds fft_size")
    spectrum = np.fft.rfft(frames, n=fft_size, axis=1)
    power = (spectrum.real**2 + spectrum.imag**2)
    end_s = start_s + frames.shape[0] * hop_s
    return SpectrogramSlice(
        power=power, bin_hz=sample_rate / fft_size, start_s=start_s, end_s=end_s
    )


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    n_filters: int = N_MEL_FILTERS,
    fft_size: int = FFT_SIZE,
    sample_rate: int = CANONICAL_RATE,
    f_lo: float = 0.0,
    f_hi: float = 8000.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Triangular filters uniformly spaced on the mel scale.

    Returns (weights, center_freqs_hz) where weights has shape
    (n_filters, fft_size // 2 + 1). Each filter is nonnegative and unimodal
    over the bins.
    """
    mel_points = np.linspace(hz_to_mel(f_lo), hz_to_mel(f_hi), n_filters + 2)
    hz_points = mel_to_hz(mel_points)
    bin_freqs = np.arange(fft_size // 2 + 1) * (sample_rate / fft_size)

    weights = np.zeros((n_filters, bin_freqs.size))
    for i in range(n_filters):
        left, center, right = hz_points[i], hz_points[i + 1], hz_points[i + 2]
        rising = (bin_freqs - left) / (center - left)
        falling = (right - bin_freqs) / (right - center)
        weights[i] = np.maximum(0.0, np.minimum(rising, falling))
    return weights, hz_points[1:-1]


def mel_energies(spec: SpectrogramSlice, filterbank: np.ndarray | None = None) -> np.ndarray:
    """Apply the mel filterbank to power rows; output is (n_frames, n_filters)."""
    if filterbank is None:
        filterbank, _ = mel_filterbank()
    return spec.power @ filterbank.T


def mfcc(mel_rows: np.ndarray, n_coeffs: int = N_COEFFS, floor: float = LOG_FLOOR) -> np.ndarray:
    """Orthonormal DCT-II of the floored log mel energies, truncated."""
    mel_rows = np.atleast_2d(np.asarray(mel_rows, dtype=np.float64))
    log_mel = np.log(np.maximum(mel_rows, floor))
    return dct(log_mel, type=2, norm="ortho", axis=1)[:, :n_coeffs]


def log_energy(frames: np.ndarray, floor: float = LOG_FLOOR) -> np.ndarray:
    """ln(max(sum of squares, floor)) per windowed frame."""
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    return np.log(np.maximum((frames**2).sum(axis=1), floor))


def extract_features(frames: np.ndarray, grid: FrameGrid | None = None) -> FeatureMatrix:
    """Full front-end: frames -> power -> mel -> MFCC (+ log-energy)."""
    if grid is None:
        grid = FrameGrid()
    spec = power_spectrum(frames, hop_s=grid.hop_s)
    coeffs = mfcc(mel_energies(spec))
    return FeatureMatrix(
        mfcc=coeffs,
        log_energy=log_energy(frames),
        hop_s=grid.hop_s,
        frame_s=grid.frame_s,
    )


def feature_matrix_to_bytes(fm: FeatureMatrix) -> bytes:
    """Serialize to the little-endian float32 wire format.

    Layout: magic, version u32, n_frames u32, n_coeffs u32, hop_s f64,
    frame_s f64, then per frame n_coeffs MFCC floats followed by the
    log-energy float. Writing the result of :func:`feature_matrix_from_bytes`
    reproduces the input bytes exactly.
    """
    n_coeffs = fm.mfcc.shape[1]
    header = FEATURES_MAGIC + struct.pack(
        "<IIIdd", FEATURES_VERSION, fm.n_frames, n_coeffs, fm.hop_s, fm.frame_s
    )
    rows = np.hstack([fm.mfcc, fm.log_energy[:, None]]).astype("<f4")
    return header + rows.tobytes()


def feature_matrix_from_bytes(data: bytes) -> FeatureMatrix:
    if data[:4] != FEATURES_MAGIC:
        raise ValueError("bad feature file magic")
    version, n_frames, n_coeffs, hop_s, frame_s = struct.unpack_from("<IIIdd", data, 4)
    if version != FEATURES_VERSION:
        raise ValueError(f"unsupported feature file version {version}")
    offset = 4 + struct.calcsize("<IIIdd")
    expected = n_frames * (n_coeffs + 1) * 4
    if len(data) - offset != expected:
        raise ValueError("feature payload size mismatch")
    rows = np.frombuffer(data, dtype="<f4", offset=offset).reshape(n_frames, n_coeffs + 1)
    rows = rows.astype(np.float64)
    return FeatureMatrix(
        mfcc=rows[:, :n_coeffs], log_energy=rows[:, n_coeffs], hop_s=hop_s, frame_s=frame_s
    )
