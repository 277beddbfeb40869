"""Autocorrelation pitch tracking for the voiced parts of a recording.

Normalized autocorrelation (NAC) over lags covering 50-450 Hz, with
parabolic peak interpolation. The NAC is amplitude-normalized, so estimates
are gain invariant. Among near-equal peaks the lowest lag wins, which keeps
the estimate off the half-frequency alias for periodic signals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioClip
from .vad import SpeechSegment

DEFAULT_FMIN = 50.0
DEFAULT_FMAX = 450.0
DEFAULT_VOICING_THRESHOLD = 0.6
DEFAULT_WINDOW_S = 0.040
OCTAVE_PEAK_RATIO = 0.90  # peaks within this ratio of the max compete; lowest lag wins


@dataclass(frozen=True)
class PitchTrack:
    """Per-frame f0 estimates; absent frames hold NaN and voicing < 0.6."""

    frame_times_s: np.ndarray
    f0_hz: np.ndarray  # NaN where absent
    voicing: np.ndarray

    def present(self) -> np.ndarray:
        return ~np.isnan(self.f0_hz)


def _normalized_autocorrelation(x: np.ndarray) -> np.ndarray:
    """NAC(tau) = sum x[n] x[n+tau] / sqrt(E_head(tau) * E_tail(tau))."""
    n = x.size
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spectrum = np.fft.rfft(x, nfft)
    raw = np.fft.irfft(spectrum.real**2 + spectrum.imag**2, nfft)[:n]
    squares = np.cumsum(x * x)
    total = squares[-1]
    taus = np.arange(n)
    head = squares[n - 1 - taus]
    tail = total - np.concatenate([[0.0], squares[:-1]])
    denom = np.sqrt(head * tail)
    out = np.zeros(n)
    ok = denom > 0
    out[ok] = raw[ok] / denom[ok]
    return out


def estimate_frame_f0(
    frame: np.ndarray,
    rate: int,
    fmin: float = DEFAULT_FMIN,
    fmax: float = DEFAULT_FMAX,
    voicing_threshold: float = DEFAULT_VOICING_THRESHOLD,
) -> tuple[float | None, float]:
    """Estimate (f0_hz or None, confidence) for one analysis window.

    Confidence is the maximum NAC value over the candidate lag range; the
    frame is unvoiced when it falls below voicing_threshold. An all-zero
    frame is unvoiced with confidence 0.
    """
    x = np.asarray(frame, dtype=np.float64)
    lag_min = int(np.ceil(rate / fmax))
    lag_max = int(np.floor(rate / fmin))
    if x.size < lag_max * 2:
        raise ValueError(f"window of {x.size} samples is too short for {fmin} Hz")
    if not np.any(x):
        return None, 0.0
    x = x - x.mean()
    if not np.any(x):
        return None, 0.0

    nac = _normalized_autocorrelation(x)
    search = nac[lag_min : lag_max + 1]
    confidence = float(np.max(search))
    if confidence < voicing_threshold:
        return None, confidence

    taus = np.arange(lag_min, lag_max + 1)
    is_peak = (nac[taus] > nac[taus - 1]) & (nac[taus] >= nac[taus + 1])
    peak_lags = taus[is_peak]
    if peak_lags.size == 0:
        lag = int(taus[np.argmax(search)])
    else:
        strong = peak_lags[nac[peak_lags] >= OCTAVE_PEAK_RATIO * confidence]
        lag = int(strong[0]) if strong.size else int(peak_lags[np.argmax(nac[peak_lags])])

    refined = lag + _parabolic_offset(nac, lag)
    f0 = float(np.clip(rate / refined, fmin, fmax))
    return f0, confidence


def _parabolic_offset(values: np.ndarray, index: int) -> float:
    if index <= 0 or index >= values.size - 1:
        return 0.0
    left, mid, right = values[index - 1], values[index], values[index + 1]
    denom = left - 2 * mid + right
    if denom == 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))


def track_pitch(
    clip: AudioClip,
    segments: list[SpeechSegment],
    hop: int = 160,
    window_s: float = DEFAULT_WINDOW_S,
    n_frames: int | None = None,
    fmin: float = DEFAULT_FMIN,
    fmax: float = DEFAULT_FMAX,
    voicing_threshold: float = DEFAULT_VOICING_THRESHOLD,
) -> PitchTrack:
    """Per-frame pitch on the shared 10 ms hop, gated by the VAD segments.

    Frames outside the segments are forced absent. Present values get a
    3-frame median smooth so single-frame octave spikes do not survive.
    """
    rate = clip.sample_rate
    window = int(round(window_s * rate))
    if n_frames is None:
        n_frames = max((clip.samples.size - 400) // hop + 1, 0)
    hop_s = hop / rate

    f0 = np.full(n_frames, np.nan)
    voicing = np.zeros(n_frames)
    inside = np.zeros(n_frames, dtype=bool)
    for seg in segments:
        first = int(np.ceil(seg.start_s / hop_s - 1e-9))
        last = int(np.floor(seg.end_s / hop_s - 1e-9))
        inside[max(first, 0) : min(last + 1, n_frames)] = True

    for k in np.flatnonzero(inside):
        start = k * hop
        if start + window > clip.samples.size:
            continue
        est, conf = estimate_frame_f0(
            clip.samples[start : start + window], rate, fmin, fmax, voicing_threshold
        )
        voicing[k] = conf
        if est is not None:
            f0[k] = est

    f0 = _median3_present(f0)
    return PitchTrack(
        frame_times_s=np.arange(n_frames) * hop_s, f0_hz=f0, voicing=voicing
    )


def _median3_present(f0: np.ndarray) -> np.ndarray:
    out = f0.copy()
    present = np.flatnonzero(~np.isnan(f0))
    for k in present:
        neighborhood = f0[max(k - 1, 0) : k + 2]
        out[k] = np.median(neighborhood[~np.isnan(neighborhood)])
    return out
