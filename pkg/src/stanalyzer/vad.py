"""Energy-based voice activity detection and segmentation.

The threshold adapts to the recording: 10th-percentile log-energy plus a
2.3-nat margin (about +10 dB over the noise-floor estimate), so detection
survives gain differences between sessions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioClip

DEFAULT_PERCENTILE = 10.0
DEFAULT_MARGIN = 2.3
DEFAULT_GAP_CLOSE_S = 0.2
DEFAULT_MIN_SEGMENT_S = 0.25


class SegmentOutOfRange(ValueError):
    """A segment lies outside the clip it should slice."""


@dataclass(frozen=True)
class SpeechSegment:
    id: int
    start_s: float
    end_s: float
    mean_log_energy: float

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise ValueError("segment must have positive duration")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


def detect_speech(
    log_energy: np.ndarray,
    hop_s: float = 0.010,
    percentile: float = DEFAULT_PERCENTILE,
    margin: float = DEFAULT_MARGIN,
    gap_close_s: float = DEFAULT_GAP_CLOSE_S,
    min_segment_s: float = DEFAULT_MIN_SEGMENT_S,
) -> list[SpeechSegment]:
    """Segment a log-energy track into speech regions.

    Frames above the adaptive threshold are speech; gaps shorter than
    gap_close_s are closed, then runs shorter than min_segment_s are
    dropped. Degenerate input (constant energy) yields no segments.
    """
    log_energy = np.asarray(log_energy, dtype=np.float64)
    if log_energy.size == 0:
        raise ValueError("need at least one frame")

    threshold = np.percentile(log_energy, percentile) + margin
    speech = log_energy > threshold
    if not np.any(speech):
        return []

    runs = _runs(speech)

    # close sub-gap_close pauses between consecutive runs
    max_gap = int(round(gap_close_s / hop_s))
    closed = [runs[0]]
    for start, end in runs[1:]:
        if start - closed[-1][1] < max_gap:
            closed[-1] = (closed[-1][0], end)
        else:
            closed.append((start, end))

    min_frames = int(round(min_segment_s / hop_s))
    segments = []
    for start, end in closed:
        if end - start < min_frames:
            continue
        segments.append(
            SpeechSegment(
                id=len(segments),
                start_s=start * hop_s,
                end_s=end * hop_s,
                mean_log_energy=float(np.mean(log_energy[start:end])),
            )
        )
    return segments


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Half-open [start, end) index ranges of True runs."""
    padded = np.concatenate([[False], mask, [False]])
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return list(zip(edges[0::2], edges[1::2]))


def segment_clip(clip: AudioClip, segments: list[SpeechSegment]) -> list[AudioClip]:
    """Sample-accurate sub-clips, one per segment."""
    out = []
    for seg in segments:
        start = int(round(seg.start_s * clip.sample_rate))
        end = int(round(seg.end_s * clip.sample_rate))
        if start < 0 or end > clip.samples.size:
            raise SegmentOutOfRange(
                f"segment [{seg.start_s}, {seg.end_s}] outside clip of "
                f"{clip.duration_s:.3f} s"
            )
        out.append(
            AudioClip(
                samples=clip.samples[start:end],
                sample_rate=clip.sample_rate,
                source_id=clip.source_id,
            )
        )
    return out
