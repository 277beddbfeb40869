"""Rule-based detection of potential stutter events.

Three detectors over decoded phone segments: prolongations (phone duration
versus the session median for that phone), repetitions (consecutive
unigram/bigram occurrences across short silent gaps), and blocks (long
silences strictly inside a client turn). Every threshold is a config
parameter; therapists tune sensitivity per client.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import AnalyzerConfig
from .phones import SILENCE_PHONE, PhoneSegment, PhoneSet

PROLONGATION = "prolongation"
REPETITION = "repetition"
BLOCK = "block"


@dataclass(frozen=True)
class StutterEvent:
    kind: str
    start_s: float
    end_s: float
    score: float
    evidence: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise ValueError("event must have positive duration")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must lie in [0, 1]")


def _median(values: list[float]) -> float:
    return float(np.median(np.asarray(values)))


def detect_prolongations(
    phones: list[PhoneSegment],
    phone_set: PhoneSet,
    config: AnalyzerConfig | None = None,
) -> list[StutterEvent]:
    """Flag phones held far longer than their typical session duration.

    The reference duration is the median of the same phone across the
    session, falling back to the category median when the phone occurs
    fewer than 3 times.
    """
    config = config or AnalyzerConfig()
    spoken = [p for p in phones if p.phone != SILENCE_PHONE]
    by_phone: dict[str, list[float]] = {}
    by_category: dict[str, list[float]] = {}
    for p in spoken:
        by_phone.setdefault(p.phone, []).append(p.duration_s)
        by_category.setdefault(phone_set.category_of[p.phone], []).append(p.duration_s)

    events = []
    for p in spoken:
        durations = by_phone[p.phone]
        if len(durations) >= 3:
            median, source = _median(durations), "phone"
        else:
            category = phone_set.category_of[p.phone]
            median, source = _median(by_category[category]), "category"
        if median <= 0:
            continue
        ratio = p.duration_s / median
        if ratio >= config.prolongation_ratio and p.duration_s >= config.prolongation_min_s:
            score = min(1.0, p.duration_s / (config.prolongation_score_ratio * median))
            events.append(
                StutterEvent(
                    kind=PROLONGATION,
                    start_s=p.start_s,
                    end_s=p.end_s,
                    score=score,
                    evidence={
                        "phone": p.phone,
                        "duration_s": p.duration_s,
                        "median_s": median,
                        "ratio": ratio,
                        "median_source": source,
                    },
                )
            )
    return events


def _compacted(phones: list[PhoneSegment]) -> tuple[list[PhoneSegment], list[float]]:
    """Non-sil phones in time order plus the gap duration before each
    (gap[0] is 0)."""
    spoken = sorted(
        (p for p in phones if p.phone != SILENCE_PHONE), key=lambda p: p.start_s
    )
    gaps = [0.0]
    for prev, nxt in zip(spoken, spoken[1:]):
        gaps.append(max(nxt.start_s - prev.end_s, 0.0))
    return spoken, gaps


def detect_repetitions(
    phones: list[PhoneSegment], config: AnalyzerConfig | None = None
) -> list[StutterEvent]:
    """Flag k >= 2 consecutive occurrences of a unigram or bigram unit.

    Occurrences may be separated only by silent gaps shorter than the
    configured maximum.
    """
    config = config or AnalyzerConfig()
    max_gap = config.repetition_max_gap_s
    spoken, gaps = _compacted(phones)
    events = []

    # unigrams: maximal runs of the same phone across short gaps
    i = 0
    while i < len(spoken):
        j = i
        while (
            j + 1 < len(spoken)
            and spoken[j + 1].phone == spoken[i].phone
            and gaps[j + 1] < max_gap
        ):
            j += 1
        count = j - i + 1
        if count >= 2:
            events.append(
                _repetition_event(spoken[i].start_s, spoken[j].end_s, [spoken[i].phone], count, config)
            )
        i = j + 1

    # bigrams: maximal chains of a repeating (p, q) unit; p == q is already
    # covered by the unigram rule
    i = 0
    while i + 3 < len(spoken):
        unit = (spoken[i].phone, spoken[i + 1].phone)
        if unit[0] == unit[1] or gaps[i + 1] >= max_gap:
            i += 1
            continue
        count = 1
        j = i
        while (
            j + 3 < len(spoken)
            and spoken[j + 2].phone == unit[0]
            and spoken[j + 3].phone == unit[1]
            and gaps[j + 2] < max_gap  # between occurrences
            and gaps[j + 3] < max_gap  # inside the next occurrence
        ):
            count += 1
            j += 2
        if count >= 2:
            events.append(
                _repetition_event(
                    spoken[i].start_s, spoken[j + 1].end_s, list(unit), count, config
                )
            )
            i = j + 2
        else:
            i += 1
    return events


def _repetition_event(start_s, end_s, unit, count, config) -> StutterEvent:
    return StutterEvent(
        kind=REPETITION,
        start_s=start_s,
        end_s=end_s,
        score=min(1.0, (count - 1) / config.repetition_score_div),
        evidence={"unit": unit, "count": count},
    )


def detect_blocks(
    phones: list[PhoneSegment],
    labeled_segments: list[tuple[float, float, str]],
    config: AnalyzerConfig | None = None,
) -> list[StutterEvent]:
    """Flag long silences strictly inside a client turn.

    labeled_segments are (start_s, end_s, label) VAD segments in time
    order. A client turn is a maximal run of consecutive client segments;
    the silences considered are the gaps between non-sil speech inside one
    turn, so speech borders the candidate on both sides. Silences at turn
    boundaries (therapist speaks next) never qualify.
    """
    config = config or AnalyzerConfig()
    spoken = sorted(
        (p for p in phones if p.phone != SILENCE_PHONE), key=lambda p: p.start_s
    )

    # client turns: maximal runs of client segments, broken whenever a
    # therapist segment interleaves
    runs: list[tuple[float, float]] = []
    current: tuple[float, float] | None = None
    for start_s, end_s, label in labeled_segments:
        if label == "client":
            if current is None:
                current = (start_s, end_s)
            else:
                current = (current[0], end_s)
        else:
            if current is not None:
                runs.append(current)
                current = None
    if current is not None:
        runs.append(current)

    events = []
    for turn_start, turn_end in runs:
        inside = [p for p in spoken if p.start_s >= turn_start - 1e-9 and p.end_s <= turn_end + 1e-9]
        for prev, nxt in zip(inside, inside[1:]):
            gap = nxt.start_s - prev.end_s
            if config.block_min_s <= gap <= config.block_max_s:
                events.append(
                    StutterEvent(
                        kind=BLOCK,
                        start_s=prev.end_s,
                        end_s=nxt.start_s,
                        score=min(1.0, gap / config.block_score_div),
                        evidence={"gap_s": gap},
                    )
                )
    return events


def merge_events(events: list[StutterEvent]) -> list[StutterEvent]:
    """Merge overlapping events of the same kind (max score wins).

    Different kinds never merge. Output is sorted by (start_s, kind) and
    the operation is idempotent.
    """
    by_kind: dict[str, list[StutterEvent]] = {}
    for event in events:
        by_kind.setdefault(event.kind, []).append(event)

    merged: list[StutterEvent] = []
    for kind in sorted(by_kind):
        ordered = sorted(by_kind[kind], key=lambda e: (e.start_s, e.end_s))
        current = ordered[0]
        for event in ordered[1:]:
            if event.start_s < current.end_s:  # strict overlap: shared interior
                best = current if current.score >= event.score else event
                current = StutterEvent(
                    kind=kind,
                    start_s=current.start_s,
                    end_s=max(current.end_s, event.end_s),
                    score=best.score,
                    evidence=best.evidence,
                )
            else:
                merged.append(current)
                current = event
        merged.append(current)
    return sorted(merged, key=lambda e: (e.start_s, e.kind))
