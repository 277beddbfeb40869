"""Therapist-vs-client speaker filtering.

Embeddings are MFCC statistics pooling (mean || std per coefficient) with
the c0 mean pinned to zero so loudness cannot act as the speaker cue. The
classifier is a soft-margin linear separator trained by deterministic dual
coordinate descent; it refuses to publish unless it separates the
enrollment data perfectly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

EMBEDDING_DIM = 26
MIN_FRAMES = 10
SVM_C = 1.0
SVM_TOL = 1e-6
SVM_MAX_PASSES = 10_000

THERAPIST = "therapist"
CLIENT = "client"

SPEAKER_MODEL_MAGIC = b"STSM"
SPEAKER_MODEL_VERSION = 1


class SegmentTooShort(ValueError):
    """Fewer than the minimum frames needed for statistics pooling."""


class NotSeparableWell(ValueError):
    """Enrollment data could not be separated; caller must re-enroll."""


@dataclass(frozen=True)
class SpeakerEmbedding:
    v: np.ndarray  # length 26: mean(c0..c12) with v[0] = 0, then std(c0..c12)

    def __post_init__(self):
        v = np.asarray(self.v, dtype=np.float64)
        object.__setattr__(self, "v", v)
        if v.shape != (EMBEDDING_DIM,):
            raise ValueError(f"embedding must have {EMBEDDING_DIM} values")
        if not np.all(np.isfinite(v)):
            raise ValueError("embedding must be finite")
        if np.any(v[13:] < 0):
            raise ValueError("std components must be nonnegative")


@dataclass(frozen=True)
class SpeakerTurn:
    segment_id: int
    label: str
    score: float


def embed(segment_rows: np.ndarray) -> SpeakerEmbedding:
    """Statistics pooling over a segment's MFCC rows.

    Order-invariant by construction. The c0 mean slot is zeroed (loudness
    is not a speaker trait); the c0 std stays.
    """
    rows = np.asarray(segment_rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != 13:
        raise ValueError("expected (n_frames, 13) MFCC rows")
    if rows.shape[0] < MIN_FRAMES:
        raise SegmentTooShort(f"{rows.shape[0]} frames < {MIN_FRAMES}")
    # sum each column in sorted order so a frame permutation cannot change
    # the result even at the bit level
    ordered = np.sort(rows, axis=0)
    mean = ordered.sum(axis=0) / rows.shape[0]
    deviations = np.sort((rows - mean) ** 2, axis=0)
    std = np.sqrt(deviations.sum(axis=0) / rows.shape[0])
    mean[0] = 0.0
    return SpeakerEmbedding(v=np.concatenate([mean, std]))


class SpeakerModel:
    """Published linear separator over standardized embeddings.

    decision(v) > 0 means client, otherwise therapist.
    """

    labels = (THERAPIST, CLIENT)

    def __init__(self, scale_mean, scale_std, w, b, train_margin):
        self.scale_mean = np.asarray(scale_mean, dtype=np.float64)
        self.scale_std = np.asarray(scale_std, dtype=np.float64)
        self.w = np.asarray(w, dtype=np.float64)
        self.b = float(b)
        self.train_margin = float(train_margin)

    def decision(self, embedding: SpeakerEmbedding) -> float:
        z = (embedding.v - self.scale_mean) / self.scale_std
        return float(self.w @ z + self.b)

    def classify(self, embedding: SpeakerEmbedding) -> tuple[str, float]:
        score = self.decision(embedding)
        return (CLIENT if score > 0 else THERAPIST), abs(score)


def _dual_coordinate_descent(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """L1-loss soft-margin SVM in the dual, fixed visiting order.

    x carries an appended bias column. Returns the augmented weight vector.
    """
    n, d = x.shape
    alpha = np.zeros(n)
    w = np.zeros(d)
    diag = (x * x).sum(axis=1)
    for _ in range(SVM_MAX_PASSES):
        worst = 0.0
        for i in range(n):
            gradient = y[i] * (w @ x[i]) - 1.0
            if alpha[i] == 0.0:
                projected = min(gradient, 0.0)
            elif alpha[i] == SVM_C:
                projected = max(gradient, 0.0)
            else:
                projected = gradient
            worst = max(worst, abs(projected))
            if projected != 0.0:
                before = alpha[i]
                alpha[i] = min(max(alpha[i] - gradient / diag[i], 0.0), SVM_C)
                if alpha[i] != before:
                    w = w + (alpha[i] - before) * y[i] * x[i]
        if worst < SVM_TOL:
            break
    return w


def train_speaker_model(
    therapist_embeddings: list[SpeakerEmbedding],
    client_embeddings: list[SpeakerEmbedding],
) -> SpeakerModel:
    """Fit and publish the separator; raises NotSeparableWell below 100 %.

    Deterministic: the same enrollment data always yields the same weights.
    """
    if len(therapist_embeddings) < 3 or len(client_embeddings) < 3:
        raise ValueError("need at least 3 enrollment embeddings per side")
    x = np.array([e.v for e in therapist_embeddings + client_embeddings])
    y = np.array([-1.0] * len(therapist_embeddings) + [1.0] * len(client_embeddings))

    scale_mean = x.mean(axis=0)
    scale_std = np.maximum(x.std(axis=0), 1e-12)
    z = (x - scale_mean) / scale_std
    augmented = np.hstack([z, np.ones((z.shape[0], 1))])

    w_aug = _dual_coordinate_descent(augmented, y)
    w, b = w_aug[:-1], w_aug[-1]

    scores = z @ w + b
    if np.any(y * scores <= 0.0):
        raise NotSeparableWell("enrollment data not separated; re-enroll")

    norm = np.linalg.norm(w)
    margin = float(np.min(y * scores) / norm) if norm > 0 else 0.0
    return SpeakerModel(scale_mean, scale_std, w, b, margin)


def filter_client_segments(
    segments,
    embeddings: list[SpeakerEmbedding | None],
    model: SpeakerModel,
) -> tuple[list[SpeakerTurn], list[SpeakerTurn]]:
    """Partition VAD segments into (client_turns, therapist_turns).

    Segments without an embedding (too short) inherit the label of the
    nearest labeled segment by midpoint time, score 0. Every segment gets
    exactly one label.
    """
    if len(segments) != len(embeddings):
        raise ValueError("one embedding slot per segment required")
    labeled: dict[int, SpeakerTurn] = {}
    for i, (seg, emb) in enumerate(zip(segments, embeddings)):
        if emb is None:
            continue
        label, score = model.classify(emb)
        labeled[i] = SpeakerTurn(segment_id=seg.id, label=label, score=score)

    turns: list[SpeakerTurn] = []
    for i, (seg, emb) in enumerate(zip(segments, embeddings)):
        if i in labeled:
            turns.append(labeled[i])
            continue
        if labeled:
            midpoint = (seg.start_s + seg.end_s) / 2.0
            nearest = min(
                labeled,
                key=lambda j: (
                    abs((segments[j].start_s + segments[j].end_s) / 2.0 - midpoint),
                    j,
                ),
            )
            label = labeled[nearest].label
        else:
            label = CLIENT  # nothing to compare against; keep the audio analyzable
        turns.append(SpeakerTurn(segment_id=seg.id, label=label, score=0.0))

    client = [t for t in turns if t.label == CLIENT]
    therapist = [t for t in turns if t.label == THERAPIST]
    return client, therapist


def save_speaker_model(model: SpeakerModel) -> bytes:
    dims = model.w.size
    return b"".join(
        [
            SPEAKER_MODEL_MAGIC,
            struct.pack("<II", SPEAKER_MODEL_VERSION, dims),
            model.scale_mean.astype("<f8").tobytes(),
            model.scale_std.astype("<f8").tobytes(),
            model.w.astype("<f8").tobytes(),
            struct.pack("<dd", model.b, model.train_margin),
        ]
    )


def load_speaker_model(data: bytes) -> SpeakerModel:
    if data[:4] != SPEAKER_MODEL_MAGIC:
        raise ValueError("bad speaker model magic")
    version, dims = struct.unpack_from("<II", data, 4)
    if version != SPEAKER_MODEL_VERSION:
        raise ValueError(f"unsupported speaker model version {version}")
    pos = 12
    scale_mean = np.frombuffer(data, dtype="<f8", count=dims, offset=pos).copy()
    pos += dims * 8
    scale_std = np.frombuffer(data, dtype="<f8", count=dims, offset=pos).copy()
    pos += dims * 8
    w = np.frombuffer(data, dtype="<f8", count=dims, offset=pos).copy()
    pos += dims * 8
    b, margin = struct.unpack_from("<dd", data, pos)
    return SpeakerModel(scale_mean, scale_std, w, b, margin)
