"""The full deterministic analysis pipeline, recording bytes to bundle.

Stages: decode -> resample -> frame -> features -> VAD -> speaker filter ->
pitch -> posteriors -> categories -> phone decoding -> event detection.
Same audio + config + model always serializes to byte-identical JSON.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import json

import numpy as np

from . import PIPELINE_VERSION
from .audio import (
    CANONICAL_RATE,
    AudioClip,
    FrameGrid,
    decode_recording,
    frame_signal,
    resample,
)
from .config import AnalyzerConfig
from .events import detect_blocks, detect_prolongations, detect_repetitions, merge_events
from .features import FeatureMatrix, extract_features
from .phones import (
    CATEGORIES,
    GaussianAcousticModel,
    PhoneSegment,
    Posteriorgram,
    category_posteriors,
    decode_phones,
    default_phone_set,
    forward,
    train_reference_model,
)
from .pitch import PitchTrack, track_pitch
from .speaker import (
    CLIENT,
    NotSeparableWell,
    SpeakerModel,
    SpeakerTurn,
    embed,
    filter_client_segments,
    train_speaker_model,
)
from .vad import SpeechSegment, detect_speech

ProgressFn = Callable[[float, str], None]


@dataclass
class AnalysisBundle:
    segments: list[SpeechSegment]
    turns: list[SpeakerTurn]
    pitch_track: PitchTrack
    posterior_times_s: np.ndarray
    category_rows: np.ndarray  # (len(posterior_times_s), 7)
    phone_segments: list[PhoneSegment]
    events: list
    pipeline_version: str
    config_snapshot: dict


@dataclass
class AnalysisResult:
    clip: AudioClip
    features: FeatureMatrix
    bundle: AnalysisBundle
    speaker_model: SpeakerModel | None


def segment_frame_range(seg: SpeechSegment, hop_s: float, n_frames: int) -> tuple[int, int]:
    """Half-open frame index range whose frame starts fall inside the segment."""
    first = max(int(np.ceil(seg.start_s / hop_s - 1e-9)), 0)
    last = min(int(np.floor(seg.end_s / hop_s - 1e-9)) + 1, n_frames)
    return first, max(last, first)


def _enrollment_chunks(rows: np.ndarray, chunk_frames: int, min_frames: int = 10):
    """Split feature rows into enrollment chunks of about one second."""
    chunks = []
    for start in range(0, rows.shape[0], chunk_frames):
        piece = rows[start : start + chunk_frames]
        if piece.shape[0] >= min_frames:
            chunks.append(embed(piece))
    return chunks


def _speech_rows(features: FeatureMatrix, segments, hop_s: float) -> list[np.ndarray]:
    out = []
    for seg in segments:
        first, last = segment_frame_range(seg, hop_s, features.n_frames)
        out.append(features.mfcc[first:last])
    return out


def enrollment_embeddings_from_clip(
    clip: AudioClip, config: AnalyzerConfig
) -> tuple[list, float]:
    """(1 s chunk embeddings, total speech seconds) for an enrollment clip."""
    grid = FrameGrid()
    features = extract_features(frame_signal(clip, grid), grid)
    if features.n_frames == 0:
        return [], 0.0
    segments = detect_speech(
        features.log_energy,
        hop_s=grid.hop_s,
        percentile=config.vad_percentile,
        margin=config.vad_margin_nats,
        gap_close_s=config.vad_gap_close_s,
        min_segment_s=config.vad_min_segment_s,
    )
    speech_s = sum(s.duration_s for s in segments)
    chunk_frames = int(round(config.enroll_chunk_s / grid.hop_s))
    chunks = []
    for rows in _speech_rows(features, segments, grid.hop_s):
        chunks.extend(_enrollment_chunks(rows, chunk_frames))
    return chunks, speech_s


def run_analysis(
    audio_bytes: bytes,
    config: AnalyzerConfig,
    model: GaussianAcousticModel,
    therapist_embeddings: list | None = None,
    source_id: str = "",
    progress: ProgressFn | None = None,
) -> AnalysisResult:
    """Run the whole pipeline on one recording."""

    def report(fraction, stage):
        if progress is not None:
            progress(fraction, stage)

    clip = decode_recording(audio_bytes, source_id=source_id)
    report(0.05, "decoded")
    clip = resample(clip, CANONICAL_RATE)
    report(0.10, "resampled")

    grid = FrameGrid()
    frames = frame_signal(clip, grid)
    report(0.20, "framed")
    features = extract_features(frames, grid)
    report(0.35, "features")

    if features.n_frames == 0:
        segments = []
    else:
        segments = detect_speech(
            features.log_energy,
            hop_s=grid.hop_s,
            percentile=config.vad_percentile,
            margin=config.vad_margin_nats,
            gap_close_s=config.vad_gap_close_s,
            min_segment_s=config.vad_min_segment_s,
        )
    report(0.45, "vad")

    turns, speaker_model = _filter_speakers(
        features, segments, grid.hop_s, config, therapist_embeddings
    )
    label_of = {t.segment_id: t.label for t in turns}
    client_segments = [s for s in segments if label_of[s.id] == CLIENT]
    report(0.55, "speakers")

    pitch_track = track_pitch(
        clip,
        client_segments,
        hop=grid.hop,
        window_s=config.pitch_window_s,
        n_frames=features.n_frames,
        fmin=config.pitch_fmin_hz,
        fmax=config.pitch_fmax_hz,
        voicing_threshold=config.pitch_voicing_threshold,
    )
    report(0.70, "pitch")

    posterior_times = []
    category_rows = []
    phone_segments: list[PhoneSegment] = []
    for seg in client_segments:
        first, last = segment_frame_range(seg, grid.hop_s, features.n_frames)
        if last <= first:
            continue
        seg_features = FeatureMatrix(
            mfcc=features.mfcc[first:last],
            log_energy=features.log_energy[first:last],
            hop_s=features.hop_s,
            frame_s=features.frame_s,
        )
        pg = forward(model, seg_features)
        pg = Posteriorgram(
            frame_times_s=features.frame_times_s[first:last],
            p=pg.p,
            phone_set=pg.phone_set,
        )
        posterior_times.append(pg.frame_times_s)
        category_rows.append(category_posteriors(pg))
        phone_segments.extend(
            decode_phones(pg, hop_s=grid.hop_s, min_frames=config.decoder_min_frames)
        )
    report(0.85, "posteriors")

    labeled_segments = [(s.start_s, s.end_s, label_of[s.id]) for s in segments]
    events = merge_events(
        detect_prolongations(phone_segments, model.phone_set, config)
        + detect_repetitions(phone_segments, config)
        + detect_blocks(phone_segments, labeled_segments, config)
    )
    report(0.97, "events")

    bundle = AnalysisBundle(
        segments=segments,
        turns=turns,
        pitch_track=pitch_track,
        posterior_times_s=(
            np.concatenate(posterior_times) if posterior_times else np.array([])
        ),
        category_rows=(
            np.vstack(category_rows) if category_rows else np.zeros((0, len(CATEGORIES)))
        ),
        phone_segments=phone_segments,
        events=events,
        pipeline_version=PIPELINE_VERSION,
        config_snapshot=config.snapshot(),
    )
    report(1.0, "done")
    return AnalysisResult(
        clip=clip, features=features, bundle=bundle, speaker_model=speaker_model
    )


def _filter_speakers(
    features: FeatureMatrix,
    segments: list[SpeechSegment],
    hop_s: float,
    config: AnalyzerConfig,
    therapist_embeddings: list | None,
) -> tuple[list[SpeakerTurn], SpeakerModel | None]:
    """Label every segment. Degrades to all-client when enrollment is
    missing or not separable (recorded audio must stay analyzable)."""
    if not segments:
        return [], None

    all_client = [SpeakerTurn(segment_id=s.id, label=CLIENT, score=0.0) for s in segments]
    if not therapist_embeddings:
        return all_client, None

    rows_per_segment = _speech_rows(features, segments, hop_s)
    chunk_frames = int(round(config.enroll_chunk_s / hop_s))
    client_enroll = _enrollment_chunks(rows_per_segment[0], chunk_frames)
    if len(client_enroll) < 3 or len(therapist_embeddings) < 3:
        return all_client, None

    try:
        model = train_speaker_model(therapist_embeddings, client_enroll)
    except NotSeparableWell:
        return all_client, None

    embeddings = []
    for rows in rows_per_segment:
        embeddings.append(embed(rows) if rows.shape[0] >= 10 else None)
    client_turns, therapist_turns = filter_client_segments(segments, embeddings, model)
    ordered = sorted(client_turns + therapist_turns, key=lambda t: t.segment_id)
    return ordered, model


def default_acoustic_model(dim: int = 13) -> GaussianAcousticModel:
    """Deterministic stand-in model so the service runs without weights.

    Trained on a fixed synthetic dataset (seeded); real deployments load a
    model trained on labeled speech instead.
    """
    phone_set = default_phone_set()
    rng = np.random.default_rng(7)
    rows, labels = [], []
    for i, phone in enumerate(phone_set.phones):
        center = rng.normal(0.0, 3.0, dim)
        rows.append(center + rng.normal(0.0, 0.5, (20, dim)))
        labels.extend([phone] * 20)
    return train_reference_model(np.vstack(rows), labels, phone_set)


# -- canonical JSON ---------------------------------------------------------


def _round(value, digits):
    if isinstance(value, float):
        return round(value, digits)
    if isinstance(value, dict):
        return {k: _round(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round(v, digits) for v in value]
    return value


def bundle_to_dict(bundle: AnalysisBundle) -> dict:
    """JSON-ready view: times at millisecond precision, values at 6 digits."""
    track = bundle.pitch_track
    f0 = [None if np.isnan(v) else round(float(v), 6) for v in track.f0_hz]
    return {
        "pipeline_version": bundle.pipeline_version,
        "config_snapshot": _round(bundle.config_snapshot, 6),
        "segments": [
            {"id": s.id, "start_s": round(s.start_s, 3), "end_s": round(s.end_s, 3)}
            for s in bundle.segments
        ],
        "turns": [
            {"segment_id": t.segment_id, "label": t.label, "score": round(t.score, 6)}
            for t in bundle.turns
        ],
        "pitch_track": {
            "t_s": [round(float(t), 3) for t in track.frame_times_s],
            "f0_hz": f0,
            "voicing": [round(float(v), 6) for v in track.voicing],
        },
        "category_posteriors": {
            "categories": list(CATEGORIES),
            "t_s": [round(float(t), 3) for t in bundle.posterior_times_s],
            "p": [[round(float(v), 6) for v in row] for row in bundle.category_rows],
        },
        "phone_segments": [
            {
                "phone": p.phone,
                "start_s": round(p.start_s, 3),
                "end_s": round(p.end_s, 3),
                "conf": round(p.mean_posterior, 6),
            }
            for p in bundle.phone_segments
        ],
        "events": [
            {
                "kind": e.kind,
                "start_s": round(e.start_s, 3),
                "end_s": round(e.end_s, 3),
                "score": round(e.score, 6),
                "evidence": _round(e.evidence, 6),
            }
            for e in bundle.events
        ],
    }


def bundle_to_json_bytes(bundle: AnalysisBundle) -> bytes:
    return canonical_json_bytes(bundle_to_dict(bundle))


def canonical_json_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
