"""Therapist-vs-client filtering on statistics-pooled embeddings.

Two synthetic voices take alternating turns; after enrollment the linear
separator removes the therapist's segments from the analysis set.
"""

import numpy as np

from stanalyzer.speaker import embed, filter_client_segments, train_speaker_model
from stanalyzer.vad import SpeechSegment

rng = np.random.default_rng(11)

def voice_rows(center, n_frames=120):
    return rng.normal(center, 0.05, (n_frames, 13))

therapist_center = np.linspace(-1.0, 1.0, 13)
client_center = np.linspace(1.0, -1.0, 13)

therapist_enroll = [embed(voice_rows(therapist_center)) for _ in range(5)]
client_enroll = [embed(voice_rows(client_center)) for _ in range(5)]
model = train_speaker_model(therapist_enroll, client_enroll)
print(f"published model: margin {model.train_margin:.3f}, |w| {np.linalg.norm(model.w):.3f}")

segments = [SpeechSegment(i, i * 3.0, i * 3.0 + 2.0, 0.0) for i in range(6)]
speakers = [client_center, therapist_center, client_center,
            client_center, therapist_center, client_center]
embeddings = [embed(voice_rows(center)) for center in speakers]

client_turns, therapist_turns = filter_client_segments(segments, embeddings, model)
print("client turns:   ", [t.segment_id for t in client_turns])
print("therapist turns:", [t.segment_id for t in therapist_turns])
for turn in sorted(client_turns + therapist_turns, key=lambda t: t.segment_id):
    print(f"  segment {turn.segment_id}: {turn.label:<9} (score {turn.score:.2f})")
