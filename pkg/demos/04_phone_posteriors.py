"""Train the reference acoustic model and decode phonetic text.

Builds a toy phone inventory, trains class-conditional Gaussians on
synthetic feature clusters, runs the forward pass, folds phones into
phonological categories, and decodes a segment sequence.
"""

import numpy as np

from stanalyzer.features import FeatureMatrix
from stanalyzer.phones import (
    CATEGORIES,
    Posteriorgram,
    category_posteriors,
    decode_phones,
    forward,
    parse_phone_table,
    train_reference_model,
)

TABLE = "\n".join(
    ["aa\tvowel", "t\tplosive", "s\tfricative", "n\tnasal", "l\tapproximant", "sil\tsilence"]
)
phone_set = parse_phone_table(TABLE)
rng = np.random.default_rng(3)

# one well-separated Gaussian cluster per phone, 13-dim like real MFCCs
centers = {phone: rng.normal(0, 4.0, 13) for phone in phone_set.phones}
rows, labels = [], []
for phone, center in centers.items():
    rows.append(center + rng.normal(0, 0.4, (40, 13)))
    labels += [phone] * 40
model = train_reference_model(np.vstack(rows), labels, phone_set)
print(f"trained on {len(labels)} rows; phones present: "
      f"{[p for p, ok in zip(phone_set.phones, model.present) if ok]}")

# a fake utterance: sil s s s aa aa aa aa t sil  (one frame each x 4)
sequence = ["sil"] * 4 + ["s"] * 12 + ["aa"] * 16 + ["t"] * 6 + ["sil"] * 6
frames = np.vstack([centers[p] + rng.normal(0, 0.4, 13) for p in sequence])
features = FeatureMatrix(mfcc=frames, log_energy=np.zeros(len(sequence)))

posteriors = forward(model, features)
print(f"posteriors: {posteriors.p.shape}, every row sums to "
      f"{posteriors.p.sum(axis=1).mean():.6f}")

categories = category_posteriors(posteriors)
dominant = [CATEGORIES[i] for i in categories.argmax(axis=1)]
print("dominant category per frame (condensed):",
      [dominant[i] for i in range(0, len(dominant), 6)])

segments = decode_phones(posteriors)
print("decoded phonetic text:")
for seg in segments:
    print(f"  {seg.phone:>3}  [{seg.start_s:.2f}, {seg.end_s:.2f}] s  conf {seg.mean_posterior:.2f}")
