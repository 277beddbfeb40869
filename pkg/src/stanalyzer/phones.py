"""Phone posteriors, phonological-category posteriors, and phone decoding.

The acoustic model is a pluggable interface: anything that turns feature
rows into one probability distribution per frame. A trainable
class-conditional Gaussian model ships as the reference implementation;
test doubles and future neural models plug in behind the same contract.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from importlib import resources

import numpy as np

CATEGORIES = (
    "vowel",
    "plosive",
    "fricative",
    "affricate",
    "nasal",
    "approximant",
    "silence",
)

SILENCE_PHONE = "sil"
MIN_SEGMENT_FRAMES = 3
MIN_EXAMPLES_PER_PHONE = 10
VARIANCE_FLOOR = 1e-4
# the background model must be flatter than any trained phone, otherwise the
# one-class limit degenerates to uniform posteriors
BACKGROUND_VAR_INFLATION = 4.0

MODEL_MAGIC = b"STAM"
MODEL_VERSION = 1


class DimensionMismatch(ValueError):
    """Feature dimensionality does not match the model."""


class InsufficientData(ValueError):
    """No phone reached the minimum training example count."""


@dataclass(frozen=True)
class PhoneSet:
    """Ordered phone inventory with a phone -> category table."""

    phones: tuple[str, ...]
    category_of: dict[str, str]

    def __post_init__(self):
        if len(set(self.phones)) != len(self.phones):
            raise ValueError("phone symbols must be unique")
        if SILENCE_PHONE not in self.phones:
            raise ValueError("phone set must contain 'sil'")
        if self.category_of.get(SILENCE_PHONE) != "silence":
            raise ValueError("'sil' must map to the silence category")
        for phone in self.phones:
            category = self.category_of.get(phone)
            if category not in CATEGORIES:
                raise ValueError(f"phone {phone!r} has invalid category {category!r}")
        present = {self.category_of[p] for p in self.phones}
        for category in CATEGORIES:
            if category == "affricate":
                continue  # may be empty in reduced sets
            if category not in present:
                raise ValueError(f"category {category!r} has no phones")

    def __len__(self) -> int:
        return len(self.phones)

    def index(self, phone: str) -> int:
        return self.phones.index(phone)

    def category_index_of(self, phone: str) -> int:
        return CATEGORIES.index(self.category_of[phone])

    @property
    def category_matrix(self) -> np.ndarray:
        """(n_phones, 7) indicator matrix mapping phone mass to categories."""
        m = np.zeros((len(self.phones), len(CATEGORIES)))
        for i, phone in enumerate(self.phones):
            m[i, self.category_index_of(phone)] = 1.0
        return m


def parse_phone_table(text: str) -> PhoneSet:
    """Parse the plain-text table format: one `phone<TAB>category` per line."""
    phones = []
    category_of = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"bad phone table line: {line!r}")
        phone, category = parts[0].strip(), parts[1].strip()
        phones.append(phone)
        category_of[phone] = category
    return PhoneSet(phones=tuple(phones), category_of=category_of)


def default_phone_set() -> PhoneSet:
    """The shipped 39-phone inventory plus sil."""
    text = resources.files("stanalyzer.data").joinpath("phones_en.tsv").read_text()
    return parse_phone_table(text)


@dataclass(frozen=True)
class Posteriorgram:
    """Per-frame probability rows over a phone set."""

    frame_times_s: np.ndarray  # (n_frames,)
    p: np.ndarray  # (n_frames, n_phones), rows sum to 1
    phone_set: PhoneSet

    @property
    def n_frames(self) -> int:
        return self.p.shape[0]


def validate_posterior_rows(p: np.ndarray, atol: float = 1e-6) -> None:
    if np.any(p < 0):
        raise ValueError("posterior entries must be nonnegative")
    sums = p.sum(axis=1)
    if p.shape[0] and np.max(np.abs(sums - 1.0)) > atol:
        raise ValueError("posterior rows must sum to 1")


@dataclass(frozen=True)
class PhoneSegment:
    phone: str
    start_s: float
    end_s: float
    mean_posterior: float

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


class GaussianAcousticModel:
    """Class-conditional diagonal Gaussians over feature rows.

    Phones absent from training score against a single background Gaussian
    fit to all rows. Posteriors are likelihoods normalized per frame (the
    prior is uniform over the inventory, so it cancels).
    """

    def __init__(
        self,
        phone_set: PhoneSet,
        means: np.ndarray,
        variances: np.ndarray,
        present: np.ndarray,
        background_mean: np.ndarray,
        background_var: np.ndarray,
        priors: np.ndarray | None = None,
    ):
        self.phone_set = phone_set
        self.means = means
        self.variances = variances
        self.present = present
        self.background_mean = background_mean
        self.background_var = background_var
        if priors is None:
            priors = np.full(len(phone_set), 1.0 / len(phone_set))
        self.priors = priors

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def log_likelihoods(self, rows: np.ndarray) -> np.ndarray:
        """(n_rows, n_phones) diagonal-Gaussian log densities."""
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        if rows.shape[1] != self.dim:
            raise DimensionMismatch(
                f"model expects {self.dim}-dim rows, got {rows.shape[1]}"
            )
        n_phones = len(self.phone_set)
        means = np.where(self.present[:, None], self.means, self.background_mean)
        variances = np.where(self.present[:, None], self.variances, self.background_var)
        diff = rows[:, None, :] - means[None, :, :]  # (n, phones, d)
        quad = np.sum(diff**2 / variances[None, :, :], axis=2)
        log_norm = np.sum(np.log(2.0 * np.pi * variances), axis=1)  # (phones,)
        out = -0.5 * (quad + log_norm[None, :])
        assert out.shape == (rows.shape[0], n_phones)
        return out

    def posterior_rows(self, rows: np.ndarray) -> np.ndarray:
        log_lik = self.log_likelihoods(rows)
        shifted = log_lik - log_lik.max(axis=1, keepdims=True)
        expd = np.exp(shifted)
        return expd / expd.sum(axis=1, keepdims=True)


def forward(model, features) -> Posteriorgram:
    """Run the acoustic model on a FeatureMatrix; one distribution per frame."""
    rows = features.mfcc
    p = model.posterior_rows(rows)
    validate_posterior_rows(p)
    if p.shape[0] != rows.shape[0]:
        raise ValueError("model returned wrong row count")
    return Posteriorgram(
        frame_times_s=features.frame_times_s, p=p, phone_set=model.phone_set
    )


def train_reference_model(
    rows: np.ndarray, labels: list[str], phone_set: PhoneSet
) -> GaussianAcousticModel:
    """Fit per-phone diagonal Gaussians from labeled feature rows.

    Phones with fewer than 10 examples are treated as absent; if no phone
    reaches 10 examples, raises InsufficientData.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] != len(labels):
        raise ValueError("rows and labels must align")
    labels = np.asarray(labels)
    n_phones = len(phone_set)
    dim = rows.shape[1]

    means = np.zeros((n_phones, dim))
    variances = np.ones((n_phones, dim))
    present = np.zeros(n_phones, dtype=bool)
    for i, phone in enumerate(phone_set.phones):
        member = rows[labels == phone]
        if member.shape[0] < MIN_EXAMPLES_PER_PHONE:
            continue
        present[i] = True
        means[i] = member.mean(axis=0)
        variances[i] = np.maximum(member.var(axis=0), VARIANCE_FLOOR)

    if not present.any():
        raise InsufficientData(
            f"no phone has {MIN_EXAMPLES_PER_PHONE} or more training examples"
        )

    background_mean = rows.mean(axis=0)
    background_var = np.maximum(
        rows.var(axis=0) * BACKGROUND_VAR_INFLATION, VARIANCE_FLOOR
    )
    return GaussianAcousticModel(
        phone_set=phone_set,
        means=means,
        variances=variances,
        present=present,
        background_mean=background_mean,
        background_var=background_var,
    )


def category_posteriors(posteriors: Posteriorgram) -> np.ndarray:
    """(n_frames, 7) distributions over phonological categories."""
    out = posteriors.p @ posteriors.phone_set.category_matrix
    validate_posterior_rows(out)
    return out


def decode_phones(
    posteriors: Posteriorgram,
    hop_s: float = 0.010,
    min_frames: int = MIN_SEGMENT_FRAMES,
) -> list[PhoneSegment]:
    """Collapse framewise argmax into phone segments ("phonetic text").

    Runs shorter than min_frames are absorbed into the neighboring run
    with the higher mean posterior (preceding run on ties), leftmost short
    run first, until every run is long enough or only one remains. The
    segment times tile the frame span exactly.
    """
    p = posteriors.p
    n = p.shape[0]
    if n == 0:
        return []
    phone_idx = np.argmax(p, axis=1)  # argmax takes the lowest index on ties

    runs = _collapse(phone_idx)
    while len(runs) > 1:
        short = [r for r in runs if r[2] - r[1] < min_frames]
        if not short:
            break
        pos = runs.index(short[0])
        neighbors = []
        if pos > 0:
            neighbors.append(pos - 1)
        if pos < len(runs) - 1:
            neighbors.append(pos + 1)
        best = max(neighbors, key=lambda j: (_run_mean(p, runs[j]), -j))
        runs[pos] = (runs[best][0], runs[pos][1], runs[pos][2])
        merged = []
        for run in runs:
            if merged and merged[-1][0] == run[0]:
                merged[-1] = (run[0], merged[-1][1], run[2])
            else:
                merged.append(run)
        runs = merged

    t0 = float(posteriors.frame_times_s[0]) if posteriors.frame_times_s.size else 0.0
    segments = []
    for phone, start, end in runs:
        segments.append(
            PhoneSegment(
                phone=posteriors.phone_set.phones[phone],
                start_s=t0 + start * hop_s,
                end_s=t0 + end * hop_s,
                mean_posterior=_run_mean(p, (phone, start, end)),
            )
        )
    return segments


def _collapse(phone_idx: np.ndarray) -> list[tuple[int, int, int]]:
    """Run-length encode to (phone, start_frame, end_frame) half-open runs."""
    runs = []
    start = 0
    for i in range(1, phone_idx.size + 1):
        if i == phone_idx.size or phone_idx[i] != phone_idx[start]:
            runs.append((int(phone_idx[start]), start, i))
            start = i
    return runs


def _run_mean(p: np.ndarray, run: tuple[int, int, int]) -> float:
    phone, start, end = run
    return float(np.mean(p[start:end, phone]))


def save_model(model: GaussianAcousticModel) -> bytes:
    """Versioned little-endian binary: magic, layout, phone list, parameters."""
    phones = model.phone_set.phones
    parts = [
        MODEL_MAGIC,
        struct.pack("<III", MODEL_VERSION, len(phones), model.dim),
    ]
    for phone in phones:
        encoded = phone.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)) + encoded)
        encoded_cat = model.phone_set.category_of[phone].encode("utf-8")
        parts.append(struct.pack("<H", len(encoded_cat)) + encoded_cat)
    parts.append(model.present.astype("<u1").tobytes())
    parts.append(model.priors.astype("<f8").tobytes())
    parts.append(model.means.astype("<f8").tobytes())
    parts.append(model.variances.astype("<f8").tobytes())
    parts.append(model.background_mean.astype("<f8").tobytes())
    parts.append(model.background_var.astype("<f8").tobytes())
    return b"".join(parts)


def load_model(data: bytes) -> GaussianAcousticModel:
    if data[:4] != MODEL_MAGIC:
        raise ValueError("bad model magic")
    version, n_phones, dim = struct.unpack_from("<III", data, 4)
    if version != MODEL_VERSION:
        raise ValueError(f"unsupported model version {version}")
    pos = 4 + 12
    phones = []
    category_of = {}
    for _ in range(n_phones):
        (length,) = struct.unpack_from("<H", data, pos)
        pos += 2
        phone = data[pos : pos + length].decode("utf-8")
        pos += length
        (length,) = struct.unpack_from("<H", data, pos)
        pos += 2
        category_of[phone] = data[pos : pos + length].decode("utf-8")
        pos += length
        phones.append(phone)
    phone_set = PhoneSet(phones=tuple(phones), category_of=category_of)

    present = np.frombuffer(data, dtype="<u1", count=n_phones, offset=pos).astype(bool)
    pos += n_phones
    priors = np.frombuffer(data, dtype="<f8", count=n_phones, offset=pos)
    pos += n_phones * 8
    matrix = n_phones * dim
    means = np.frombuffer(data, dtype="<f8", count=matrix, offset=pos).reshape(
        n_phones, dim
    )
    pos += matrix * 8
    variances = np.frombuffer(data, dtype="<f8", count=matrix, offset=pos).reshape(
        n_phones, dim
    )
    pos += matrix * 8
    background_mean = np.frombuffer(data, dtype="<f8", count=dim, offset=pos)
    pos += dim * 8
    background_var = np.frombuffer(data, dtype="<f8", count=dim, offset=pos)
    return GaussianAcousticModel(
        phone_set=phone_set,
        means=means.copy(),
        variances=variances.copy(),
        present=present,
        background_mean=background_mean.copy(),
        background_var=background_var.copy(),
        priors=priors.copy(),
    )
