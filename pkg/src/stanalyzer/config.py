"""Service configuration: every tunable threshold in one flat table.

Config files are plain ``key = value`` text; ``STAN_``-prefixed environment
variables override file values. The full snapshot is embedded in every
analysis bundle so results stay reproducible.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields


@dataclass
class AnalyzerConfig:
    sample_rate: int = 16000

    vad_percentile: float = 10.0
    vad_margin_nats: float = 2.3
    vad_gap_close_s: float = 0.2
    vad_min_segment_s: float = 0.25

    pitch_fmin_hz: float = 50.0
    pitch_fmax_hz: float = 450.0
    pitch_voicing_threshold: float = 0.6
    pitch_window_s: float = 0.040

    decoder_min_frames: int = 3

    prolongation_ratio: float = 3.0
    prolongation_min_s: float = 0.30
    prolongation_score_ratio: float = 6.0
    repetition_max_gap_s: float = 0.15
    repetition_score_div: float = 3.0
    block_min_s: float = 0.5
    block_max_s: float = 3.0
    block_score_div: float = 2.0

    enroll_min_speech_s: float = 5.0
    enroll_chunk_s: float = 1.0

    spectrogram_max_span_s: float = 10.0
    display_max_rows_per_s: int = 100
    workers: int = 2

    def snapshot(self) -> dict:
        return asdict(self)


def _coerce(raw: str, kind: type):
    raw = raw.strip()
    if raw and raw[0] in "\"'" and raw[-1] == raw[0]:
        raw = raw[1:-1]
    if kind is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return kind(raw)


def parse_config_text(text: str, base: AnalyzerConfig | None = None) -> AnalyzerConfig:
    """Parse ``key = value`` lines over a base config. Unknown keys fail."""
    config = base or AnalyzerConfig()
    types = {f.name: f.type for f in fields(AnalyzerConfig)}
    concrete = {f.name: type(getattr(config, f.name)) for f in fields(AnalyzerConfig)}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected key = value")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in types:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        setattr(config, key, _coerce(raw, concrete[key]))
    return config


def load_config(path: str | None = None, env: dict | None = None) -> AnalyzerConfig:
    """Load defaults, then a config file if given, then STAN_ env overrides."""
    config = AnalyzerConfig()
    if path is not None:
        with open(path, "r", encoding="utf-8") as handle:
            config = parse_config_text(handle.read(), config)
    env = os.environ if env is None else env
    concrete = {f.name: type(getattr(config, f.name)) for f in fields(AnalyzerConfig)}
    for name in concrete:
        override = env.get(f"STAN_{name.upper()}")
        if override is not None:
            setattr(config, name, _coerce(override, concrete[name]))
    return config
