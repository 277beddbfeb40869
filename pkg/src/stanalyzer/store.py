"""On-device persistence: directory-per-session with a JSON index.

Nothing in this module touches the network; it takes only local paths.
Every artifact carries an FNV-1a checksum verified on load, artifact
writes are atomic (temp file + rename), and the index is rewritten last so
it always references fully written sessions only.
"""

from __future__ import annotations

import errno
import json
import os
import secrets
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

TASKS = ("reading", "conversation")
STATES = ("recording", "processing", "analyzed", "failed")
_STATE_FLOW = {
    "recording": ("processing",),
    "processing": ("analyzed", "failed"),
    "analyzed": (),
    "failed": (),
}

AUDIO_ARTIFACT = "audio.wav"
FEATURES_ARTIFACT = "features.bin"
ANALYSIS_ARTIFACT = "analysis.json"
SPEAKER_MODEL_ARTIFACT = "speaker.model"
ENROLL_ARTIFACT = "enroll.wav"


class NotFound(KeyError):
    """Unknown session id."""


class CorruptArtifact(ValueError):
    """Stored artifact does not match its recorded checksum."""


class WriteConflict(RuntimeError):
    """Another writer holds this session id."""


class StorageFull(OSError):
    """The device ran out of space."""


class InvalidTransition(ValueError):
    """Session state may only move recording -> processing -> analyzed|failed."""


def fnv1a64(data: bytes) -> str:
    """64-bit FNV-1a rendered as 16 hex digits. Corruption check, not crypto."""
    value = 0xCBF29CE484222325
    for byte in data:
        value ^= byte
        value = (value * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return f"{value:016x}"


def new_session_id() -> str:
    return secrets.token_hex(16)  # 128 random bits


def utc_now_ms() -> int:
    return int(time.time() * 1000)


@dataclass(frozen=True)
class Session:
    id: str
    created_at: int  # UTC milliseconds
    task: str
    reading_text: str | None = None
    state: str = "recording"
    error: str | None = None  # populated when state == failed

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.state not in STATES:
            raise ValueError(f"unknown state {self.state!r}")
        if (self.task == "reading") != (self.reading_text is not None):
            raise ValueError("reading_text present iff task is reading")


@dataclass
class LoadedSession:
    """Manifest view plus lazy artifact access."""

    session: Session
    artifacts: dict[str, dict]
    _store: "SessionStore" = field(repr=False, default=None)

    def read_artifact(self, name: str) -> bytes:
        return self._store._read_artifact(self.session.id, name, self.artifacts)


class SessionStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.sessions_dir = self.root / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.index_path = self.sessions_dir / "index.json"
        self._index_lock = threading.Lock()

    # -- low-level write seams (tests inject failures here) ----------------

    def _write_bytes(self, path: Path, data: bytes) -> None:
        tmp = path.with_name(path.name + ".tmp")
        try:
            with open(tmp, "wb") as handle:
                handle.write(data)
                handle.flush()
                os.fsync(handle.fileno())
            os.replace(tmp, path)
        except OSError as exc:
            if exc.errno == errno.ENOSPC:
                raise StorageFull(str(exc)) from exc
            raise

    def _write_index(self, entries: list[dict]) -> None:
        payload = json.dumps({"sessions": entries}, indent=1).encode("utf-8")
        self._write_bytes(self.index_path, payload)

    # -- locking ------------------------------------------------------------

    def _acquire_lock(self, session_id: str):
        lock_path = self.sessions_dir / f"{session_id}.lock"
        try:
            fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise WriteConflict(f"session {session_id} is being written") from None
        os.close(fd)
        return lock_path

    # -- index --------------------------------------------------------------

    def _read_index(self) -> list[dict]:
        if not self.index_path.exists():
            return []
        with open(self.index_path, "r", encoding="utf-8") as handle:
            return json.load(handle)["sessions"]

    def _upsert_index(self, session: Session) -> None:
        with self._index_lock:
            entries = [e for e in self._read_index() if e["id"] != session.id]
            entries.append(
                {
                    "id": session.id,
                    "created_at": session.created_at,
                    "task": session.task,
                    "state": session.state,
                }
            )
            entries.sort(key=lambda e: (-e["created_at"], e["id"]))
            self._write_index(entries)

    # -- public API ----------------------------------------------------------

    def create(self, session: Session) -> str:
        """Register a fresh session (manifest now, artifacts later)."""
        lock = self._acquire_lock(session.id)
        try:
            directory = self.sessions_dir / session.id
            directory.mkdir(parents=True, exist_ok=True)
            self._write_manifest(session, {})
            self._upsert_index(session)
        finally:
            os.unlink(lock)
        return session.id

    def save_session(
        self,
        session: Session,
        audio: bytes,
        features: bytes | None = None,
        bundle: bytes | None = None,
        extra: dict[str, bytes] | None = None,
    ) -> str:
        """One-shot atomic save: artifacts, manifest, then the index."""
        artifacts = {AUDIO_ARTIFACT: audio}
        if features is not None:
            artifacts[FEATURES_ARTIFACT] = features
        if bundle is not None:
            artifacts[ANALYSIS_ARTIFACT] = bundle
        if extra:
            artifacts.update(extra)

        lock = self._acquire_lock(session.id)
        try:
            directory = self.sessions_dir / session.id
            directory.mkdir(parents=True, exist_ok=True)
            meta = {}
            for name, data in artifacts.items():
                self._write_bytes(directory / name, data)
                meta[name] = {"size": len(data), "fnv1a64": fnv1a64(data)}
            self._write_manifest(session, meta)
            self._upsert_index(session)
        finally:
            os.unlink(lock)
        return session.id

    def add_artifacts(
        self,
        session_id: str,
        artifacts: dict[str, bytes],
        new_state: str | None = None,
        error: str | None = None,
    ) -> Session:
        """Write more artifacts (and optionally advance state) atomically."""
        loaded = self.load(session_id)
        session = loaded.session
        if new_state is not None and new_state != session.state:
            if new_state not in _STATE_FLOW[session.state]:
                raise InvalidTransition(f"{session.state} -> {new_state}")
            session = replace(session, state=new_state)
        if error is not None:
            session = replace(session, error=error)

        lock = self._acquire_lock(session_id)
        try:
            directory = self.sessions_dir / session_id
            meta = dict(loaded.artifacts)
            for name, data in artifacts.items():
                self._write_bytes(directory / name, data)
                meta[name] = {"size": len(data), "fnv1a64": fnv1a64(data)}
            self._write_manifest(session, meta)
            self._upsert_index(session)
        finally:
            os.unlink(lock)
        return session

    def load(self, session_id: str) -> LoadedSession:
        manifest_path = self.sessions_dir / session_id / "manifest.json"
        if not manifest_path.exists():
            raise NotFound(session_id)
        with open(manifest_path, "r", encoding="utf-8") as handle:
            manifest = json.load(handle)
        session = Session(
            id=manifest["id"],
            created_at=manifest["created_at"],
            task=manifest["task"],
            reading_text=manifest.get("reading_text"),
            state=manifest["state"],
            error=manifest.get("error"),
        )
        return LoadedSession(session=session, artifacts=manifest["artifacts"], _store=self)

    def _read_artifact(self, session_id: str, name: str, meta: dict) -> bytes:
        if name not in meta:
            raise NotFound(f"{session_id}/{name}")
        path = self.sessions_dir / session_id / name
        if not path.exists():
            raise CorruptArtifact(f"{name} missing on disk")
        data = path.read_bytes()
        if fnv1a64(data) != meta[name]["fnv1a64"]:
            raise CorruptArtifact(f"{name} checksum mismatch")
        return data

    def list_sessions(
        self,
        task: str | None = None,
        state: str | None = None,
        created_from: int | None = None,
        created_to: int | None = None,
    ) -> list[dict]:
        """Index summaries, newest first, ties broken by id. Filters are
        conjunctive."""
        entries = self._read_index()
        out = []
        for entry in entries:
            if task is not None and entry["task"] != task:
                continue
            if state is not None and entry["state"] != state:
                continue
            if created_from is not None and entry["created_at"] < created_from:
                continue
            if created_to is not None and entry["created_at"] > created_to:
                continue
            out.append(entry)
        out.sort(key=lambda e: (-e["created_at"], e["id"]))
        return out

    def repair_scan(self) -> list[str]:
        """Fully written session dirs that the index does not know about."""
        indexed = {e["id"] for e in self._read_index()}
        orphans = []
        for path in sorted(self.sessions_dir.iterdir()):
            if not path.is_dir() or path.name in indexed:
                continue
            if (path / "manifest.json").exists():
                orphans.append(path.name)
        return orphans

    def repair(self) -> list[str]:
        """Re-add recoverable sessions to the index."""
        recovered = []
        for session_id in self.repair_scan():
            try:
                loaded = self.load(session_id)
            except (NotFound, ValueError, KeyError):
                continue
            self._upsert_index(loaded.session)
            recovered.append(session_id)
        return recovered

    def _write_manifest(self, session: Session, artifact_meta: dict) -> None:
        manifest = {
            "id": session.id,
            "created_at": session.created_at,
            "task": session.task,
            "reading_text": session.reading_text,
            "state": session.state,
            "error": session.error,
            "artifacts": artifact_meta,
        }
        payload = json.dumps(manifest, indent=1, sort_keys=True).encode("utf-8")
        self._write_bytes(self.sessions_dir / session.id / "manifest.json", payload)
