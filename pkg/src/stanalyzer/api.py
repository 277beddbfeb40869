"""Local HTTP service: session lifecycle, analysis jobs, data endpoints.

JSON over HTTP 1.1 on the local network; the service never makes an
outbound request and stores everything under its data directory. The
review UI on a second device consumes exactly these endpoints:

    POST /sessions                      create (task, reading_text?)
    GET  /sessions                      list summaries (filters)
    GET  /sessions/{id}                 manifest view incl. reading_text
    POST /sessions/{id}/enroll          therapist enrollment audio
    POST /sessions/{id}/recording       whole-recording upload, starts a job
    POST /sessions/{id}/chunks          raw 16 kHz mono s16 PCM append
    POST /sessions/{id}/finish          wrap chunks and start the job
    GET  /sessions/{id}/analysis        analysis bundle once analyzed
    GET  /sessions/{id}/spectrogram     ?from&to, spans under 10 s only
    GET  /sessions/{id}/audio           ?from&to, WAV slice for playback
    GET  /jobs/{id}                     job state and progress
"""

from __future__ import annotations

import json
import re
import struct
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .audio import (
    CANONICAL_RATE,
    MalformedContainer,
    UnsupportedEncoding,
    decode_recording,
    encode_recording,
    frame_signal,
    resample,
)
from .config import AnalyzerConfig
from .features import feature_matrix_to_bytes, power_spectrum
from .phones import GaussianAcousticModel
from .pipeline import (
    bundle_to_json_bytes,
    canonical_json_bytes,
    enrollment_embeddings_from_clip,
    run_analysis,
)
from .speaker import save_speaker_model
from .store import (
    ANALYSIS_ARTIFACT,
    AUDIO_ARTIFACT,
    ENROLL_ARTIFACT,
    FEATURES_ARTIFACT,
    SPEAKER_MODEL_ARTIFACT,
    NotFound,
    Session,
    SessionStore,
    new_session_id,
    utc_now_ms,
)


class ApiError(Exception):
    code = "internal"
    status = 500

    def __init__(self, message: str = "", **payload):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.payload = payload


class MissingReadingText(ApiError):
    code, status = "missing_reading_text", 400


class InvalidState(ApiError):
    code, status = "invalid_state", 409


class MalformedAudio(ApiError):
    code, status = "malformed_audio", 400


class TooLittleSpeech(ApiError):
    code, status = "too_little_speech", 400


class NotFoundError(ApiError):
    code, status = "not_found", 404


class NotReady(ApiError):
    code, status = "not_ready", 409


class SpanTooLong(ApiError):
    code, status = "span_too_long", 400


class RangeOutOfBounds(ApiError):
    code, status = "range_out_of_bounds", 400


@dataclass
class AnalysisJob:
    id: str
    session_id: str
    state: str = "queued"  # queued | running | done | failed
    progress: float = 0.0
    error: str | None = None

    def view(self) -> dict:
        return {
            "id": self.id,
            "session_id": self.session_id,
            "state": self.state,
            "progress": round(self.progress, 4),
            "error": self.error,
        }


class AnalyzerService:
    """All endpoint behavior, independent of the HTTP plumbing."""

    def __init__(
        self,
        data_dir: str | Path,
        config: AnalyzerConfig | None = None,
        model: GaussianAcousticModel | None = None,
    ):
        self.config = config or AnalyzerConfig()
        self.store = SessionStore(data_dir)
        if model is None:
            from .pipeline import default_acoustic_model

            model = default_acoustic_model()
        self.model = model
        self._jobs: dict[str, AnalysisJob] = {}
        self._active_job_by_session: dict[str, str] = {}
        self._jobs_lock = threading.Lock()
        self._workers = threading.Semaphore(self.config.workers)
        self._enroll_cache: dict[str, list] = {}
        self._chunk_buffers: dict[str, bytearray] = {}

    # -- session lifecycle ---------------------------------------------------

    def create_session(self, task: str, reading_text: str | None = None) -> dict:
        if task not in ("reading", "conversation"):
            raise ApiError(f"unknown task {task!r}")
        if task == "reading" and not reading_text:
            raise MissingReadingText("reading task requires reading_text")
        if task == "conversation":
            reading_text = None
        session = Session(
            id=new_session_id(),
            created_at=utc_now_ms(),
            task=task,
            reading_text=reading_text,
        )
        self.store.create(session)
        return self._session_view(session)

    def get_session(self, session_id: str) -> dict:
        return self._session_view(self._load(session_id).session)

    def list_sessions(self, **filters) -> list[dict]:
        return self.store.list_sessions(**filters)

    def enroll_therapist(self, session_id: str, audio_bytes: bytes) -> dict:
        loaded = self._load(session_id)
        if loaded.session.state != "recording":
            raise InvalidState("enrollment is only possible before the recording")
        clip = self._decode(audio_bytes)
        embeddings, speech_s = enrollment_embeddings_from_clip(clip, self.config)
        if speech_s < self.config.enroll_min_speech_s:
            raise TooLittleSpeech(
                f"{speech_s:.1f} s of speech; need {self.config.enroll_min_speech_s:.0f} s"
            )
        self.store.add_artifacts(session_id, {ENROLL_ARTIFACT: encode_recording(clip)})
        self._enroll_cache[session_id] = embeddings
        return {"status": "enrolled", "speech_s": round(speech_s, 3)}

    def submit_recording(self, session_id: str, audio_bytes: bytes) -> dict:
        loaded = self._load(session_id)
        if loaded.session.state != "recording":
            raise InvalidState(f"session is {loaded.session.state}")
        try:
            clip = self._decode(audio_bytes)
        except MalformedAudio as exc:
            # a broken upload parks the session in failed, with the message
            self.store.add_artifacts(session_id, {}, new_state="processing")
            self.store.add_artifacts(
                session_id, {}, new_state="failed", error=exc.message
            )
            raise
        canonical = encode_recording(clip)
        self.store.add_artifacts(
            session_id, {AUDIO_ARTIFACT: canonical}, new_state="processing"
        )
        return self._launch_job(session_id, canonical)

    def append_chunk(self, session_id: str, pcm_bytes: bytes) -> dict:
        loaded = self._load(session_id)
        if loaded.session.state != "recording":
            raise InvalidState(f"session is {loaded.session.state}")
        if len(pcm_bytes) % 2 != 0:
            raise MalformedAudio("chunk must be whole 16-bit samples")
        buffer = self._chunk_buffers.setdefault(session_id, bytearray())
        buffer.extend(pcm_bytes)
        return {"buffered_s": round(len(buffer) / 2 / CANONICAL_RATE, 3)}

    def finish_recording(self, session_id: str) -> dict:
        payload = bytes(self._chunk_buffers.get(session_id, b""))
        if not payload:
            raise MalformedAudio("no chunks buffered for this session")
        header = b"".join(
            [
                b"RIFF",
                struct.pack("<I", 36 + len(payload)),
                b"WAVE",
                b"fmt ",
                struct.pack(
                    "<IHHIIHH", 16, 1, 1, CANONICAL_RATE, CANONICAL_RATE * 2, 2, 16
                ),
                b"data",
                struct.pack("<I", len(payload)),
            ]
        )
        result = self.submit_recording(session_id, header + payload)
        self._chunk_buffers.pop(session_id, None)
        return result

    # -- jobs ------------------------------------------------------------------

    def _launch_job(self, session_id: str, canonical_audio: bytes) -> dict:
        job = AnalysisJob(id=new_session_id(), session_id=session_id)
        with self._jobs_lock:
            if session_id in self._active_job_by_session:
                raise InvalidState("a job is already running for this session")
            self._jobs[job.id] = job
            self._active_job_by_session[session_id] = job.id
        thread = threading.Thread(
            target=self._run_job, args=(job, canonical_audio), daemon=True
        )
        thread.start()
        return {"job_id": job.id, "session_id": session_id}

    def _run_job(self, job: AnalysisJob, canonical_audio: bytes) -> None:
        with self._workers:
            with self._jobs_lock:
                job.state = "running"
            try:
                therapist = self._therapist_embeddings(job.session_id)

                def on_progress(fraction, _stage):
                    with self._jobs_lock:
                        job.progress = max(job.progress, min(fraction, 0.99))

                result = run_analysis(
                    canonical_audio,
                    self.config,
                    self.model,
                    therapist_embeddings=therapist,
                    source_id=job.session_id,
                    progress=on_progress,
                )
                artifacts = {
                    FEATURES_ARTIFACT: feature_matrix_to_bytes(result.features),
                    ANALYSIS_ARTIFACT: bundle_to_json_bytes(result.bundle),
                }
                if result.speaker_model is not None:
                    artifacts[SPEAKER_MODEL_ARTIFACT] = save_speaker_model(
                        result.speaker_model
                    )
                self.store.add_artifacts(job.session_id, artifacts, new_state="analyzed")
                with self._jobs_lock:
                    job.progress = 1.0
                    job.state = "done"
            except Exception as exc:  # job failures must park the session, not raise
                try:
                    self.store.add_artifacts(
                        job.session_id, {}, new_state="failed", error=str(exc)
                    )
                except Exception:
                    pass
                with self._jobs_lock:
                    job.state = "failed"
                    job.error = str(exc)
            finally:
                with self._jobs_lock:
                    self._active_job_by_session.pop(job.session_id, None)

    def _therapist_embeddings(self, session_id: str):
        cached = self._enroll_cache.get(session_id)
        if cached is not None:
            return cached
        loaded = self._load(session_id)
        if ENROLL_ARTIFACT not in loaded.artifacts:
            return None
        clip = decode_recording(loaded.read_artifact(ENROLL_ARTIFACT))
        embeddings, _ = enrollment_embeddings_from_clip(clip, self.config)
        self._enroll_cache[session_id] = embeddings
        return embeddings

    def get_job(self, job_id: str) -> dict:
        with self._jobs_lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise NotFoundError(f"no job {job_id}")
            return job.view()

    # -- analysis data -----------------------------------------------------------

    def get_analysis(self, session_id: str) -> dict:
        loaded = self._load(session_id)
        state = loaded.session.state
        if state in ("recording", "processing"):
            raise NotReady("analysis not finished", progress=self._progress_of(session_id))
        if state == "failed":
            raise NotReady(
                f"analysis failed: {loaded.session.error or 'unknown error'}",
                progress=1.0,
            )
        return json.loads(loaded.read_artifact(ANALYSIS_ARTIFACT))

    def _progress_of(self, session_id: str) -> float:
        with self._jobs_lock:
            job_id = self._active_job_by_session.get(session_id)
            if job_id is None:
                return 0.0
            return round(self._jobs[job_id].progress, 4)

    def get_spectrogram(self, session_id: str, from_s: float, to_s: float) -> dict:
        clip = self._analyzed_clip(session_id)
        if from_s >= to_s:
            raise RangeOutOfBounds("from must be below to")
        if to_s - from_s >= self.config.spectrogram_max_span_s:
            raise SpanTooLong(
                f"span {to_s - from_s:.1f} s; spectrogram is limited to spans "
                f"below {self.config.spectrogram_max_span_s:.0f} s"
            )
        if from_s < 0 or to_s > clip.duration_s + 1e-9:
            raise RangeOutOfBounds("range outside the recording")
        start = int(round(from_s * clip.sample_rate))
        end = int(round(to_s * clip.sample_rate))
        piece = replace_samples(clip, clip.samples[start:end])
        frames = frame_signal(piece)
        spec = power_spectrum(frames, start_s=from_s)
        return {
            "from_s": from_s,
            "to_s": to_s,
            "start_s": from_s,
            "end_s": to_s,
            "bin_hz": spec.bin_hz,
            "hop_s": 0.010,
            "power": [[float(v) for v in row] for row in spec.power],
        }

    def get_audio_slice(self, session_id: str, from_s: float, to_s: float) -> bytes:
        clip = self._analyzed_clip(session_id)
        if from_s >= to_s or from_s < 0 or to_s > clip.duration_s + 1e-9:
            raise RangeOutOfBounds("bad audio range")
        start = int(round(from_s * clip.sample_rate))
        end = int(round(to_s * clip.sample_rate))
        return encode_recording(replace_samples(clip, clip.samples[start:end]))

    # -- helpers --------------------------------------------------------------

    def _analyzed_clip(self, session_id: str):
        loaded = self._load(session_id)
        if loaded.session.state != "analyzed":
            raise NotReady(f"session is {loaded.session.state}")
        return decode_recording(loaded.read_artifact(AUDIO_ARTIFACT))

    def _load(self, session_id: str):
        try:
            return self.store.load(session_id)
        except NotFound:
            raise NotFoundError(f"no session {session_id}") from None

    def _decode(self, audio_bytes: bytes):
        try:
            clip = decode_recording(audio_bytes)
            return resample(clip, CANONICAL_RATE)
        except (MalformedContainer, UnsupportedEncoding) as exc:
            raise MalformedAudio(str(exc)) from exc

    def _session_view(self, session: Session) -> dict:
        return {
            "id": session.id,
            "created_at": session.created_at,
            "task": session.task,
            "reading_text": session.reading_text,
            "state": session.state,
            "error": session.error,
        }


def replace_samples(clip, samples):
    from .audio import AudioClip

    return AudioClip(samples=samples, sample_rate=clip.sample_rate, source_id=clip.source_id)


# -- HTTP plumbing -------------------------------------------------------------

_ROUTES = [
    ("POST", re.compile(r"^/sessions$"), "route_create_session"),
    ("GET", re.compile(r"^/sessions$"), "route_list_sessions"),
    ("GET", re.compile(r"^/sessions/(?P<sid>[0-9a-f]{32})$"), "route_get_session"),
    ("POST", re.compile(r"^/sessions/(?P<sid>[0-9a-f]{32})/enroll$"), "route_enroll"),
    ("POST", re.compile(r"^/sessions/(?P<sid>[0-9a-f]{32})/recording$"), "route_recording"),
    ("POST", re.compile(r"^/sessions/(?P<sid>[0-9a-f]{32})/chunks$"), "route_chunks"),
    ("POST", re.compile(r"^/sessions/(?P<sid>[0-9a-f]{32})/finish$"), "route_finish"),
    ("GET", re.compile(r"^/sessions/(?P<sid>[0-9a-f]{32})/analysis$"), "route_analysis"),
    ("GET", re.compile(r"^/sessions/(?P<sid>[0-9a-f]{32})/spectrogram$"), "route_spectrogram"),
    ("GET", re.compile(r"^/sessions/(?P<sid>[0-9a-f]{32})/audio$"), "route_audio"),
    ("GET", re.compile(r"^/jobs/(?P<jid>[0-9a-f]{32})$"), "route_job"),
    ("GET", re.compile(r"^/health$"), "route_health"),
]

_STATIC_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "application/javascript",
    ".css": "text/css",
    ".map": "application/json",
    ".svg": "image/svg+xml",
}


class _Handler(BaseHTTPRequestHandler):
    service: AnalyzerService = None
    static_dir: Path | None = None
    protocol_version = "HTTP/1.1"

    def log_message(self, *args):  # tests stay quiet
        pass

    # -- I/O helpers ----------------------------------------------------------

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length", 0))
        return self.rfile.read(length) if length else b""

    def _json_body(self) -> dict:
        raw = self._body()
        if not raw:
            return {}
        try:
            parsed = json.loads(raw)
        except json.JSONDecodeError:
            raise ApiError("request body is not valid JSON")
        return parsed if isinstance(parsed, dict) else {}

    def _send_json(self, obj, status=200):
        payload = canonical_json_bytes(obj)
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _send_bytes(self, payload: bytes, content_type: str, status=200):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _query(self) -> dict:
        return {k: v[0] for k, v in parse_qs(urlparse(self.path).query).items()}

    def _float_param(self, query, name) -> float:
        if name not in query:
            raise ApiError(f"missing query parameter {name!r}")
        try:
            return float(query[name])
        except ValueError:
            raise ApiError(f"parameter {name!r} must be a number")

    # -- dispatch ---------------------------------------------------------------

    def _dispatch(self, method):
        path = urlparse(self.path).path
        for verb, pattern, handler_name in _ROUTES:
            if verb != method:
                continue
            match = pattern.match(path)
            if match:
                try:
                    getattr(self, handler_name)(**match.groupdict())
                except ApiError as exc:
                    body = {"error": exc.code, "message": exc.message, **exc.payload}
                    self._send_json(body, status=exc.status)
                except Exception as exc:  # pragma: no cover - defensive
                    self._send_json(
                        {"error": "internal", "message": str(exc)}, status=500
                    )
                return
        if method == "GET" and self._serve_static(path):
            return
        self._send_json({"error": "not_found", "message": path}, status=404)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def _serve_static(self, path: str) -> bool:
        if self.static_dir is None:
            return False
        name = "index.html" if path == "/" else path.lstrip("/")
        target = (self.static_dir / name).resolve()
        if not str(target).startswith(str(self.static_dir.resolve())):
            return False
        if not target.is_file():
            return False
        content_type = _STATIC_TYPES.get(target.suffix, "application/octet-stream")
        self._send_bytes(target.read_bytes(), content_type)
        return True

    # -- routes -------------------------------------------------------------------

    def route_create_session(self):
        body = self._json_body()
        out = self.service.create_session(
            task=body.get("task", ""), reading_text=body.get("reading_text")
        )
        self._send_json(out, status=201)

    def route_list_sessions(self):
        query = self._query()
        filters = {}
        if "task" in query:
            filters["task"] = query["task"]
        if "state" in query:
            filters["state"] = query["state"]
        if "from" in query:
            filters["created_from"] = int(query["from"])
        if "to" in query:
            filters["created_to"] = int(query["to"])
        self._send_json({"sessions": self.service.list_sessions(**filters)})

    def route_get_session(self, sid):
        self._send_json(self.service.get_session(sid))

    def route_enroll(self, sid):
        self._send_json(self.service.enroll_therapist(sid, self._body()))

    def route_recording(self, sid):
        self._send_json(self.service.submit_recording(sid, self._body()), status=202)

    def route_chunks(self, sid):
        self._send_json(self.service.append_chunk(sid, self._body()))

    def route_finish(self, sid):
        self._send_json(self.service.finish_recording(sid), status=202)

    def route_analysis(self, sid):
        self._send_json(self.service.get_analysis(sid))

    def route_spectrogram(self, sid):
        query = self._query()
        out = self.service.get_spectrogram(
            sid, self._float_param(query, "from"), self._float_param(query, "to")
        )
        self._send_json(out)

    def route_audio(self, sid):
        query = self._query()
        payload = self.service.get_audio_slice(
            sid, self._float_param(query, "from"), self._float_param(query, "to")
        )
        self._send_bytes(payload, "audio/wav")

    def route_job(self, jid):
        self._send_json(self.service.get_job(jid))

    def route_health(self):
        self._send_json({"ok": True})


def make_server(
    service: AnalyzerService,
    bind: str = "127.0.0.1:8321",
    static_dir: str | Path | None = None,
) -> ThreadingHTTPServer:
    """Build (not start) the HTTP server; caller runs serve_forever()."""
    host, _, port = bind.partition(":")
    handler = type(
        "BoundHandler",
        (_Handler,),
        {
            "service": service,
            "static_dir": Path(static_dir) if static_dir else None,
        },
    )
    return ThreadingHTTPServer((host, int(port or 8321)), handler)
