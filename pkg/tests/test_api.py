import http.client
import json
import threading
import time

import numpy as np
import pytest

from stanalyzer.api import AnalyzerService, make_server
from stanalyzer.config import AnalyzerConfig
from stanalyzer.pipeline import default_acoustic_model

from conftest import make_wav, therapist_enrollment_wav, tone, two_speaker_session

MODEL = default_acoustic_model()

# first client stretch is 3 s or more: the speaker-enrollment protocol takes
# three 1 s chunks from it
PLAN = [
    (None, 0.5),
    ("client", 3.0),
    (None, 0.8),
    ("therapist", 1.5),
    (None, 0.5),
    ("client", 1.5),
    (None, 0.5),
]


class Client:
    """Thin HTTP test client against the live service."""

    def __init__(self, port):
        self.port = port

    def request(self, method, path, body=None):
        conn = http.client.HTTPConnection("127.0.0.1", self.port, timeout=60)
        try:
            conn.request(method, path, body=body)
            response = conn.getresponse()
            payload = response.read()
        finally:
            conn.close()
        return response.status, payload

    def json(self, method, path, obj=None, body=None):
        if obj is not None:
            body = json.dumps(obj).encode()
        status, payload = self.request(method, path, body)
        return status, json.loads(payload) if payload else {}

    def wait_job(self, job_id, timeout_s=30.0):
        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            status, job = self.json("GET", f"/jobs/{job_id}")
            assert status == 200
            if job["state"] in ("done", "failed"):
                return job
            time.sleep(0.02)
        raise TimeoutError("job did not finish")


@pytest.fixture
def service(tmp_path):
    return AnalyzerService(tmp_path, config=AnalyzerConfig(), model=MODEL)


@pytest.fixture
def client(service):
    server = make_server(service, bind="127.0.0.1:0")
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield Client(server.server_address[1])
    server.shutdown()


def analyzed_session(client, rng, plan=PLAN, enroll=True):
    samples, truth = two_speaker_session(rng, plan)
    status, session = client.json(
        "POST", "/sessions", {"task": "conversation"}
    )
    assert status == 201
    sid = session["id"]
    if enroll:
        status, _ = client.request(
            "POST", f"/sessions/{sid}/enroll", therapist_enrollment_wav(rng)
        )
        assert status == 200
    status, out = client.json(
        "POST", f"/sessions/{sid}/recording", body=make_wav(samples)
    )
    assert status == 202
    job = client.wait_job(out["job_id"])
    assert job["state"] == "done"
    return sid, truth


class TestSessionLifecycle:
    def test_conversation_task(self, client):
        status, session = client.json("POST", "/sessions", {"task": "conversation"})
        assert status == 201
        assert session["state"] == "recording"
        assert session["reading_text"] is None

    def test_reading_task_text_retrievable_verbatim(self, client):
        text = "Der Nordwind und die Sonne stritten sich."
        status, session = client.json(
            "POST", "/sessions", {"task": "reading", "reading_text": text}
        )
        assert status == 201
        status, fetched = client.json("GET", f"/sessions/{session['id']}")
        assert fetched["reading_text"] == text

    def test_reading_without_text_rejected(self, client):
        status, body = client.json("POST", "/sessions", {"task": "reading"})
        assert status == 400
        assert body["error"] == "missing_reading_text"

    def test_unknown_session_404(self, client):
        status, body = client.json("GET", f"/sessions/{'0' * 32}")
        assert status == 404
        assert body["error"] == "not_found"

    def test_list_sessions_filters(self, client, rng):
        client.json("POST", "/sessions", {"task": "conversation"})
        client.json("POST", "/sessions", {"task": "reading", "reading_text": "t"})
        status, out = client.json("GET", "/sessions?task=reading")
        assert status == 200
        assert len(out["sessions"]) == 1
        assert out["sessions"][0]["task"] == "reading"


class TestEnrollment:
    def test_too_little_speech(self, client, rng):
        status, session = client.json("POST", "/sessions", {"task": "conversation"})
        sid = session["id"]
        short = np.zeros(3 * 16000)
        short[8000:40000] = tone(300, 2.0)
        status, body = client.json(
            "POST", f"/sessions/{sid}/enroll", body=make_wav(short)
        )
        assert status == 400
        assert body["error"] == "too_little_speech"

    def test_enroll_after_submit_invalid(self, client, rng):
        sid, _ = analyzed_session(client, rng, enroll=False)
        status, body = client.json(
            "POST", f"/sessions/{sid}/enroll", body=therapist_enrollment_wav(rng)
        )
        assert status == 409
        assert body["error"] == "invalid_state"

    def test_enrollment_produces_both_labels(self, client, rng):
        sid, truth = analyzed_session(client, rng, enroll=True)
        status, bundle = client.json("GET", f"/sessions/{sid}/analysis")
        labels = [t["label"] for t in bundle["turns"]]
        assert labels == [who for who, _, _ in truth]


class TestRecordingSubmission:
    def test_happy_path_job_done_session_analyzed(self, client, rng):
        sid, _ = analyzed_session(client, rng, enroll=False)
        status, session = client.json("GET", f"/sessions/{sid}")
        assert session["state"] == "analyzed"

    def test_second_submit_invalid_state(self, client, rng):
        sid, _ = analyzed_session(client, rng, enroll=False)
        samples, _ = two_speaker_session(rng, PLAN)
        status, body = client.json(
            "POST", f"/sessions/{sid}/recording", body=make_wav(samples)
        )
        assert status == 409
        assert body["error"] == "invalid_state"

    def test_truncated_container_fails_session_with_message(self, client, rng):
        status, session = client.json("POST", "/sessions", {"task": "conversation"})
        sid = session["id"]
        good = make_wav(tone(200, 1.0))
        status, body = client.json(
            "POST", f"/sessions/{sid}/recording", body=good[: len(good) // 2]
        )
        assert status == 400
        assert body["error"] == "malformed_audio"
        status, session = client.json("GET", f"/sessions/{sid}")
        assert session["state"] == "failed"
        assert session["error"]

    def test_chunked_upload_equals_direct_submit(self, client, rng):
        samples, _ = two_speaker_session(rng, PLAN)
        ints = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")
        pcm = ints.tobytes()

        status, first = client.json("POST", "/sessions", {"task": "conversation"})
        sid_chunked = first["id"]
        third = len(pcm) // 3 // 2 * 2
        for piece in (pcm[:third], pcm[third : 2 * third], pcm[2 * third :]):
            status, out = client.request(
                "POST", f"/sessions/{sid_chunked}/chunks", body=piece
            )
            assert status == 200
        status, out = client.json("POST", f"/sessions/{sid_chunked}/finish")
        assert status == 202
        job = client.wait_job(out["job_id"])
        assert job["state"] == "done"

        status, second = client.json("POST", "/sessions", {"task": "conversation"})
        sid_direct = second["id"]
        status, out = client.json(
            "POST", f"/sessions/{sid_direct}/recording", body=make_wav(samples)
        )
        client.wait_job(out["job_id"])

        _, bundle_a = client.json("GET", f"/sessions/{sid_chunked}/analysis")
        _, bundle_b = client.json("GET", f"/sessions/{sid_direct}/analysis")
        assert bundle_a == bundle_b

    def test_finish_without_chunks_rejected(self, client):
        status, session = client.json("POST", "/sessions", {"task": "conversation"})
        status, body = client.json("POST", f"/sessions/{session['id']}/finish")
        assert status == 400
        assert body["error"] == "malformed_audio"


class GatedModel:
    """Acoustic model wrapper that blocks until released; lets tests observe
    a session mid-processing deterministically."""

    def __init__(self, inner):
        self.inner = inner
        self.phone_set = inner.phone_set
        self.gate = threading.Event()

    def posterior_rows(self, rows):
        self.gate.wait(timeout=30)
        return self.inner.posterior_rows(rows)


class TestJobsAndAnalysis:
    def test_not_ready_includes_progress(self, tmp_path, rng):
        gated = GatedModel(MODEL)
        service = AnalyzerService(tmp_path, config=AnalyzerConfig(), model=gated)
        server = make_server(service, bind="127.0.0.1:0")
        threading.Thread(target=server.serve_forever, daemon=True).start()
        client = Client(server.server_address[1])
        try:
            samples, _ = two_speaker_session(rng, PLAN)
            _, session = client.json("POST", "/sessions", {"task": "conversation"})
            sid = session["id"]
            _, out = client.json(
                "POST", f"/sessions/{sid}/recording", body=make_wav(samples)
            )
            status, body = client.json("GET", f"/sessions/{sid}/analysis")
            assert status == 409
            assert body["error"] == "not_ready"
            assert 0.0 <= body["progress"] < 1.0
            gated.gate.set()
            job = client.wait_job(out["job_id"])
            assert job["state"] == "done"
            status, _ = client.json("GET", f"/sessions/{sid}/analysis")
            assert status == 200
        finally:
            gated.gate.set()
            server.shutdown()

    def test_unknown_ids_404(self, client):
        status, body = client.json("GET", f"/jobs/{'f' * 32}")
        assert status == 404
        status, body = client.json("GET", f"/sessions/{'f' * 32}/analysis")
        assert status == 404

    def test_progress_monotone_under_hammering(self, client, rng):
        samples, _ = two_speaker_session(rng, PLAN * 2)
        _, session = client.json("POST", "/sessions", {"task": "conversation"})
        sid = session["id"]
        _, out = client.json(
            "POST", f"/sessions/{sid}/recording", body=make_wav(samples)
        )
        job_id = out["job_id"]
        sequences = [[] for _ in range(4)]
        stop = threading.Event()

        def hammer(bucket):
            while not stop.is_set():
                status, job = client.json("GET", f"/jobs/{job_id}")
                bucket.append(job["progress"])
                if job["state"] in ("done", "failed"):
                    return

        threads = [
            threading.Thread(target=hammer, args=(bucket,)) for bucket in sequences
        ]
        for t in threads:
            t.start()
        client.wait_job(job_id)
        stop.set()
        for t in threads:
            t.join()
        for bucket in sequences:
            assert bucket == sorted(bucket)

    def test_analysis_bundle_schema_over_http(self, client, rng):
        sid, _ = analyzed_session(client, rng)
        status, bundle = client.json("GET", f"/sessions/{sid}/analysis")
        assert status == 200
        assert sorted(bundle.keys()) == [
            "category_posteriors",
            "config_snapshot",
            "events",
            "phone_segments",
            "pipeline_version",
            "pitch_track",
            "segments",
            "turns",
        ]


class TestSpectrogramGate:
    def test_long_span_rejected(self, client, rng):
        plan = [(None, 0.5), ("client", 11.0), (None, 0.5)]
        sid, _ = analyzed_session(client, rng, plan=plan, enroll=False)
        status, body = client.json(
            "GET", f"/sessions/{sid}/spectrogram?from=0&to=12.0"
        )
        assert status == 400
        assert body["error"] == "span_too_long"
        status, body = client.json(
            "GET", f"/sessions/{sid}/spectrogram?from=0&to=10.0"
        )
        assert status == 400  # exactly 10.0 s is already too long

    def test_just_below_ten_seconds_accepted(self, client, rng):
        plan = [(None, 0.5), ("client", 11.0), (None, 0.5)]
        sid, _ = analyzed_session(client, rng, plan=plan, enroll=False)
        status, spec = client.json(
            "GET", f"/sessions/{sid}/spectrogram?from=0.5&to=10.4"
        )
        assert status == 200
        assert spec["end_s"] - spec["start_s"] == pytest.approx(9.9)
        assert spec["bin_hz"] == pytest.approx(31.25)
        assert len(spec["power"][0]) == 257

    def test_out_of_bounds(self, client, rng):
        plan = [(None, 0.5), ("client", 2.0), (None, 0.5)]
        sid, _ = analyzed_session(client, rng, plan=plan, enroll=False)
        status, body = client.json(
            "GET", f"/sessions/{sid}/spectrogram?from=-1&to=2"
        )
        assert status == 400
        assert body["error"] == "range_out_of_bounds"


class TestAudioSlice:
    def test_full_range_byte_identical_to_stored(self, client, service, rng):
        plan = [(None, 0.5), ("client", 2.0), (None, 0.5)]
        sid, _ = analyzed_session(client, rng, plan=plan, enroll=False)
        loaded = service.store.load(sid)
        stored = loaded.read_artifact("audio.wav")
        duration = len(stored[44:]) // 2 / 16000
        status, payload = client.request(
            "GET", f"/sessions/{sid}/audio?from=0&to={duration}"
        )
        assert status == 200
        assert payload == stored

    def test_known_slice_samples(self, client, rng):
        ramp = np.linspace(0, 0.999, 16000)
        _, session = client.json("POST", "/sessions", {"task": "conversation"})
        sid = session["id"]
        _, out = client.json(
            "POST", f"/sessions/{sid}/recording", body=make_wav(ramp)
        )
        client.wait_job(out["job_id"])
        status, payload = client.request(
            "GET", f"/sessions/{sid}/audio?from=0.5&to=1.0"
        )
        assert status == 200
        got = np.frombuffer(payload[44:], dtype="<i2")
        expected = np.clip(np.round(ramp[8000:16000] * 32768.0), -32768, 32767)
        assert np.array_equal(got, expected.astype("<i2"))

    def test_inverted_range(self, client, rng):
        plan = [(None, 0.5), ("client", 2.0), (None, 0.5)]
        sid, _ = analyzed_session(client, rng, plan=plan, enroll=False)
        status, body = client.json("GET", f"/sessions/{sid}/audio?from=2&to=1")
        assert status == 400
        assert body["error"] == "range_out_of_bounds"


def test_health(tmp_path):
    service = AnalyzerService(tmp_path, model=MODEL)
    server = make_server(service, bind="127.0.0.1:0")
    threading.Thread(target=server.serve_forever, daemon=True).start()
    client = Client(server.server_address[1])
    status, body = client.json("GET", "/health")
    assert status == 200 and body == {"ok": True}
    server.shutdown()
