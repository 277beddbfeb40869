"""A complete session against the running HTTP service.

Starts the service on an ephemeral local port, enrolls the therapist,
uploads a two-voice recording, polls the job, and summarizes the bundle.
"""

import http.client
import json
import tempfile
import threading
import time

import numpy as np

from stanalyzer.api import AnalyzerService, make_server
from stanalyzer.audio import AudioClip, encode_recording
from stanalyzer.pipeline import default_acoustic_model

rate = 16000
rng = np.random.default_rng(23)

def voice(freqs, duration):
    t = np.arange(int(duration * rate)) / rate
    return sum(0.3 / (i + 1) * np.sin(2 * np.pi * f * t) for i, f in enumerate(freqs))

def wav(samples):
    return encode_recording(AudioClip(np.clip(samples, -1, 1), rate))

client_voice, therapist_voice = (400, 1200, 2000), (750, 2200, 3400)

enroll = rng.uniform(-1e-4, 1e-4, 8 * rate)
enroll[rate // 2 : rate // 2 + 7 * rate] += voice(therapist_voice, 7.0)

recording = rng.uniform(-1e-4, 1e-4, 14 * rate)
recording[1 * rate : 5 * rate] += voice(client_voice, 4.0)       # client reads
recording[6 * rate : 9 * rate] += voice(therapist_voice, 3.0)    # therapist replies
recording[10 * rate : 13 * rate] += voice(client_voice, 3.0)     # client again

service = AnalyzerService(tempfile.mkdtemp(), model=default_acoustic_model())
server = make_server(service, bind="127.0.0.1:0")
threading.Thread(target=server.serve_forever, daemon=True).start()
port = server.server_address[1]
print(f"service on 127.0.0.1:{port}")

def call(method, path, body=None):
    conn = http.client.HTTPConnection("127.0.0.1", port, timeout=60)
    conn.request(method, path, body=body)
    response = conn.getresponse()
    payload = response.read()
    conn.close()
    return response.status, payload

status, body = call("POST", "/sessions", json.dumps(
    {"task": "reading", "reading_text": "Der Nordwind und die Sonne"}).encode())
session_id = json.loads(body)["id"]
print("created session", session_id, "->", status)

status, body = call("POST", f"/sessions/{session_id}/enroll", wav(enroll))
print("enrollment:", json.loads(body))

status, body = call("POST", f"/sessions/{session_id}/recording", wav(recording))
job_id = json.loads(body)["job_id"]
while True:
    status, body = call("GET", f"/jobs/{job_id}")
    job = json.loads(body)
    if job["state"] in ("done", "failed"):
        break
    time.sleep(0.05)
print("job finished:", job["state"], "progress", job["progress"])

status, body = call("GET", f"/sessions/{session_id}/analysis")
bundle = json.loads(body)
print(f"segments: {[(s['start_s'], s['end_s']) for s in bundle['segments']]}")
print(f"turns:    {[(t['segment_id'], t['label']) for t in bundle['turns']]}")
print(f"phones:   {len(bundle['phone_segments'])} decoded, "
      f"events: {len(bundle['events'])}")

status, body = call("GET", f"/sessions/{session_id}/spectrogram?from=1.0&to=5.0")
spec = json.loads(body)
print(f"spectrogram slice: {len(spec['power'])} frames x {len(spec['power'][0])} bins")

status, body = call("GET", f"/sessions/{session_id}/spectrogram?from=0&to=14")
print("14 s span ->", status, json.loads(body)["error"])

server.shutdown()
