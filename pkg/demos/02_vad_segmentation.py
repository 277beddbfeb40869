"""Energy-based voice activity detection on a synthetic recording.

Two speech bursts in low-level noise; the detector finds both, closes the
short pause inside the first burst, and drops a 150 ms blip.
"""

import numpy as np

from stanalyzer.audio import AudioClip, FrameGrid, frame_signal
from stanalyzer.features import log_energy
from stanalyzer.vad import detect_speech, segment_clip

rate = 16000
rng = np.random.default_rng(42)
samples = rng.uniform(-1e-4, 1e-4, 8 * rate)

t = np.arange(rate) / rate
burst = 0.3 * np.sin(2 * np.pi * 700 * t) + 0.2 * np.sin(2 * np.pi * 2100 * t)

samples[1 * rate : 2 * rate] += burst               # burst one
samples[int(2.1 * rate) : int(3.1 * rate)] += burst  # 0.1 s pause: gets closed
samples[5 * rate : 6 * rate] += burst               # separate burst
samples[int(6.9 * rate) : int(7.05 * rate)] += burst[: int(0.15 * rate)]  # dropped

clip = AudioClip(samples, rate)
energies = log_energy(frame_signal(clip, FrameGrid()))
segments = detect_speech(energies)

print(f"{len(segments)} segments from {clip.duration_s:.0f} s of audio:")
for seg in segments:
    print(
        f"  #{seg.id}: [{seg.start_s:6.2f}, {seg.end_s:6.2f}] s "
        f"({seg.duration_s:.2f} s, mean log-energy {seg.mean_log_energy:.2f})"
    )

clips = segment_clip(clip, segments)
print("slice sample counts:", [c.samples.size for c in clips])
