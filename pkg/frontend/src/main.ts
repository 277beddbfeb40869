/** App assembly: session rail, run-session panel, linked analysis panes. */

import { HttpServiceClient, ServiceError } from "./api";
import { SessionFlow } from "./flow";
import { GatedSpectrogramLoader, type GateResult } from "./gate";
import { describeEvidence, drawHeatmap, eventAtX, xToTime } from "./heatmap";
import { Player } from "./player";
import { MicrophoneRecorder } from "./recorder";
import { drawPlayhead, drawSpectrogramPane } from "./spectro";
import type { AnalysisBundle } from "./types";
import { ViewportStore } from "./viewport";

const client = new HttpServiceClient("");

const app = document.getElementById("app")!;
app.innerHTML = `
  <aside class="rail">
    <h1>stanalyzer</h1>
    <form id="new-session">
      <select id="task">
        <option value="conversation">conversation</option>
        <option value="reading">reading task</option>
      </select>
      <textarea id="reading-text" placeholder="reading text" hidden rows="4"></textarea>
      <label class="file-label">therapist enrollment (wav)
        <input type="file" id="enroll-file" accept="audio/wav">
      </label>
      <div class="row">
        <button type="button" id="record">record</button>
        <button type="button" id="stop" disabled>stop</button>
      </div>
      <label class="file-label">or upload a recording
        <input type="file" id="upload-file" accept="audio/wav">
      </label>
      <div id="flow-status" class="status"></div>
      <div id="reading-pane" class="reading" hidden></div>
    </form>
    <h2>sessions</h2>
    <ul id="session-list"></ul>
  </aside>
  <main class="panes">
    <div id="empty-state">create or select an analyzed session</div>
    <section id="analysis" hidden>
      <div class="pane">
        <header>phonological posteriors + potential stutters</header>
        <canvas id="pane-a" width="1200" height="240"></canvas>
      </div>
      <div class="pane">
        <header>spectrogram + pitch</header>
        <canvas id="pane-b" width="1200" height="240"></canvas>
      </div>
      <div id="player-slot"></div>
      <div id="tooltip" class="status"></div>
      <div class="hint">wheel: zoom · drag: pan · click a marker: seek</div>
    </section>
  </main>
`;

const taskSelect = document.getElementById("task") as HTMLSelectElement;
const readingText = document.getElementById("reading-text") as HTMLTextAreaElement;
const readingPane = document.getElementById("reading-pane")!;
const flowStatus = document.getElementById("flow-status")!;
const recordButton = document.getElementById("record") as HTMLButtonElement;
const stopButton = document.getElementById("stop") as HTMLButtonElement;
const enrollFile = document.getElementById("enroll-file") as HTMLInputElement;
const uploadFile = document.getElementById("upload-file") as HTMLInputElement;
const sessionList = document.getElementById("session-list")!;

taskSelect.addEventListener("change", () => {
  readingText.hidden = taskSelect.value !== "reading";
});

const flow = new SessionFlow(client, new MicrophoneRecorder());
flow.subscribe((state) => {
  recordButton.disabled = state.phase !== "idle" && state.phase !== "analyzed" && state.phase !== "error";
  stopButton.disabled = state.phase !== "recording";
  readingPane.hidden = !(state.phase === "recording" && state.readingText);
  if (state.phase === "recording" && state.readingText) {
    readingPane.textContent = state.readingText;
  }
  switch (state.phase) {
    case "idle":
      flowStatus.textContent = "";
      break;
    case "recording":
      flowStatus.textContent = "recording...";
      break;
    case "uploading":
      flowStatus.textContent = "uploading...";
      break;
    case "processing":
      flowStatus.textContent = `analyzing ${(state.progress * 100).toFixed(0)} %`;
      break;
    case "analyzed":
      flowStatus.textContent = "analyzed";
      void refreshSessions();
      void openSession(state.sessionId);
      break;
    case "error": {
      flowStatus.textContent = `error: ${state.message}`;
      if (state.canRetry) {
        const retry = document.createElement("button");
        retry.textContent = "retry upload";
        retry.addEventListener("click", () => void flow.retry());
        flowStatus.append(" ", retry);
      }
      break;
    }
  }
});

recordButton.addEventListener("click", () => {
  const task = taskSelect.value as "reading" | "conversation";
  void flow.start(task, task === "reading" ? readingText.value : undefined);
});
stopButton.addEventListener("click", () => void flow.stop());

let pendingEnroll: File | null = null;
enrollFile.addEventListener("change", () => {
  pendingEnroll = enrollFile.files?.[0] ?? null;
});

uploadFile.addEventListener("change", async () => {
  const file = uploadFile.files?.[0];
  if (!file) return;
  const task = taskSelect.value as "reading" | "conversation";
  try {
    const session = await client.createSession(
      task,
      task === "reading" ? readingText.value : undefined,
    );
    if (pendingEnroll) {
      await client.enroll(session.id, await pendingEnroll.arrayBuffer());
    }
    flowStatus.textContent = "analyzing upload...";
    const { job_id } = await client.submitRecording(session.id, await file.arrayBuffer());
    for (;;) {
      const job = await client.getJob(job_id);
      flowStatus.textContent = `analyzing ${(job.progress * 100).toFixed(0)} %`;
      if (job.state === "done") break;
      if (job.state === "failed") throw new Error(job.error ?? "analysis failed");
      await new Promise((resolve) => setTimeout(resolve, 250));
    }
    flowStatus.textContent = "analyzed";
    await refreshSessions();
    await openSession(session.id);
  } catch (error) {
    flowStatus.textContent = `error: ${(error as Error).message}`;
  }
});

async function refreshSessions(): Promise<void> {
  const sessions = await client.listSessions();
  sessionList.innerHTML = "";
  for (const summary of sessions) {
    const item = document.createElement("li");
    const when = new Date(summary.created_at).toLocaleString();
    item.textContent = `${when} · ${summary.task} · ${summary.state}`;
    if (summary.state === "analyzed") {
      item.classList.add("openable");
      item.addEventListener("click", () => void openSession(summary.id));
    }
    sessionList.append(item);
  }
}

async function openSession(sessionId: string): Promise<void> {
  let bundle: AnalysisBundle;
  try {
    bundle = await client.getAnalysis(sessionId);
  } catch (error) {
    if (error instanceof ServiceError && error.code === "not_ready") {
      flowStatus.textContent = `not ready (${((error.progress ?? 0) * 100).toFixed(0)} %)`;
      return;
    }
    throw error;
  }
  document.getElementById("empty-state")!.hidden = true;
  const section = document.getElementById("analysis")!;
  section.hidden = false;
  mountAnalysis(sessionId, bundle);
}

function mountAnalysis(sessionId: string, bundle: AnalysisBundle): void {
  const paneA = document.getElementById("pane-a") as HTMLCanvasElement;
  const paneB = document.getElementById("pane-b") as HTMLCanvasElement;
  const tooltip = document.getElementById("tooltip")!;
  const playerSlot = document.getElementById("player-slot")!;

  const track = bundle.pitch_track;
  const durationS =
    track.t_s.length > 0 ? track.t_s[track.t_s.length - 1]! + 0.035 : 1.0;

  const viewport = new ViewportStore(durationS);
  const gate = new GatedSpectrogramLoader((fromS, toS, signal) =>
    client.fetchSpectrogram(sessionId, fromS, toS, signal),
  );

  playerSlot.innerHTML = "";
  const player = new Player(client.audioUrl(sessionId, 0, durationS));
  playerSlot.append(player.element);
  let playheadS = 0;
  player.onPlayhead((timeS) => {
    playheadS = timeS;
    render();
  });

  let lastGateResult: GateResult = { kind: "placeholder", reason: "loading" };
  let renderScheduled = false;

  function render(): void {
    if (renderScheduled) return;
    renderScheduled = true;
    requestAnimationFrame(() => {
      renderScheduled = false;
      const view = viewport.get();
      drawHeatmap(paneA, bundle, view);
      drawPlayhead(paneA, playheadS, view);
      drawSpectrogramPane(paneB, lastGateResult, track, view);
      drawPlayhead(paneB, playheadS, view);
    });
  }

  viewport.subscribe((view) => {
    render();
    void gate.load(view.fromS, view.toS).then((result) => {
      if (result.kind === "cancelled") return;
      lastGateResult = result;
      render();
    });
  });

  for (const canvas of [paneA, paneB]) {
    canvas.addEventListener("wheel", (event) => {
      event.preventDefault();
      const rect = canvas.getBoundingClientRect();
      const center = xToTime(
        ((event.clientX - rect.left) / rect.width) * canvas.width,
        viewport.get(),
        canvas.width,
      );
      viewport.zoom(event.deltaY > 0 ? 1.25 : 0.8, center);
    });
    let dragStartX: number | null = null;
    canvas.addEventListener("pointerdown", (event) => {
      dragStartX = event.clientX;
      canvas.setPointerCapture(event.pointerId);
    });
    canvas.addEventListener("pointermove", (event) => {
      if (dragStartX === null) return;
      const view = viewport.get();
      const perPixel = (view.toS - view.fromS) / canvas.getBoundingClientRect().width;
      viewport.pan((dragStartX - event.clientX) * perPixel);
      dragStartX = event.clientX;
    });
    canvas.addEventListener("pointerup", () => (dragStartX = null));
  }

  paneA.addEventListener("click", (event) => {
    const rect = paneA.getBoundingClientRect();
    const x = ((event.clientX - rect.left) / rect.width) * paneA.width;
    const hit = eventAtX(x, bundle, viewport.get(), paneA.width);
    if (hit) {
      tooltip.textContent = describeEvidence(hit);
      player.seek(hit.start_s);
    } else {
      tooltip.textContent = "";
      player.seek(xToTime(x, viewport.get(), paneA.width));
    }
  });
}

void refreshSessions();
