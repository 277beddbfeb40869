/** The run-a-session state machine: create, show the reading text while
 * recording, upload on stop, poll the job, land on the rendered analysis.
 * Service failures surface verbatim with a retry that never discards the
 * local recording buffer. */

import type { ServiceClient } from "./api";
import type { AnalysisBundle, Task } from "./types";

export interface Recorder {
  start(): Promise<void>;
  /** resolves with the recorded container bytes */
  stop(): Promise<ArrayBuffer>;
}

export type FlowState =
  | { phase: "idle" }
  | { phase: "recording"; sessionId: string; task: Task; readingText: string | null }
  | { phase: "uploading"; sessionId: string }
  | { phase: "processing"; sessionId: string; progress: number }
  | { phase: "analyzed"; sessionId: string; bundle: AnalysisBundle }
  | { phase: "error"; sessionId: string | null; message: string; canRetry: boolean };

export type FlowListener = (state: FlowState) => void;

const POLL_INTERVAL_MS = 250;

export class SessionFlow {
  private state: FlowState = { phase: "idle" };
  private listeners = new Set<FlowListener>();
  private buffered: ArrayBuffer | null = null;
  private sessionId: string | null = null;

  constructor(
    private readonly client: ServiceClient,
    private readonly recorder: Recorder,
    private readonly sleep: (ms: number) => Promise<void> = (ms) =>
      new Promise((resolve) => setTimeout(resolve, ms)),
  ) {}

  get current(): FlowState {
    return this.state;
  }

  subscribe(listener: FlowListener): () => void {
    this.listeners.add(listener);
    listener(this.state);
    return () => this.listeners.delete(listener);
  }

  private transition(state: FlowState): void {
    this.state = state;
    for (const listener of this.listeners) listener(state);
  }

  /** Create the session and start recording. A reading task exposes its
   * text for display for as long as the recording runs. */
  async start(task: Task, readingText?: string): Promise<void> {
    try {
      const session = await this.client.createSession(task, readingText);
      this.sessionId = session.id;
      await this.recorder.start();
      this.transition({
        phase: "recording",
        sessionId: session.id,
        task,
        readingText: session.reading_text,
      });
    } catch (error) {
      this.transition({
        phase: "error",
        sessionId: this.sessionId,
        message: String((error as Error).message ?? error),
        canRetry: false,
      });
    }
  }

  /** Stop recording, upload, poll to completion. */
  async stop(): Promise<void> {
    if (this.state.phase !== "recording") return;
    const sessionId = this.state.sessionId;
    this.buffered = await this.recorder.stop();
    await this.upload(sessionId);
  }

  /** Re-attempt the upload with the retained buffer after an error. */
  async retry(): Promise<void> {
    if (this.state.phase !== "error" || !this.state.canRetry) return;
    if (this.sessionId === null || this.buffered === null) return;
    await this.upload(this.sessionId);
  }

  /** DOM binding for the reading-text pane: visible with the text for
   * exactly as long as a reading-task recording runs. */
  static renderReadingPane(element: HTMLElement, state: FlowState): void {
    const visible = state.phase === "recording" && !!state.readingText;
    element.hidden = !visible;
    element.textContent =
      state.phase === "recording" && state.readingText ? state.readingText : "";
  }

  private async upload(sessionId: string): Promise<void> {
    if (!this.buffered) return;
    this.transition({ phase: "uploading", sessionId });
    try {
      const { job_id } = await this.client.submitRecording(sessionId, this.buffered);
      this.transition({ phase: "processing", sessionId, progress: 0 });
      for (;;) {
        const job = await this.client.getJob(job_id);
        if (job.state === "failed") {
          this.transition({
            phase: "error",
            sessionId,
            message: job.error ?? "analysis failed",
            canRetry: false,
          });
          return;
        }
        this.transition({ phase: "processing", sessionId, progress: job.progress });
        if (job.state === "done") break;
        await this.sleep(POLL_INTERVAL_MS);
      }
      const bundle = await this.client.getAnalysis(sessionId);
      this.buffered = null; // uploaded and analyzed; safe to drop
      this.transition({ phase: "analyzed", sessionId, bundle });
    } catch (error) {
      // keep this.buffered: the local recording must survive a dead service
      this.transition({
        phase: "error",
        sessionId,
        message: String((error as Error).message ?? error),
        canRetry: this.buffered !== null,
      });
    }
  }
}
