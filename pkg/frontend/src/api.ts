/** Typed client for the session service. All calls go to the same origin
 * that served the UI (the device on the local network). */

import type {
  AnalysisBundle,
  ApiErrorBody,
  JobInfo,
  SessionInfo,
  SessionSummary,
  SpectrogramSliceView,
  Task,
} from "./types";

export class ServiceError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
    public readonly progress?: number,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<never> {
  let body: ApiErrorBody | null = null;
  try {
    body = (await response.json()) as ApiErrorBody;
  } catch {
    /* non-JSON error body */
  }
  throw new ServiceError(
    body?.error ?? "http_error",
    body?.message ?? `${response.status} ${response.statusText}`,
    response.status,
    body?.progress,
  );
}

export interface ServiceClient {
  createSession(task: Task, readingText?: string): Promise<SessionInfo>;
  getSession(id: string): Promise<SessionInfo>;
  listSessions(): Promise<SessionSummary[]>;
  enroll(id: string, audio: Blob | ArrayBuffer): Promise<{ speech_s: number }>;
  submitRecording(id: string, audio: Blob | ArrayBuffer): Promise<{ job_id: string }>;
  getJob(jobId: string): Promise<JobInfo>;
  getAnalysis(id: string): Promise<AnalysisBundle>;
  fetchSpectrogram(
    id: string,
    fromS: number,
    toS: number,
    signal?: AbortSignal,
  ): Promise<SpectrogramSliceView>;
  audioUrl(id: string, fromS: number, toS: number): string;
}

export class HttpServiceClient implements ServiceClient {
  constructor(private readonly base: string = "") {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.base + path, init);
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  createSession(task: Task, readingText?: string): Promise<SessionInfo> {
    return this.json("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ task, reading_text: readingText }),
    });
  }

  getSession(id: string): Promise<SessionInfo> {
    return this.json(`/sessions/${id}`);
  }

  async listSessions(): Promise<SessionSummary[]> {
    const out = await this.json<{ sessions: SessionSummary[] }>("/sessions");
    return out.sessions;
  }

  enroll(id: string, audio: Blob | ArrayBuffer): Promise<{ speech_s: number }> {
    return this.json(`/sessions/${id}/enroll`, { method: "POST", body: audio });
  }

  submitRecording(id: string, audio: Blob | ArrayBuffer): Promise<{ job_id: string }> {
    return this.json(`/sessions/${id}/recording`, { method: "POST", body: audio });
  }

  getJob(jobId: string): Promise<JobInfo> {
    return this.json(`/jobs/${jobId}`);
  }

  getAnalysis(id: string): Promise<AnalysisBundle> {
    return this.json(`/sessions/${id}/analysis`);
  }

  fetchSpectrogram(
    id: string,
    fromS: number,
    toS: number,
    signal?: AbortSignal,
  ): Promise<SpectrogramSliceView> {
    return this.json(`/sessions/${id}/spectrogram?from=${fromS}&to=${toS}`, { signal });
  }

  audioUrl(id: string, fromS: number, toS: number): string {
    return `${this.base}/sessions/${id}/audio?from=${fromS}&to=${toS}`;
  }
}
