/** Wire types mirroring the service's JSON schemas. */

export type Task = "reading" | "conversation";
export type SessionState = "recording" | "processing" | "analyzed" | "failed";

export interface SessionInfo {
  id: string;
  created_at: number;
  task: Task;
  reading_text: string | null;
  state: SessionState;
  error?: string | null;
}

export interface SessionSummary {
  id: string;
  created_at: number;
  task: Task;
  state: SessionState;
}

export interface JobInfo {
  id: string;
  session_id: string;
  state: "queued" | "running" | "done" | "failed";
  progress: number;
  error: string | null;
}

export interface SegmentView {
  id: number;
  start_s: number;
  end_s: number;
}

export interface TurnView {
  segment_id: number;
  label: "client" | "therapist";
  score: number;
}

export interface PitchTrackView {
  t_s: number[];
  f0_hz: (number | null)[];
  voicing: number[];
}

export interface CategoryPosteriorsView {
  categories: string[];
  t_s: number[];
  p: number[][];
}

export interface PhoneSegmentView {
  phone: string;
  start_s: number;
  end_s: number;
  conf: number;
}

export type EventKind = "prolongation" | "repetition" | "block";

export interface StutterEventView {
  kind: EventKind;
  start_s: number;
  end_s: number;
  score: number;
  evidence: Record<string, unknown>;
}

export interface AnalysisBundle {
  pipeline_version: string;
  config_snapshot: Record<string, unknown>;
  segments: SegmentView[];
  turns: TurnView[];
  pitch_track: PitchTrackView;
  category_posteriors: CategoryPosteriorsView;
  phone_segments: PhoneSegmentView[];
  events: StutterEventView[];
}

export interface SpectrogramSliceView {
  from_s: number;
  to_s: number;
  start_s: number;
  end_s: number;
  bin_hz: number;
  hop_s: number;
  power: number[][];
}

export interface ApiErrorBody {
  error: string;
  message: string;
  progress?: number;
}
