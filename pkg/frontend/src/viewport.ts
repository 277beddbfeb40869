/** The single shared viewport: every pane reads and writes the same time
 * range, which is what keeps the plots interlinked. */

export interface TimeRange {
  fromS: number;
  toS: number;
}

export interface ViewportState extends TimeRange {
  selection: TimeRange | null;
}

export type ViewportListener = (state: ViewportState) => void;

const MIN_SPAN_S = 0.05;

export class ViewportStore {
  private state: ViewportState;
  private listeners = new Set<ViewportListener>();

  constructor(private readonly durationS: number) {
    this.state = { fromS: 0, toS: durationS, selection: null };
  }

  get(): ViewportState {
    return { ...this.state, selection: this.state.selection && { ...this.state.selection } };
  }

  get spanS(): number {
    return this.state.toS - this.state.fromS;
  }

  subscribe(listener: ViewportListener): () => void {
    this.listeners.add(listener);
    listener(this.get());
    return () => this.listeners.delete(listener);
  }

  /** Clamp into [0, duration], keep the span positive, drop a selection
   * that would fall outside the new range. */
  setRange(fromS: number, toS: number): void {
    let span = Math.max(toS - fromS, MIN_SPAN_S);
    span = Math.min(span, this.durationS);
    let from = Math.max(0, Math.min(fromS, this.durationS - span));
    this.state = {
      fromS: from,
      toS: from + span,
      selection: this.clampSelection(this.state.selection, from, from + span),
    };
    this.emit();
  }

  zoom(factor: number, centerS?: number): void {
    const { fromS, toS } = this.state;
    const center = centerS ?? (fromS + toS) / 2;
    const span = (toS - fromS) * factor;
    const ratio = (center - fromS) / (toS - fromS);
    this.setRange(center - span * ratio, center + span * (1 - ratio));
  }

  pan(deltaS: number): void {
    this.setRange(this.state.fromS + deltaS, this.state.toS + deltaS);
  }

  select(selection: TimeRange | null): void {
    this.state = {
      ...this.state,
      selection: this.clampSelection(selection, this.state.fromS, this.state.toS),
    };
    this.emit();
  }

  private clampSelection(
    selection: TimeRange | null,
    fromS: number,
    toS: number,
  ): TimeRange | null {
    if (!selection) return null;
    const a = Math.max(selection.fromS, fromS);
    const b = Math.min(selection.toS, toS);
    return a < b ? { fromS: a, toS: b } : null;
  }

  private emit(): void {
    const snapshot = this.get();
    for (const listener of this.listeners) listener(snapshot);
  }
}
