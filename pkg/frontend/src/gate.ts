/** Gated spectrogram loading: the service only renders spans strictly
 * below ten seconds, so the UI never even issues a request at or above
 * that. Rapid viewport changes cancel or coalesce in-flight requests. */

import type { SpectrogramSliceView } from "./types";
import { ServiceError } from "./api";

export type SpectrogramFetcher = (
  fromS: number,
  toS: number,
  signal: AbortSignal,
) => Promise<SpectrogramSliceView>;

export type GateResult =
  | { kind: "image"; slice: SpectrogramSliceView }
  | { kind: "placeholder"; reason: string }
  | { kind: "cancelled" };

export interface RequestLogEntry {
  fromS: number;
  toS: number;
}

export class GatedSpectrogramLoader {
  /** every request actually issued; tests assert the 10 s rule on it */
  readonly requestLog: RequestLogEntry[] = [];

  private inflight: { key: string; controller: AbortController; promise: Promise<GateResult> } | null =
    null;

  constructor(
    private readonly fetcher: SpectrogramFetcher,
    private readonly maxSpanS: number = 10.0,
  ) {}

  get outstanding(): number {
    return this.inflight ? 1 : 0;
  }

  async load(fromS: number, toS: number): Promise<GateResult> {
    const span = toS - fromS;
    if (span >= this.maxSpanS) {
      return {
        kind: "placeholder",
        reason: `zoom in below ${this.maxSpanS.toFixed(0)} s to view the spectrogram`,
      };
    }

    const key = `${fromS}:${toS}`;
    if (this.inflight && this.inflight.key === key) {
      return this.inflight.promise; // coalesce identical request
    }
    if (this.inflight) {
      this.inflight.controller.abort(); // newer viewport wins
    }

    const controller = new AbortController();
    this.requestLog.push({ fromS, toS });
    const promise = this.fetcher(fromS, toS, controller.signal)
      .then((slice): GateResult => ({ kind: "image", slice }))
      .catch((error): GateResult => {
        if (controller.signal.aborted) return { kind: "cancelled" };
        if (error instanceof ServiceError && error.code === "span_too_long") {
          // defensive: the gate should have prevented this
          return { kind: "placeholder", reason: error.message };
        }
        throw error;
      })
      .finally(() => {
        if (this.inflight && this.inflight.controller === controller) {
          this.inflight = null;
        }
      });
    this.inflight = { key, controller, promise };
    return promise;
  }
}
