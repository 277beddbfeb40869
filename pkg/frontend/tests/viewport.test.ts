import { describe, expect, it } from "vitest";

import { ViewportStore, type ViewportState } from "../src/viewport";

function attachPane(store: ViewportStore): { last: () => ViewportState } {
  let state: ViewportState | null = null;
  store.subscribe((s) => (state = s));
  return { last: () => state! };
}

describe("ViewportStore", () => {
  it("starts covering the whole recording", () => {
    const store = new ViewportStore(30);
    expect(store.get()).toEqual({ fromS: 0, toS: 30, selection: null });
  });

  it("keeps every pane on the identical range through arbitrary interaction", () => {
    const store = new ViewportStore(60);
    const paneA = attachPane(store);
    const paneB = attachPane(store);
    const paneC = attachPane(store);

    store.zoom(0.5, 20);
    store.pan(3);
    store.setRange(10, 18);
    store.zoom(1.5);
    store.pan(-4);

    const a = paneA.last();
    expect(paneB.last()).toEqual(a);
    expect(paneC.last()).toEqual(a);
    expect(store.get()).toEqual(a);
  });

  it("zooming one pane updates the other to the same window", () => {
    // pane A zooms to [3, 5]; pane B must request exactly [3, 5]
    const store = new ViewportStore(30);
    const paneB = attachPane(store);
    store.setRange(3, 5);
    expect(paneB.last().fromS).toBeCloseTo(3);
    expect(paneB.last().toS).toBeCloseTo(5);
  });

  it("clamps to the recording bounds", () => {
    const store = new ViewportStore(10);
    store.setRange(-5, 4);
    expect(store.get().fromS).toBe(0);
    store.setRange(8, 25);
    const state = store.get();
    expect(state.toS).toBeLessThanOrEqual(10);
    expect(state.fromS).toBeLessThan(state.toS);
  });

  it("never produces an empty or inverted range", () => {
    const store = new ViewportStore(10);
    store.setRange(4, 4);
    expect(store.get().toS).toBeGreaterThan(store.get().fromS);
    for (let i = 0; i < 50; i++) store.zoom(0.5, 5);
    expect(store.get().toS).toBeGreaterThan(store.get().fromS);
  });

  it("keeps the selection inside the viewport", () => {
    const store = new ViewportStore(20);
    store.select({ fromS: 5, toS: 9 });
    store.setRange(6, 8);
    const selection = store.get().selection;
    expect(selection).toEqual({ fromS: 6, toS: 8 });
    store.setRange(12, 16);
    expect(store.get().selection).toBeNull();
  });

  it("zoom centered on a point keeps that point fixed", () => {
    const store = new ViewportStore(100);
    store.setRange(10, 30);
    const center = 15;
    const before = store.get();
    const ratioBefore = (center - before.fromS) / (before.toS - before.fromS);
    store.zoom(0.5, center);
    const after = store.get();
    const ratioAfter = (center - after.fromS) / (after.toS - after.fromS);
    expect(ratioAfter).toBeCloseTo(ratioBefore, 6);
  });

  it("unsubscribing stops updates", () => {
    const store = new ViewportStore(10);
    let calls = 0;
    const off = store.subscribe(() => calls++);
    store.pan(1);
    off();
    store.pan(1);
    expect(calls).toBe(2); // initial + first pan only
  });
});
