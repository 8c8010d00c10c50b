import { describe, expect, it, vi } from "vitest";

import { SessionState, type HistoryEntry } from "../src/state.js";
import { fakeSidecar } from "./helpers.js";

function entry(jobId: string): HistoryEntry {
  return {
    jobId,
    testImageName: "scene.png",
    extraText: "and darker",
    textScale: 7.5,
    imageScale: 1.5,
    noiseMode: "fixed",
    imageUrl: `/jobs/${jobId}/image`,
    sidecar: fakeSidecar(),
  };
}

describe("SessionState", () => {
  it("tracks the selected instruction", () => {
    const state = new SessionState();
    expect(state.currentInstructionId).toBeNull();
    state.setInstruction("instr-1");
    expect(state.currentInstructionId).toBe("instr-1");
  });

  it("appends history in order", () => {
    const state = new SessionState();
    state.appendHistory(entry("a"));
    state.appendHistory(entry("b"));
    expect(state.history.map((e) => e.jobId)).toEqual(["a", "b"]);
  });

  it("freezes stored entries so they cannot be edited later", () => {
    const state = new SessionState();
    state.appendHistory(entry("a"));
    const stored = state.history[0]!;
    expect(Object.isFrozen(stored)).toBe(true);
    expect(() => {
      (stored as { extraText: string }).extraText = "rewritten";
    }).toThrow(TypeError);
    expect(state.history[0]!.extraText).toBe("and darker");
  });

  it("stores a copy, so mutating the caller's object afterwards changes nothing", () => {
    const state = new SessionState();
    const mine = entry("a");
    state.appendHistory(mine);
    mine.extraText = "rewritten";
    expect(state.history[0]!.extraText).toBe("and darker");
  });

  it("hands out a copy of the list, so callers cannot splice history", () => {
    const state = new SessionState();
    state.appendHistory(entry("a"));
    // the type is readonly; cast to prove the runtime array is a copy too
    const view = state.history as HistoryEntry[];
    view.pop();
    view.push(entry("intruder"));
    expect(state.history).toHaveLength(1);
    expect(state.history[0]!.jobId).toBe("a");
  });

  it("notifies listeners on every change and honors unsubscribe", () => {
    const state = new SessionState();
    const seen = vi.fn();
    const off = state.onChange(seen);
    state.setInstruction("instr-1");
    state.appendHistory(entry("a"));
    expect(seen).toHaveBeenCalledTimes(2);
    off();
    state.appendHistory(entry("b"));
    expect(seen).toHaveBeenCalledTimes(2);
  });
});
