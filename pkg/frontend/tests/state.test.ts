import { describe, expect, it } from "vitest";

import { actionToLine, diagnosticLine, commitEnabled, initialState } from "../src/state.js";
import type { TaskPayload } from "../src/api.js";

describe("actionToLine", () => {
  it("renders canonical DSL text from the structured form", () => {
    expect(
      actionToLine({ pre: "open", motion: "move", preposition: "front_on", object: "burger", post: "close" })
    ).toBe("opened, move to, front on, burger, closed");
    expect(
      actionToLine({ pre: "close", motion: "move", preposition: "up", object: null, post: "close" })
    ).toBe("closed, move to, up, , closed");
    expect(
      actionToLine({ pre: "close", motion: "rotate", preposition: "on", object: "valve", post: "close" })
    ).toBe("closed, rotate to, on, valve, closed");
  });
});

describe("diagnosticLine", () => {
  it("anchors line-prefixed parse diagnostics", () => {
    expect(diagnosticLine("line 2: unknown motion word (token 'fly to' at column 9)")).toBe(2);
  });

  it("maps chain indices to 1-based lines", () => {
    expect(
      diagnosticLine("broken linkage at index 1: previous action ends close but this one starts open (index 1)")
    ).toBe(2);
  });

  it("returns null for unanchored messages", () => {
    expect(diagnosticLine("fenced block is empty")).toBeNull();
  });
});

describe("commitEnabled", () => {
  function taskWith(status: TaskPayload["status"], committed: TaskPayload["committed"]): TaskPayload {
    return {
      id: "t1",
      instruction: "x",
      scene_ref: "insert_pen",
      version: 1,
      status,
      votes: [],
      voted_session: null,
      sessions: { icl: null, no_icl: null },
      committed,
      record_id: null,
    };
  }

  it("requires a verified, uncommitted selection", () => {
    const state = initialState();
    expect(commitEnabled(state)).toBe(false);
    state.selected = taskWith("pending", null);
    expect(commitEnabled(state)).toBe(false);
    state.selected = taskWith("verified", null);
    expect(commitEnabled(state)).toBe(true);
    state.selected = taskWith("verified", "added");
    expect(commitEnabled(state)).toBe(false);
    state.selected = taskWith("rejected", null);
    expect(commitEnabled(state)).toBe(false);
  });
});
