import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { parseLine, previewPlan, serialize } from "../src/dsl.js";

interface CorpusEntry {
  line: string;
  valid: boolean;
  error: string | null;
  canonical: string | null;
}

const corpus = JSON.parse(
  readFileSync(new URL("../../tests/fixtures/dsl_corpus.json", import.meta.url), "utf-8")
) as { entries: CorpusEntry[] };

describe("shared corpus agreement", () => {
  it("covers 50 lines", () => {
    expect(corpus.entries).toHaveLength(50);
  });

  for (const entry of corpus.entries) {
    it(`matches the server verdict for ${JSON.stringify(entry.line)}`, () => {
      const result = parseLine(entry.line);
      if (entry.valid) {
        expect(result.ok, `expected valid: ${entry.line}`).toBe(true);
        if (result.ok) {
          expect(result.canonical).toBe(entry.canonical);
        }
      } else {
        expect(result.ok, `expected invalid: ${entry.line}`).toBe(false);
        if (!result.ok) {
          expect(result.error.kind).toBe(entry.error);
        }
      }
    });
  }
});

describe("parse details", () => {
  it("reports token and column for unknown words", () => {
    const result = parseLine("opened, fly to, on, cup, closed");
    expect(result.ok).toBe(false);
    if (!result.ok) {
      expect(result.error.token).toBe("fly to");
      expect(result.error.column).toBe(9);
    }
  });

  it("round-trips canonical lines", () => {
    const result = parseLine("opened, move to, front on, burger, closed");
    expect(result.ok).toBe(true);
    if (result.ok) {
      expect(serialize(result.action)).toBe("opened, move to, front on, burger, closed");
    }
  });
});

describe("plan preview", () => {
  it("accepts a valid chained plan", () => {
    const preview = previewPlan(
      "opened, move to, on, pen, closed\nclosed, move to, into, holder, opened"
    );
    expect(preview.valid).toBe(true);
    expect(preview.chainIssue).toBeNull();
    expect(preview.actions).toHaveLength(2);
  });

  it("flags the first broken linkage with its action index", () => {
    const preview = previewPlan(
      "opened, move to, on, pen, closed\nopened, move to, into, holder, opened"
    );
    expect(preview.valid).toBe(false);
    expect(preview.chainIssue?.index).toBe(1);
  });

  it("flags an initial-state mismatch at index 0", () => {
    const preview = previewPlan("closed, move to, up, , closed");
    expect(preview.chainIssue?.index).toBe(0);
  });

  it("keeps per-line verdicts and editor line numbers through blanks", () => {
    const preview = previewPlan("opened, move to, on, pen, closed\n\nbogus line");
    expect(preview.lines).toHaveLength(2);
    expect(preview.lines[1]?.line).toBe(3);
    expect(preview.lines[1]?.result.ok).toBe(false);
    expect(preview.valid).toBe(false);
  });
});
