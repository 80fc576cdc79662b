import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import {
  ConsoleController,
  commitEnabled,
  comparisonView,
  staleStages,
} from "../src/state.js";
import { renderComparison, renderControls, renderEditor, renderToast } from "../src/render.js";
import { highlightedCount } from "../src/diff.js";
import { FakeAnnotationServer } from "./fake_server.js";

const PUBLISHED = [
  /^GET \/scenes$/,
  /^GET \/tasks$/,
  /^GET \/tasks\/[^/]+$/,
  /^POST \/tasks$/,
  /^POST \/tasks\/[^/]+\/plan$/,
  /^PUT \/tasks\/[^/]+\/stages\/\d$/,
  /^POST \/tasks\/[^/]+\/vote$/,
  /^POST \/tasks\/[^/]+\/commit$/,
];

function makeConsole() {
  const server = new FakeAnnotationServer();
  const controller = new ConsoleController(new ApiClient("http://fake", server.fetch));
  return { server, controller };
}

describe("console golden flow", () => {
  it("create -> plan both -> invalid edit -> fix -> vote -> commit -> toast", async () => {
    const { server, controller } = makeConsole();
    await controller.refresh();
    expect(controller.state.scenes).toContain("insert_pen");

    // Create and plan both modes.
    await controller.createTask("insert the pen into the pen holder", "insert_pen");
    expect(controller.state.selected?.id).toBe("t1");
    await controller.planBoth();
    const view = comparisonView(controller.state.selected);
    expect(view.rows).not.toBeNull();
    expect(highlightedCount(view.rows!)).toBeGreaterThan(0); // flawed vs good differ
    expect(view.noDemoBadge).toBe(true); // empty store on first plan

    // Commit is disabled until the task is verified.
    expect(commitEnabled(controller.state)).toBe(false);
    expect(renderControls(controller.state)).toContain("disabled");

    // Edit stage 5 with a broken line: live preview flags it, server rejects it.
    controller.openEditor("icl", 5);
    controller.updateBuffer(
      "opened, move to, on, pen, closed\nopened, fly to, into, holder, opened"
    );
    const preview = controller.state.editor?.preview;
    expect(preview?.valid).toBe(false);
    expect(preview?.lines[1]?.result.ok).toBe(false);
    const previewHtml = renderEditor(controller.state.editor, []);
    expect(previewHtml).toContain("inline-error");
    expect(previewHtml).toContain("unknown motion word");

    const saved = await controller.saveEditor();
    expect(saved).toBe(false);
    expect(controller.state.editor?.serverError?.message).toContain("line 2");
    expect(controller.state.editor?.serverError?.line).toBe(2);
    const errorHtml = renderEditor(controller.state.editor, []);
    expect(errorHtml).toContain(`data-line="2"`);

    // Fix the buffer; the save goes through and the final plan updates.
    controller.updateBuffer(
      "opened, move to, on, pen, closed\nclosed, move to, into, holder, opened"
    );
    expect(controller.state.editor?.preview?.valid).toBe(true);
    expect(await controller.saveEditor()).toBe(true);
    expect(controller.state.selected?.sessions.icl?.final).toHaveLength(2);

    // Vote correct, then commit; the gate decision surfaces as a toast.
    await controller.vote("correct", "icl");
    expect(controller.state.selected?.status).toBe("verified");
    expect(commitEnabled(controller.state)).toBe(true);
    await controller.commit();
    expect(controller.state.toast?.kind).toBe("gate-add");
    expect(renderToast(controller.state.toast)).toContain("record 1");
    expect(controller.state.selected?.record_id).toBe(1);

    // Every request the console made used a published endpoint.
    for (const entry of server.requestLog) {
      const line = `${entry.method} ${entry.path}`;
      expect(
        PUBLISHED.some((pattern) => pattern.test(line)),
        `unpublished endpoint used: ${line}`
      ).toBe(true);
    }
  });

  it("duplicate commits surface the gate skip with similarity scores", async () => {
    const { controller } = makeConsole();
    await controller.refresh();
    for (const expected of ["add", "skip"] as const) {
      await controller.createTask("insert the pen into the pen holder", "insert_pen");
      await controller.planBoth();
      await controller.vote("correct", "icl");
      await controller.commit();
      expect(controller.state.toast?.kind).toBe(expected === "add" ? "gate-add" : "gate-skip");
    }
    expect(renderToast(controller.state.toast)).toContain("1.00");
  });

  it("early-stage edits mark downstream stages stale", async () => {
    const { controller } = makeConsole();
    await controller.refresh();
    await controller.createTask("insert the pen into the pen holder", "insert_pen");
    await controller.planBoth();
    controller.openEditor("icl", 3);
    controller.updateBuffer("1. different steps");
    expect(controller.state.editor?.preview).toBeNull(); // preview is stage-5 only
    await controller.saveEditor();
    expect(staleStages(controller.state.selected, "icl")).toEqual([4, 5]);
    const editorHtml = renderEditor(
      { mode: "icl", stage: 4, buffer: "", preview: null, serverError: null },
      staleStages(controller.state.selected, "icl")
    );
    expect(editorHtml).toContain("stale");
  });

  it("stale version conflicts surface as a reload prompt", async () => {
    const { controller } = makeConsole();
    await controller.refresh();
    await controller.createTask("insert the pen into the pen holder", "insert_pen");
    await controller.planBoth();
    controller.openEditor("icl", 5);
    controller.state.selected!.version = 1; // simulate another client's bump
    controller.updateBuffer("opened, move to, on, pen, closed");
    expect(await controller.saveEditor()).toBe(false);
    expect(controller.state.toast?.kind).toBe("reload");
    expect(controller.state.selected?.version).toBeGreaterThan(1); // refreshed
  });

  it("renders the single-column fallback before both sessions exist", async () => {
    const { controller } = makeConsole();
    await controller.refresh();
    await controller.createTask("insert the pen into the pen holder", "insert_pen");
    const html = renderComparison(comparisonView(controller.state.selected));
    expect(html).toContain("no planned sessions yet");
  });
});
