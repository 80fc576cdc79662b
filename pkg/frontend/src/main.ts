/** Browser entry: wires the controller to the DOM. The base URL of the
 * annotation service is the one configurable setting (?api=...). */

import { ApiClient } from "./api.js";
import {
  ConsoleController,
  comparisonView,
  staleStages,
} from "./state.js";
import {
  renderComparison,
  renderControls,
  renderEditor,
  renderStageTabs,
  renderTaskList,
  renderToast,
} from "./render.js";

const params = new URLSearchParams(window.location.search);
const api = new ApiClient(params.get("api") ?? "http://127.0.0.1:8234");
const controller = new ConsoleController(api);

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node;
}

function redraw(): void {
  const state = controller.state;
  el("tasks").innerHTML = renderTaskList(state);
  el("comparison").innerHTML = renderComparison(comparisonView(state.selected));
  el("tabs").innerHTML =
    renderStageTabs(state.selected, "no_icl") + renderStageTabs(state.selected, "icl");
  el("editor").innerHTML = renderEditor(
    state.editor,
    state.editor ? staleStages(state.selected, state.editor.mode) : []
  );
  el("controls").innerHTML = renderControls(state);
  el("toast").innerHTML = renderToast(state.toast);

  const buffer = document.getElementById("stage-buffer") as HTMLTextAreaElement | null;
  if (buffer !== null) {
    buffer.addEventListener("input", () => {
      controller.updateBuffer(buffer.value);
      // Redraw only the preview block to keep the caret in place.
      const editorPane = el("editor");
      const preview = editorPane.querySelector(".preview, .inline-error");
      const fresh = renderEditor(
        controller.state.editor,
        controller.state.editor
          ? staleStages(controller.state.selected, controller.state.editor.mode)
          : []
      );
      const holder = document.createElement("div");
      holder.innerHTML = fresh;
      const freshPreview = holder.querySelector(".preview");
      if (preview !== null && freshPreview !== null) {
        preview.replaceWith(freshPreview);
      }
    });
  }
}

async function run(action: () => Promise<void>): Promise<void> {
  try {
    await action();
  } catch (error) {
    controller.state.toast = { kind: "error", text: String(error) };
  }
  redraw();
}

function wire(): void {
  el("create-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const instruction = (el("instruction") as HTMLInputElement).value;
    const scene = (el("scene") as HTMLSelectElement).value;
    void run(() => controller.createTask(instruction, scene));
  });
  el("plan-both").addEventListener("click", () => void run(() => controller.planBoth()));
  el("tasks").addEventListener("click", (event) => {
    const item = (event.target as HTMLElement).closest<HTMLElement>("[data-task-id]");
    if (item?.dataset.taskId) {
      void run(() => controller.selectTask(item.dataset.taskId!));
    }
  });
  el("tabs").addEventListener("click", (event) => {
    const tab = (event.target as HTMLElement).closest<HTMLElement>(".stage-tab");
    if (tab?.dataset.stage && tab.dataset.mode) {
      controller.openEditor(
        tab.dataset.mode as "icl" | "no_icl",
        Number(tab.dataset.stage)
      );
      redraw();
    }
  });
  el("editor-save").addEventListener("click", () => {
    const buffer = document.getElementById("stage-buffer") as HTMLTextAreaElement | null;
    if (buffer !== null) controller.updateBuffer(buffer.value);
    void run(async () => {
      await controller.saveEditor();
    });
  });
  el("controls").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const session = controller.state.selected?.sessions.icl !== null ? "icl" : "no_icl";
    if (target.id === "vote-correct") {
      void run(() => controller.vote("correct", session));
    } else if (target.id === "vote-incorrect") {
      void run(() => controller.vote("incorrect", session));
    } else if (target.id === "commit" && !(target as HTMLButtonElement).disabled) {
      void run(() => controller.commit());
    }
  });
}

async function boot(): Promise<void> {
  wire();
  await run(async () => {
    await controller.refresh();
    const scenes = controller.state.scenes
      .map((s) => `<option value="${s}">${s}</option>`)
      .join("");
    el("scene").innerHTML = scenes;
  });
}

void boot();
