/** HTML renderers for the console panes. Pure string builders: the browser
 * entry mounts them, tests assert on them directly. */

import { SessionMode, TaskPayload } from "./api.js";
import { ComparisonView, StageEditor, Toast, commitEnabled, ConsoleViewState } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderTaskList(state: ConsoleViewState): string {
  if (state.tasks.length === 0) {
    return `<p class="empty">no tasks yet</p>`;
  }
  const items = state.tasks
    .map((task) => {
      const selected = state.selected?.id === task.id ? " selected" : "";
      return (
        `<li class="task${selected}" data-task-id="${task.id}">` +
        `<span class="task-id">${task.id}</span> ` +
        `<span class="instruction">${escapeHtml(task.instruction)}</span> ` +
        `<span class="status status-${task.status}">${task.status}</span></li>`
      );
    })
    .join("");
  return `<ul class="task-list">${items}</ul>`;
}

export function renderComparison(view: ComparisonView): string {
  const badge = view.noDemoBadge
    ? `<span class="badge no-demo">no demonstration available</span>`
    : "";
  if (view.rows !== null) {
    const rows = view.rows
      .map((row) => {
        const highlight = row.kind === "same" ? "" : ` class="diff-${row.kind}"`;
        return (
          `<tr${highlight}><td class="line-no">${row.line}</td>` +
          `<td class="left">${escapeHtml(row.left)}</td>` +
          `<td class="right">${escapeHtml(row.right)}</td></tr>`
        );
      })
      .join("");
    return (
      `${badge}<table class="comparison"><thead><tr><th></th>` +
      `<th>without retrieval</th><th>with retrieval</th></tr></thead>` +
      `<tbody>${rows}</tbody></table>`
    );
  }
  if (view.fallback !== null) {
    const label = view.fallback.mode === "icl" ? "with retrieval" : "without retrieval";
    const lines = view.fallback.lines
      .map((line) => `<li>${escapeHtml(line)}</li>`)
      .join("");
    return `${badge}<div class="single-column"><h4>${label}</h4><ol>${lines}</ol></div>`;
  }
  return `${badge}<p class="empty">no planned sessions yet</p>`;
}

export function renderEditor(editor: StageEditor | null, staleStages: number[]): string {
  if (editor === null) {
    return `<p class="empty">no stage open</p>`;
  }
  const stale = staleStages.includes(editor.stage)
    ? `<span class="badge stale">stale</span>`
    : "";
  let preview = "";
  if (editor.preview !== null) {
    const rows = editor.preview.lines
      .map((line) => {
        if (line.result.ok) {
          return `<li class="parsed" data-line="${line.line}">${escapeHtml(
            line.result.canonical
          )}</li>`;
        }
        const err = line.result.error;
        return (
          `<li class="parse-error" data-line="${line.line}">` +
          `${escapeHtml(line.text)} <span class="inline-error">${escapeHtml(
            `${err.message}: ${JSON.stringify(err.token)} (column ${err.column})`
          )}</span></li>`
        );
      })
      .join("");
    const chain = editor.preview.chainIssue
      ? `<p class="inline-error chain" data-line="${editor.preview.chainIssue.index + 1}">${escapeHtml(
          editor.preview.chainIssue.message
        )}</p>`
      : "";
    preview = `<ol class="preview">${rows}</ol>${chain}`;
  }
  const serverError = editor.serverError
    ? `<p class="inline-error server" data-line="${editor.serverError.line ?? ""}">${escapeHtml(
        editor.serverError.message
      )}</p>`
    : "";
  return (
    `<div class="editor" data-stage="${editor.stage}" data-mode="${editor.mode}">` +
    `<h4>stage ${editor.stage} (${editor.mode}) ${stale}</h4>` +
    `<textarea id="stage-buffer">${escapeHtml(editor.buffer)}</textarea>` +
    `${preview}${serverError}</div>`
  );
}

export function renderStageTabs(task: TaskPayload | null, mode: SessionMode): string {
  const session = task?.sessions[mode];
  if (!session) return "";
  const stale = new Set(session.stale_stages);
  return [1, 2, 3, 4, 5]
    .map((stage) => {
      const marker = stale.has(stage) ? ` <span class="badge stale">stale</span>` : "";
      return `<button class="stage-tab" data-mode="${mode}" data-stage="${stage}">stage ${stage}${marker}</button>`;
    })
    .join("");
}

export function renderControls(state: ConsoleViewState): string {
  const task = state.selected;
  if (task === null) return "";
  const disabled = commitEnabled(state) ? "" : " disabled";
  return (
    `<button id="vote-correct">vote correct</button>` +
    `<button id="vote-incorrect">vote incorrect</button>` +
    `<button id="commit"${disabled}>commit to store</button>` +
    `<span class="status status-${task.status}">${task.status}</span>`
  );
}

export function renderToast(toast: Toast | null): string {
  if (toast === null) return "";
  return `<div class="toast toast-${toast.kind}">${escapeHtml(toast.text)}</div>`;
}
