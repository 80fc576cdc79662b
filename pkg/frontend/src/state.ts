/**
 * View state and controller for the curation loop. All server interaction
 * funnels through the injected ApiClient; everything here is DOM-free so the
 * whole flow is testable without a browser.
 */

import {
  ActionJson,
  ApiClient,
  RequestFailed,
  SessionMode,
  SessionPayload,
  TaskPayload,
  Verdict,
} from "./api.js";
import { PlanPreview, previewPlan } from "./dsl.js";
import { DiffRow, diffPlans } from "./diff.js";

export interface ServerDiagnostic {
  message: string;
  line: number | null; // editor line the diagnostic anchors to, when known
}

export interface StageEditor {
  mode: SessionMode;
  stage: number;
  buffer: string;
  preview: PlanPreview | null; // live client-side preview, stage 5 only
  serverError: ServerDiagnostic | null;
}

export interface Toast {
  kind: "gate-add" | "gate-skip" | "error" | "reload";
  text: string;
}

export interface ConsoleViewState {
  scenes: string[];
  tasks: TaskPayload[];
  selected: TaskPayload | null;
  editor: StageEditor | null;
  toast: Toast | null;
  annotator: string;
}

export function initialState(): ConsoleViewState {
  return {
    scenes: [],
    tasks: [],
    selected: null,
    editor: null,
    toast: null,
    annotator: "console",
  };
}

/** Canonical DSL line for a structured action from the API. */
export function actionToLine(action: ActionJson): string {
  const gripper = (v: string) => (v === "open" ? "opened" : "closed");
  const motion = action.motion === "move" ? "move to" : "rotate to";
  const preposition = action.preposition.replace(/_/g, " ");
  return [gripper(action.pre), motion, preposition, action.object ?? "", gripper(action.post)].join(
    ", "
  );
}

export function sessionLines(session: SessionPayload | null): string[] | null {
  if (session === null || session.final === null) return null;
  return session.final.map(actionToLine);
}

export interface ComparisonView {
  rows: DiffRow[] | null; // null when fewer than two plans exist
  fallback: { mode: SessionMode; lines: string[] } | null; // single-column view
  noDemoBadge: boolean;
}

/** Side-by-side view: without-retrieval plan on the left, with on the right. */
export function comparisonView(task: TaskPayload | null): ComparisonView {
  if (task === null) return { rows: null, fallback: null, noDemoBadge: false };
  const icl = task.sessions.icl;
  const noIcl = task.sessions.no_icl;
  const badge = icl !== null && icl.no_demo_available;
  const left = sessionLines(noIcl);
  const right = sessionLines(icl);
  if (left !== null && right !== null) {
    return { rows: diffPlans(left, right), fallback: null, noDemoBadge: badge };
  }
  if (right !== null) {
    return { rows: null, fallback: { mode: "icl", lines: right }, noDemoBadge: badge };
  }
  if (left !== null) {
    return { rows: null, fallback: { mode: "no_icl", lines: left }, noDemoBadge: badge };
  }
  return { rows: null, fallback: null, noDemoBadge: badge };
}

export function commitEnabled(state: ConsoleViewState): boolean {
  return state.selected !== null
    && state.selected.status === "verified"
    && state.selected.committed === null;
}

export function staleStages(task: TaskPayload | null, mode: SessionMode): number[] {
  const session = task?.sessions[mode];
  return session ? session.stale_stages : [];
}

/** Lift "line N:" or "(index N)" out of a server diagnostic for anchoring. */
export function diagnosticLine(message: string): number | null {
  const lineMatch = /^line (\d+):/.exec(message);
  if (lineMatch) return Number(lineMatch[1]);
  const indexMatch = /index (\d+)/.exec(message);
  if (indexMatch) return Number(indexMatch[1]) + 1; // action index -> 1-based line
  return null;
}

export class ConsoleController {
  readonly state: ConsoleViewState;

  constructor(private readonly api: ApiClient) {
    this.state = initialState();
  }

  private selectPayload(task: TaskPayload): void {
    this.state.selected = task;
    const index = this.state.tasks.findIndex((t) => t.id === task.id);
    if (index >= 0) {
      this.state.tasks[index] = task;
    } else {
      this.state.tasks.push(task);
    }
  }

  async refresh(): Promise<void> {
    const [scenes, tasks] = await Promise.all([this.api.listScenes(), this.api.listTasks()]);
    this.state.scenes = scenes.scenes;
    this.state.tasks = tasks.tasks;
    if (this.state.selected !== null) {
      this.state.selected =
        this.state.tasks.find((t) => t.id === this.state.selected!.id) ?? null;
    }
  }

  async createTask(instruction: string, sceneRef: string): Promise<void> {
    const { task } = await this.api.createTask(instruction, sceneRef);
    this.selectPayload(task);
  }

  async selectTask(id: string): Promise<void> {
    const { task } = await this.api.getTask(id);
    this.selectPayload(task);
  }

  async planBoth(): Promise<void> {
    const task = this.requireTask();
    await this.api.plan(task.id, "both");
    await this.selectTask(task.id);
  }

  openEditor(mode: SessionMode, stage: number): void {
    const task = this.requireTask();
    const session = task.sessions[mode];
    if (session === null) throw new Error(`no ${mode} session to edit`);
    const buffer =
      stage === 5 && session.final !== null
        ? session.final.map(actionToLine).join("\n")
        : (session.stages[String(stage)] ?? "");
    this.state.editor = { mode, stage, buffer, preview: null, serverError: null };
    this.updateBuffer(buffer);
  }

  updateBuffer(text: string): void {
    const editor = this.requireEditor();
    editor.buffer = text;
    editor.preview = editor.stage === 5 ? previewPlan(text) : null;
  }

  async saveEditor(): Promise<boolean> {
    const editor = this.requireEditor();
    const task = this.requireTask();
    try {
      await this.api.editStage(task.id, editor.stage, editor.buffer, task.version, editor.mode);
    } catch (error) {
      if (error instanceof RequestFailed && error.error.code === "invalid_meta_action_text") {
        editor.serverError = {
          message: error.error.message,
          line: diagnosticLine(error.error.message),
        };
        return false;
      }
      if (error instanceof RequestFailed && error.error.code === "stale_version") {
        this.state.toast = { kind: "reload", text: "task changed elsewhere; reloaded" };
        await this.selectTask(task.id);
        return false;
      }
      throw error;
    }
    editor.serverError = null;
    await this.selectTask(task.id);
    this.state.editor = null;
    return true;
  }

  async vote(verdict: Verdict, session: SessionMode): Promise<void> {
    const task = this.requireTask();
    await this.api.vote(task.id, verdict, this.state.annotator, session);
    await this.selectTask(task.id);
  }

  async commit(): Promise<void> {
    const task = this.requireTask();
    const result = await this.api.commit(task.id);
    await this.selectTask(task.id);
    if (result.decision === "add") {
      this.state.toast = {
        kind: "gate-add",
        text: `added to the demonstration store as record ${result.record_id}`,
      };
    } else {
      const scores = Object.values(result.scores);
      const worst = scores.length
        ? Math.max(...scores.map((s) => Math.max(s.object_similarity, s.sequence_similarity)))
        : 0;
      this.state.toast = {
        kind: "gate-skip",
        text: `skipped by the augmentation gate (max similarity ${worst.toFixed(2)})`,
      };
    }
  }

  dismissToast(): void {
    this.state.toast = null;
  }

  private requireTask(): TaskPayload {
    if (this.state.selected === null) throw new Error("no task selected");
    return this.state.selected;
  }

  private requireEditor(): StageEditor {
    if (this.state.editor === null) throw new Error("no editor open");
    return this.state.editor;
  }
}
