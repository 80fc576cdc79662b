/**
 * Client-side meta-action grammar, used only for live parse previews in the
 * stage editor. The server verdict is authoritative: this module is kept in
 * lockstep with it via the shared 50-line corpus golden test, and any
 * divergence there is a bug here, not something to merge around.
 */

export type GripperWord = "opened" | "closed";
export type MotionWord = "move to" | "rotate to";

export const PREPOSITIONS = [
  "above",
  "on",
  "front on",
  "behind",
  "left of",
  "right of",
  "into",
  "up",
  "down",
  "forward",
  "backward",
] as const;

export type Preposition = (typeof PREPOSITIONS)[number];

export interface MetaAction {
  pre: GripperWord;
  motion: MotionWord;
  preposition: Preposition;
  object: string | null;
  post: GripperWord;
}

export type ParseErrorKind =
  | "unknown_gripper_word"
  | "unknown_motion_word"
  | "unknown_preposition"
  | "field_count_mismatch";

export interface ParseError {
  kind: ParseErrorKind;
  token: string;
  column: number; // 1-based column of the offending token
  message: string;
}

export type ParseResult =
  | { ok: true; action: MetaAction; canonical: string }
  | { ok: false; error: ParseError };

const GRIPPER_WORDS: Record<string, GripperWord> = {
  opened: "opened",
  open: "opened",
  closed: "closed",
  close: "closed",
};

const MOTION_WORDS: Record<string, MotionWord> = {
  "move to": "move to",
  move: "move to",
  "rotate to": "rotate to",
  rotate: "rotate to",
};

const PREPOSITION_SET = new Set<string>(PREPOSITIONS);

/** Lowercase and collapse runs of whitespace, exactly like the server. */
function normalizeToken(raw: string): string {
  return raw.toLowerCase().split(/\s+/).filter(Boolean).join(" ");
}

interface Field {
  text: string;
  column: number;
}

function splitFields(line: string): Field[] {
  const fields: Field[] = [];
  let start = 0;
  for (const part of line.split(",")) {
    const stripped = part.trim();
    const offset = stripped ? part.indexOf(stripped) : 0;
    fields.push({ text: stripped, column: start + offset + 1 });
    start += part.length + 1;
  }
  return fields;
}

function fail(kind: ParseErrorKind, token: string, column: number, message: string): ParseResult {
  return { ok: false, error: { kind, token, column, message } };
}

export function parseLine(line: string): ParseResult {
  const fields = splitFields(line);
  if (fields.length !== 5) {
    const extra = fields.length > 5 ? fields[5]! : { text: "", column: line.length + 1 };
    return fail(
      "field_count_mismatch",
      extra.text,
      extra.column,
      `expected 5 comma-separated fields, got ${fields.length}`
    );
  }
  const [preField, motionField, prepField, objField, postField] = fields as [
    Field,
    Field,
    Field,
    Field,
    Field,
  ];

  const pre = GRIPPER_WORDS[normalizeToken(preField.text)];
  if (pre === undefined) {
    return fail("unknown_gripper_word", preField.text, preField.column, "unknown gripper word");
  }
  const motion = MOTION_WORDS[normalizeToken(motionField.text)];
  if (motion === undefined) {
    return fail("unknown_motion_word", motionField.text, motionField.column, "unknown motion word");
  }
  const preposition = normalizeToken(prepField.text);
  if (!PREPOSITION_SET.has(preposition)) {
    return fail("unknown_preposition", prepField.text, prepField.column, "unknown preposition");
  }
  const post = GRIPPER_WORDS[normalizeToken(postField.text)];
  if (post === undefined) {
    return fail("unknown_gripper_word", postField.text, postField.column, "unknown gripper word");
  }
  const object = normalizeToken(objField.text) || null;
  const action: MetaAction = {
    pre,
    motion,
    preposition: preposition as Preposition,
    object,
    post,
  };
  return { ok: true, action, canonical: serialize(action) };
}

export function serialize(action: MetaAction): string {
  return [action.pre, action.motion, action.preposition, action.object ?? "", action.post].join(
    ", "
  );
}

export interface LinePreview {
  line: number; // 1-based line number in the editor buffer
  text: string;
  result: ParseResult;
}

export interface ChainIssue {
  index: number; // action index, mirroring the server's diagnostics
  message: string;
}

export interface PlanPreview {
  lines: LinePreview[];
  actions: MetaAction[];
  chainIssue: ChainIssue | null;
  valid: boolean;
}

/**
 * Preview a whole stage-5 buffer: per-line parse verdicts plus the first
 * chain violation, matching how the server validates an edit.
 */
export function previewPlan(text: string, initial: GripperWord = "opened"): PlanPreview {
  const lines: LinePreview[] = [];
  let lineNo = 0;
  for (const raw of text.split("\n")) {
    lineNo += 1;
    if (!raw.trim()) continue;
    lines.push({ line: lineNo, text: raw, result: parseLine(raw) });
  }
  const actions = lines
    .map((l) => l.result)
    .filter((r): r is Extract<ParseResult, { ok: true }> => r.ok)
    .map((r) => r.action);

  let chainIssue: ChainIssue | null = null;
  const allParsed = lines.length > 0 && lines.every((l) => l.result.ok);
  if (allParsed) {
    if (actions[0]!.pre !== initial) {
      chainIssue = {
        index: 0,
        message: `action 0 starts ${actions[0]!.pre} but the gripper is ${initial}`,
      };
    } else {
      for (let i = 1; i < actions.length; i += 1) {
        if (actions[i - 1]!.post !== actions[i]!.pre) {
          chainIssue = {
            index: i,
            message:
              `broken linkage at index ${i}: previous action ends ` +
              `${actions[i - 1]!.post} but this one starts ${actions[i]!.pre}`,
          };
          break;
        }
      }
    }
  }
  return { lines, actions, chainIssue, valid: allParsed && chainIssue === null };
}
