/** Line alignment for the side-by-side plan comparison pane. */

export type RowKind = "same" | "changed" | "left-only" | "right-only";

export interface DiffRow {
  line: number; // 1-based
  left: string;
  right: string;
  kind: RowKind;
}

export function diffPlans(leftLines: string[], rightLines: string[]): DiffRow[] {
  const rows: DiffRow[] = [];
  const max = Math.max(leftLines.length, rightLines.length);
  for (let i = 0; i < max; i += 1) {
    const left = leftLines[i];
    const right = rightLines[i];
    let kind: RowKind;
    if (left === undefined) {
      kind = "right-only";
    } else if (right === undefined) {
      kind = "left-only";
    } else {
      kind = left === right ? "same" : "changed";
    }
    rows.push({ line: i + 1, left: left ?? "", right: right ?? "", kind });
  }
  return rows;
}

export function highlightedCount(rows: DiffRow[]): number {
  return rows.filter((r) => r.kind !== "same").length;
}
