/**
 * Pure view-model helpers: formatting, validation, apply planning.
 * Kept free of DOM access so they are unit-testable.
 */

import type { CandidateRow, MetricsRow, SuggestionRow } from "./api.js";

/** Similarity shown to 2 decimals; identity is keyed by id, never by score. */
export function formatScore(score: number): string {
  return score.toFixed(2);
}

export function formatMetric(value: number): string {
  return value.toFixed(4);
}

export function formatRedundancy(score: number | null): string {
  return score === null ? "-" : score.toFixed(2);
}

export function elapsedSeconds(startedAt: string, now: Date = new Date()): number {
  return Math.max(0, (now.getTime() - new Date(startedAt).getTime()) / 1000);
}

export function formatElapsed(seconds: number): string {
  const whole = Math.floor(seconds);
  const minutes = Math.floor(whole / 60);
  return `${minutes}m ${(whole % 60).toString().padStart(2, "0")}s`;
}

/** Candidate rows must render in the API's order: score desc, pair asc. */
export function isSortedByScoreDesc(rows: CandidateRow[]): boolean {
  for (let i = 1; i < rows.length; i++) {
    const prev = rows[i - 1]!;
    const curr = rows[i]!;
    if (curr.score > prev.score) return false;
  }
  return true;
}

/** Mirrors the service-side rule: a modify needs a non-empty summary. */
export function validateEditedSummary(summary: string): string | null {
  if (!summary.trim()) return "summary must not be empty";
  return null;
}

export function thresholdValid(value: number): boolean {
  return value > 0 && value <= 1;
}

export interface ApplyPlan {
  candidates: CandidateRow[];
  suggestions: SuggestionRow[];
  total: number;
}

/** Exactly the items a confirmed apply will consume. */
export function applyPlan(
  candidates: CandidateRow[],
  suggestions: SuggestionRow[],
): ApplyPlan {
  const take = (status: string) => status === "Accepted" || status === "Modified";
  const pickedCandidates = candidates.filter((c) => take(c.status));
  const pickedSuggestions = suggestions.filter((s) => take(s.status));
  return {
    candidates: pickedCandidates,
    suggestions: pickedSuggestions,
    total: pickedCandidates.length + pickedSuggestions.length,
  };
}

export const METRIC_COLUMNS = [
  "Participant",
  "TP",
  "FP",
  "FN",
  "TN",
  "Time",
  "Precision",
  "Recall",
  "Accuracy",
  "F1",
] as const;

/** One metric row rendered in the fixed column order, ratios at 4 decimals. */
export function metricCells(row: MetricsRow): string[] {
  return METRIC_COLUMNS.map((column) => {
    const value = row[column];
    if (column === "Precision" || column === "Recall" || column === "Accuracy" || column === "F1") {
      return formatMetric(value as number);
    }
    return String(value);
  });
}

/** Status badge CSS class per review status. */
export function statusClass(status: string): string {
  switch (status) {
    case "Accepted":
      return "badge badge-accepted";
    case "Rejected":
      return "badge badge-rejected";
    case "Modified":
      return "badge badge-modified";
    default:
      return "badge badge-proposed";
  }
}

/** The text a Modify editor is pre-filled with. */
export function editorPrefill(row: CandidateRow): { summary: string; description: string } {
  if (row.edited_summary !== undefined) {
    return { summary: row.edited_summary, description: row.edited_description ?? "" };
  }
  if (row.proposed_action) {
    return { summary: row.proposed_action.summary, description: row.proposed_action.description };
  }
  return { summary: "", description: "" };
}
