import { describe, expect, it } from "vitest";

import type { CandidateRow, MetricsRow, SuggestionRow } from "../src/api.js";
import {
  applyPlan,
  editorPrefill,
  elapsedSeconds,
  formatElapsed,
  formatMetric,
  formatScore,
  isSortedByScoreDesc,
  metricCells,
  statusClass,
  thresholdValid,
  validateEditedSummary,
} from "../src/format.js";

function candidate(id: string, score: number, status = "Proposed"): CandidateRow {
  return {
    id,
    status: status as CandidateRow["status"],
    pair: { a: "P-1", b: "P-2" },
    a_summary: "a",
    b_summary: "b",
    score,
    proposed_action: {
      kind: "MergeCluster",
      survivor: "P-1",
      absorbed: ["P-2"],
      summary: "merged summary",
      description: "merged body",
    },
  };
}

function suggestion(id: string, status = "Proposed"): SuggestionRow {
  return {
    id,
    status: status as SuggestionRow["status"],
    summary: "s",
    description: "d",
    rationale: "r",
    redundancy_score: 0.12,
  };
}

describe("formatting", () => {
  it("renders similarity to 2 decimals", () => {
    expect(formatScore(0.9874029997)).toBe("0.99");
    expect(formatScore(1)).toBe("1.00");
  });

  it("renders metrics to 4 decimals", () => {
    expect(formatMetric(0.32)).toBe("0.3200");
    expect(formatMetric(0.19512195)).toBe("0.1951");
  });

  it("formats elapsed time", () => {
    expect(formatElapsed(0)).toBe("0m 00s");
    expect(formatElapsed(754)).toBe("12m 34s");
  });

  it("computes elapsed seconds from the session start", () => {
    const started = "2025-04-01T12:00:00Z";
    const now = new Date("2025-04-01T12:01:30Z");
    expect(elapsedSeconds(started, now)).toBe(90);
  });
});

describe("ordering and validation", () => {
  it("accepts score-descending rows, rejects others", () => {
    expect(isSortedByScoreDesc([candidate("1", 0.9), candidate("2", 0.8)])).toBe(true);
    expect(isSortedByScoreDesc([candidate("1", 0.8), candidate("2", 0.9)])).toBe(false);
    expect(isSortedByScoreDesc([])).toBe(true);
  });

  it("blocks empty edited summaries client-side", () => {
    expect(validateEditedSummary("")).not.toBeNull();
    expect(validateEditedSummary("   ")).not.toBeNull();
    expect(validateEditedSummary("fine")).toBeNull();
  });

  it("threshold slider bounds mirror the service validation", () => {
    expect(thresholdValid(0)).toBe(false);
    expect(thresholdValid(1.01)).toBe(false);
    expect(thresholdValid(0.8)).toBe(true);
    expect(thresholdValid(1)).toBe(true);
  });
});

describe("apply plan", () => {
  it("collects exactly accepted and modified items", () => {
    const plan = applyPlan(
      [candidate("c1", 0.9, "Accepted"), candidate("c2", 0.8), candidate("c3", 0.7, "Rejected")],
      [suggestion("s1", "Modified"), suggestion("s2")],
    );
    expect(plan.candidates.map((c) => c.id)).toEqual(["c1"]);
    expect(plan.suggestions.map((s) => s.id)).toEqual(["s1"]);
    expect(plan.total).toBe(2);
  });

  it("empty plan keeps the apply button disabled", () => {
    expect(applyPlan([candidate("c1", 0.9)], []).total).toBe(0);
  });
});

describe("metric row rendering", () => {
  it("matches the fixed column order with 4-decimal ratios", () => {
    const row: MetricsRow = {
      Participant: "sess-0001",
      TP: 8, FP: 1, FN: 33, TN: 1233,
      Time: 1500,
      Precision: 0.8889, Recall: 0.1951, Accuracy: 0.9733, F1: 0.32,
    };
    expect(metricCells(row)).toEqual([
      "sess-0001", "8", "1", "33", "1233", "1500",
      "0.8889", "0.1951", "0.9733", "0.3200",
    ]);
  });
});

describe("modify editor prefill", () => {
  it("prefers prior edits, falls back to the proposed action", () => {
    const fresh = candidate("c1", 0.9);
    expect(editorPrefill(fresh)).toEqual({
      summary: "merged summary",
      description: "merged body",
    });
    const edited = { ...fresh, edited_summary: "mine", edited_description: "hand" };
    expect(editorPrefill(edited)).toEqual({ summary: "mine", description: "hand" });
  });
});

describe("status badges", () => {
  it("maps every status to a class", () => {
    expect(statusClass("Accepted")).toContain("accepted");
    expect(statusClass("Rejected")).toContain("rejected");
    expect(statusClass("Modified")).toContain("modified");
    expect(statusClass("Proposed")).toContain("proposed");
  });
});
