/**
 * Headless round-trip against a real service process: start a fixture
 * session, accept one candidate, reject one, apply, and check that the
 * receipt screen's data equals GET /report and that the displayed metric
 * row equals the evaluate CLI's output for the same decisions.
 */
import { execFile, spawn, type ChildProcess } from "node:child_process";
import { copyFileSync, mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";
import { promisify } from "node:util";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { GroomerApi } from "../src/api.js";
import { applyPlan, isSortedByScoreDesc, metricCells } from "../src/format.js";

const execFileAsync = promisify(execFile);

const here = dirname(fileURLToPath(import.meta.url));
const repoRoot = resolve(here, "..", "..");
const fixtures = join(repoRoot, "src", "backlog_groomer", "fixtures");

const PORT = 8461;
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess;
let workDir: string;
let truthPath: string;

async function waitForService(api: GroomerApi, attempts = 100): Promise<void> {
  for (let i = 0; i < attempts; i++) {
    try {
      await api.listSessions();
      return;
    } catch {
      await new Promise((r) => setTimeout(r, 100));
    }
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "groomer-ui-"));
  const backlog = join(workDir, "backlog.json");
  copyFileSync(join(fixtures, "demo_backlog.json"), backlog);
  truthPath = join(fixtures, "demo_truth.csv");

  service = spawn(
    "python3",
    [
      "-m",
      "backlog_groomer.cli",
      "serve",
      "--fixture",
      backlog,
      "--truth",
      truthPath,
      "--port",
      String(PORT),
    ],
    { cwd: repoRoot, stdio: ["ignore", "pipe", "pipe"] },
  );
  service.stderr?.on("data", () => undefined);
  await waitForService(new GroomerApi(BASE));
}, 30_000);

afterAll(() => {
  service?.kill("SIGINT");
});

describe("browser-equivalent round trip", () => {
  it("accept one, reject one, apply; receipt == report; metrics == evaluate CLI", async () => {
    const api = new GroomerApi(BASE);

    expect(await api.listSessions()).toEqual([]);

    const session = await api.createSession("interactive", 0.8);
    expect(session.candidate_count).toBe(31);

    const candidates = await api.getCandidates(session.id);
    expect(isSortedByScoreDesc(candidates)).toBe(true);

    // accept the lowest-scored pair, reject the highest-scored one
    const toAccept = candidates[candidates.length - 1]!;
    const toReject = candidates[0]!;
    const accepted = await api.decide(session.id, toAccept.id, "accept");
    expect(accepted.status).toBe("Accepted");
    const rejected = await api.decide(session.id, toReject.id, "reject");
    expect(rejected.status).toBe("Rejected");

    // the confirmation screen lists exactly the accepted item
    const refreshed = await api.getCandidates(session.id);
    const plan = applyPlan(refreshed, []);
    expect(plan.total).toBe(1);
    expect(plan.candidates[0]!.id).toBe(toAccept.id);

    const applied = await api.apply(session.id);
    const report = await api.report(session.id);
    expect(report).toEqual(applied);
    expect(report.predicted_pairs).toEqual([[toAccept.pair.a, toAccept.pair.b]]);
    expect(report.receipts).toHaveLength(1);
    expect(report.receipts[0]!.ok).toBe(true);

    // a locked session rejects further decisions (row lock + banner path)
    const locked = await api
      .decide(session.id, toReject.id, "accept")
      .catch((error) => error);
    expect(locked.status).toBe(409);

    // the metric row the UI displays equals the evaluate CLI on the same pairs
    expect(report.metrics).not.toBeNull();
    const pairsCsv = join(workDir, "predicted.csv");
    writeFileSync(
      pairsCsv,
      "issue_a,issue_b\n" +
        report.predicted_pairs.map(([a, b]) => `${a},${b}`).join("\n") +
        "\n",
    );
    const { stdout } = await execFileAsync(
      "python3",
      [
        "-m",
        "backlog_groomer.cli",
        "evaluate",
        "--predictions",
        pairsCsv,
        "--truth",
        truthPath,
        "--time-seconds",
        String(report.time_seconds),
        "--participant",
        session.id,
      ],
      { cwd: repoRoot },
    );
    const cliRow = JSON.parse(stdout)[0];
    expect(report.metrics).toEqual(cliRow);
    expect(metricCells(report.metrics!)).toEqual(metricCells(cliRow));

    // state is all server-side: a fresh client reconstructs the same table
    const fresh = new GroomerApi(BASE);
    const reconstructed = await fresh.getCandidates(session.id);
    expect(reconstructed).toEqual(refreshed);
  }, 30_000);
});
