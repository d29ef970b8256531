/**
 * The review surface: session dashboard, candidate/suggestion tables with
 * accept / reject / modify controls, and the confirmation-gated apply
 * screen. All state lives server-side; every render re-reads the API, so
 * a page refresh reconstructs the exact same table.
 */

import { ApiError, GroomerApi } from "./api.js";
import type { CandidateRow, Report, SuggestionRow, Verdict } from "./api.js";
import {
  applyPlan,
  editorPrefill,
  elapsedSeconds,
  formatElapsed,
  formatRedundancy,
  formatScore,
  isSortedByScoreDesc,
  metricCells,
  METRIC_COLUMNS,
  statusClass,
  thresholdValid,
  validateEditedSummary,
} from "./format.js";

export class App {
  private api: GroomerApi;
  private root: HTMLElement;
  private sessionId: string | null = null;
  private ticker: number | undefined;

  constructor(root: HTMLElement, api: GroomerApi = new GroomerApi()) {
    this.root = root;
    this.api = api;
  }

  async start(): Promise<void> {
    await this.showDashboard();
  }

  private banner(message: string, tone: "error" | "info" = "error"): void {
    const el = this.root.querySelector<HTMLElement>("#banner");
    if (!el) return;
    el.textContent = message;
    el.className = `banner banner-${tone}`;
    el.hidden = false;
  }

  private clearBanner(): void {
    const el = this.root.querySelector<HTMLElement>("#banner");
    if (el) el.hidden = true;
  }

  // ---- dashboard ----------------------------------------------------------

  async showDashboard(): Promise<void> {
    window.clearInterval(this.ticker);
    this.sessionId = null;
    this.root.innerHTML = `
      <header><h1>Backlog grooming</h1></header>
      <div id="banner" hidden></div>
      <section class="panel">
        <h2>New scan session</h2>
        <form id="new-session">
          <label>Mode
            <select name="mode">
              <option value="interactive" selected>interactive</option>
              <option value="auto">auto</option>
            </select>
          </label>
          <label>Similarity threshold
            <input type="range" name="threshold" min="0.01" max="1" step="0.01" value="0.80">
            <output id="threshold-value">0.80</output>
          </label>
          <button type="submit">Scan backlog</button>
        </form>
      </section>
      <section class="panel">
        <h2>Sessions</h2>
        <div id="session-list"></div>
      </section>`;

    const form = this.root.querySelector<HTMLFormElement>("#new-session")!;
    const slider = form.querySelector<HTMLInputElement>("input[name=threshold]")!;
    const output = this.root.querySelector<HTMLOutputElement>("#threshold-value")!;
    slider.addEventListener("input", () => {
      output.value = Number(slider.value).toFixed(2);
    });
    form.addEventListener("submit", async (event) => {
      event.preventDefault();
      const mode = (form.elements.namedItem("mode") as HTMLSelectElement)
        .value as "interactive" | "auto";
      const threshold = Number(slider.value);
      if (!thresholdValid(threshold)) {
        this.banner("threshold must be in (0, 1]");
        return;
      }
      try {
        const session = await this.api.createSession(mode, threshold);
        await this.showSession(session.id);
      } catch (error) {
        this.banner(this.describe(error));
      }
    });

    await this.renderSessionList();
  }

  private async renderSessionList(): Promise<void> {
    const target = this.root.querySelector<HTMLElement>("#session-list")!;
    try {
      const sessions = await this.api.listSessions();
      this.clearBanner();
      if (sessions.length === 0) {
        target.innerHTML = `<p class="empty">No sessions yet. Start a scan above.</p>`;
        return;
      }
      target.innerHTML = `
        <table>
          <thead><tr>
            <th>id</th><th>mode</th><th>project</th><th>candidates</th>
            <th>decisions</th><th>elapsed</th><th>state</th><th></th>
          </tr></thead>
          <tbody>${sessions
            .map(
              (s) => `<tr>
                <td>${s.id}</td><td>${s.mode}</td><td>${s.project_key}</td>
                <td>${s.candidate_count}</td><td>${s.decision_count}</td>
                <td>${formatElapsed(elapsedSeconds(s.started_at))}</td>
                <td>${s.applied_at ? "applied" : "open"}</td>
                <td><button data-open="${s.id}">open</button></td>
              </tr>`,
            )
            .join("")}</tbody>
        </table>`;
      target.querySelectorAll<HTMLButtonElement>("button[data-open]").forEach((button) => {
        button.addEventListener("click", () => this.showSession(button.dataset.open!));
      });
    } catch (error) {
      this.banner(`service unreachable: ${this.describe(error)}`);
      target.innerHTML = `<p class="empty"><button id="retry">retry</button></p>`;
      target.querySelector("#retry")?.addEventListener("click", () => this.renderSessionList());
    }
  }

  // ---- session view -------------------------------------------------------

  async showSession(sessionId: string): Promise<void> {
    this.sessionId = sessionId;
    window.clearInterval(this.ticker);
    this.root.innerHTML = `
      <header>
        <h1>Session ${sessionId}</h1>
        <nav><button id="back">all sessions</button></nav>
      </header>
      <div id="banner" hidden></div>
      <section class="panel" id="session-meta"></section>
      <section class="panel">
        <h2>Duplicate candidates</h2>
        <div id="candidates"></div>
      </section>
      <section class="panel">
        <h2>Suggested new issues</h2>
        <form id="suggest-form">
          <input type="text" name="prompt" placeholder="optional guidance">
          <button type="submit">Request suggestions</button>
        </form>
        <div id="suggestions"></div>
      </section>
      <section class="panel" id="apply-panel"></section>`;
    this.root.querySelector("#back")!.addEventListener("click", () => this.showDashboard());
    this.root
      .querySelector<HTMLFormElement>("#suggest-form")!
      .addEventListener("submit", async (event) => {
        event.preventDefault();
        const input = this.root.querySelector<HTMLInputElement>("input[name=prompt]")!;
        try {
          await this.api.requestSuggestions(sessionId, input.value);
          await this.refresh();
        } catch (error) {
          this.banner(this.describe(error));
        }
      });
    await this.refresh();
  }

  private async refresh(): Promise<void> {
    if (!this.sessionId) return;
    const id = this.sessionId;
    const [session, candidates, suggestions] = await Promise.all([
      this.api.getSession(id),
      this.api.getCandidates(id),
      this.api.getSuggestions(id),
    ]);
    const applied = session.applied_at !== null;

    const meta = this.root.querySelector<HTMLElement>("#session-meta")!;
    meta.innerHTML = `
      <span>mode <strong>${session.mode}</strong></span>
      <span>threshold <strong>${session.threshold.toFixed(2)}</strong></span>
      <span>issues <strong>${session.issue_count}</strong></span>
      <span>candidates <strong>${session.candidate_count}</strong></span>
      <span>elapsed <strong id="elapsed"></strong></span>`;
    const elapsed = meta.querySelector<HTMLElement>("#elapsed")!;
    const tick = () => {
      elapsed.textContent = formatElapsed(elapsedSeconds(session.started_at));
    };
    tick();
    window.clearInterval(this.ticker);
    if (!applied) this.ticker = window.setInterval(tick, 1000);

    this.renderCandidates(candidates, applied);
    this.renderSuggestions(suggestions, applied);
    if (applied) {
      const report = await this.api.report(id);
      this.renderReport(report);
    } else {
      this.renderApplyPanel(candidates, suggestions);
    }
  }

  private renderCandidates(rows: CandidateRow[], locked: boolean): void {
    const target = this.root.querySelector<HTMLElement>("#candidates")!;
    if (rows.length === 0) {
      target.innerHTML = `<p class="empty">No pairs above the threshold.</p>`;
      return;
    }
    if (!isSortedByScoreDesc(rows)) {
      // the API contract guarantees this; surfacing beats silently reordering
      this.banner("candidate order from the service is not score-descending");
    }
    target.innerHTML = `
      <table>
        <thead><tr>
          <th>score</th><th>pair</th><th>summaries</th>
          <th>proposed action</th><th>status</th><th>decide</th>
        </tr></thead>
        <tbody>${rows
          .map(
            (row) => `<tr data-row="${row.id}">
              <td class="score">${formatScore(row.score)}</td>
              <td class="keys">${row.pair.a}<br>${row.pair.b}</td>
              <td>${escapeHtml(row.a_summary)}<br>${escapeHtml(row.b_summary)}</td>
              <td class="action">${
                row.proposed_action
                  ? `merge into <strong>${row.proposed_action.survivor}</strong>: ${escapeHtml(row.proposed_action.summary)}`
                  : ""
              }</td>
              <td><span class="${statusClass(row.status)}">${row.status}</span></td>
              <td class="controls">${
                locked
                  ? ""
                  : `<button data-verdict="accept">accept</button>
                     <button data-verdict="reject">reject</button>
                     <button data-verdict="modify">modify</button>`
              }</td>
            </tr>
            <tr class="editor" data-editor="${row.id}" hidden><td colspan="6">
              <label>summary <input type="text" name="summary"></label>
              <label>description <textarea name="description"></textarea></label>
              <span class="validation" hidden></span>
              <button data-save="${row.id}">save modification</button>
            </td></tr>`,
          )
          .join("")}</tbody>
      </table>`;
    if (!locked) this.wireDecisionControls(target, rows, "candidate");
  }

  private renderSuggestions(rows: SuggestionRow[], locked: boolean): void {
    const target = this.root.querySelector<HTMLElement>("#suggestions")!;
    if (rows.length === 0) {
      target.innerHTML = `<p class="empty">No suggestions requested yet.</p>`;
      return;
    }
    target.innerHTML = `
      <table>
        <thead><tr>
          <th>summary</th><th>rationale</th><th>redundancy</th><th>status</th><th>decide</th>
        </tr></thead>
        <tbody>${rows
          .map(
            (row) => `<tr data-row="${row.id}">
              <td>${escapeHtml(row.summary)}</td>
              <td>${escapeHtml(row.rationale)}</td>
              <td class="score">${formatRedundancy(row.redundancy_score)}</td>
              <td><span class="${statusClass(row.status)}">${row.status}</span></td>
              <td class="controls">${
                locked
                  ? ""
                  : `<button data-verdict="accept">accept</button>
                     <button data-verdict="reject">reject</button>`
              }</td>
            </tr>`,
          )
          .join("")}</tbody>
      </table>`;
    if (!locked) this.wireDecisionControls(target, rows, "suggestion");
  }

  private wireDecisionControls(
    target: HTMLElement,
    rows: (CandidateRow | SuggestionRow)[],
    kind: "candidate" | "suggestion",
  ): void {
    const byId = new Map(rows.map((row) => [row.id, row]));
    target.querySelectorAll<HTMLButtonElement>("button[data-verdict]").forEach((button) => {
      button.addEventListener("click", async () => {
        const rowEl = button.closest<HTMLElement>("tr[data-row]")!;
        const itemId = rowEl.dataset.row!;
        const verdict = button.dataset.verdict as Verdict;
        if (verdict === "modify" && kind === "candidate") {
          const editor = target.querySelector<HTMLElement>(`tr[data-editor="${itemId}"]`)!;
          const prefill = editorPrefill(byId.get(itemId) as CandidateRow);
          editor.querySelector<HTMLInputElement>("input[name=summary]")!.value = prefill.summary;
          editor.querySelector<HTMLTextAreaElement>("textarea[name=description]")!.value =
            prefill.description;
          editor.hidden = !editor.hidden;
          return;
        }
        await this.submitDecision(rowEl, itemId, verdict);
      });
    });
    target.querySelectorAll<HTMLButtonElement>("button[data-save]").forEach((button) => {
      button.addEventListener("click", async () => {
        const editor = button.closest<HTMLElement>("tr[data-editor]")!;
        const summary = editor.querySelector<HTMLInputElement>("input[name=summary]")!.value;
        const description = editor.querySelector<HTMLTextAreaElement>(
          "textarea[name=description]",
        )!.value;
        const problem = validateEditedSummary(summary);
        const validation = editor.querySelector<HTMLElement>(".validation")!;
        if (problem) {
          validation.textContent = problem;
          validation.hidden = false;
          return;
        }
        validation.hidden = true;
        const itemId = editor.dataset.editor!;
        const rowEl = this.root.querySelector<HTMLElement>(`tr[data-row="${itemId}"]`)!;
        await this.submitDecision(rowEl, itemId, "modify", { summary, description });
      });
    });
  }

  private async submitDecision(
    rowEl: HTMLElement,
    itemId: string,
    verdict: Verdict,
    editedPayload?: { summary: string; description: string },
  ): Promise<void> {
    const badge = rowEl.querySelector<HTMLElement>(".badge")!;
    const before = { text: badge.textContent ?? "", className: badge.className };
    // optimistic flip; reverted if the service rejects the decision
    const optimistic = verdict === "accept" ? "Accepted" : verdict === "reject" ? "Rejected" : "Modified";
    badge.textContent = optimistic;
    badge.className = statusClass(optimistic);
    try {
      await this.api.decide(this.sessionId!, itemId, verdict, editedPayload);
      this.clearBanner();
      await this.refresh();
    } catch (error) {
      badge.textContent = before.text;
      badge.className = before.className;
      if (error instanceof ApiError && error.status === 409) {
        rowEl.classList.add("locked");
        this.banner("session already applied; decisions are closed");
      } else {
        this.banner(this.describe(error));
      }
    }
  }

  // ---- apply --------------------------------------------------------------

  private renderApplyPanel(candidates: CandidateRow[], suggestions: SuggestionRow[]): void {
    const panel = this.root.querySelector<HTMLElement>("#apply-panel")!;
    const plan = applyPlan(candidates, suggestions);
    panel.innerHTML = `
      <h2>Apply</h2>
      <p>These confirmed items will be written to the tracker. Nothing else is touched.</p>
      <ul>${plan.candidates
        .map((c) => `<li>merge ${c.pair.a} + ${c.pair.b} (${c.status})</li>`)
        .join("")}${plan.suggestions
        .map((s) => `<li>create: ${escapeHtml(s.summary)} (${s.status})</li>`)
        .join("")}</ul>
      <button id="apply-button" ${plan.total === 0 ? "disabled" : ""}>
        Confirm and apply ${plan.total} item(s)
      </button>`;
    panel.querySelector<HTMLButtonElement>("#apply-button")!.addEventListener("click", async () => {
      try {
        const report = await this.api.apply(this.sessionId!);
        this.renderReport(report);
        await this.refresh();
      } catch (error) {
        this.banner(this.describe(error));
      }
    });
  }

  private renderReport(report: Report): void {
    const panel = this.root.querySelector<HTMLElement>("#apply-panel")!;
    const steps = report.receipts.flatMap((receipt) => receipt.steps);
    panel.innerHTML = `
      <h2>Apply receipt</h2>
      <p>session read-only; completed in <strong>${report.time_seconds.toFixed(1)} s</strong></p>
      <table>
        <thead><tr><th>target</th><th>operation</th><th>outcome</th></tr></thead>
        <tbody>${steps
          .map(
            (step) =>
              `<tr><td>${step.target}</td><td>${step.operation}</td><td>${step.outcome}</td></tr>`,
          )
          .join("")}</tbody>
      </table>
      <div id="metrics"></div>`;
    if (report.metrics) {
      const cells = metricCells(report.metrics);
      panel.querySelector<HTMLElement>("#metrics")!.innerHTML = `
        <h3>Scored against ground truth</h3>
        <table>
          <thead><tr>${METRIC_COLUMNS.map((c) => `<th>${c}</th>`).join("")}</tr></thead>
          <tbody><tr>${cells.map((cell) => `<td>${cell}</td>`).join("")}</tr></tbody>
        </table>`;
    }
  }

  private describe(error: unknown): string {
    if (error instanceof ApiError) return `${error.code}: ${error.message}`;
    return error instanceof Error ? error.message : String(error);
  }
}

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}
