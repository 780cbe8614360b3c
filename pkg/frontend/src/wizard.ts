// The four-step wizard: import, matcher selection, fairness evaluation,
// ensemble resolution. All numbers shown come from the service; the wizard
// only routes payloads into charts and panels.

import {
  ApiClient,
  AuditEntry,
  AuditReport,
  AuditRequest,
  Resolution,
  SessionSummary,
} from "./api.js";
import { AuditChart, ParetoChart } from "./charts.js";
import {
  renderAuditTable,
  renderExplanation,
  renderMultiworkloadTable,
  renderStrategyReport,
} from "./panels.js";
import { SessionState, WizardState } from "./state.js";

const MEASURES = ["accuracy-parity", "fprp", "ppvp", "statistical-parity", "tprp"];

export class Wizard {
  readonly state = new WizardState();
  sessionId: string | null = null;
  lastAudit: AuditReport | null = null;
  lastResolution: Resolution | null = null;
  charts: AuditChart[] = [];

  private readonly steps: Record<number, HTMLElement> = {};

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
    private readonly pollInterval = 400,
  ) {
    this.buildSkeleton();
    this.showStep(1);
  }

  // -- scaffolding ---------------------------------------------------------

  private buildSkeleton(): void {
    this.root.replaceChildren();
    const nav = document.createElement("nav");
    nav.className = "wizard-nav";
    for (const [step, label] of [
      [1, "1 · Import"],
      [2, "2 · Matchers"],
      [3, "3 · Evaluate"],
      [4, "4 · Resolve"],
    ] as Array<[number, string]>) {
      const button = document.createElement("button");
      button.className = "nav-step";
      button.dataset.step = String(step);
      button.textContent = label;
      button.addEventListener("click", () => this.showStep(step));
      nav.appendChild(button);
    }
    this.root.appendChild(nav);
    for (const step of [1, 2, 3, 4]) {
      const section = document.createElement("section");
      section.className = "wizard-step";
      section.dataset.step = String(step);
      section.hidden = true;
      this.root.appendChild(section);
      this.steps[step] = section;
    }
    this.renderStep1();
  }

  showStep(step: number): boolean {
    if (!this.state.enter(step)) {
      this.flash(`complete the earlier steps before step ${step}`);
      return false;
    }
    for (const [key, section] of Object.entries(this.steps)) {
      section.hidden = Number(key) !== step;
    }
    for (const button of this.root.querySelectorAll<HTMLButtonElement>(".nav-step")) {
      button.classList.toggle("current", button.dataset.step === String(step));
      button.disabled = !this.state.canEnter(Number(button.dataset.step));
    }
    return true;
  }

  private flash(message: string): void {
    let banner = this.root.querySelector<HTMLElement>(".flash");
    if (!banner) {
      banner = document.createElement("p");
      banner.className = "flash";
      this.root.prepend(banner);
    }
    banner.textContent = message;
  }

  private observeSummary(summary: SessionSummary): void {
    this.state.observe(summary.state as SessionState);
    this.showStep(this.state.step);
  }

  // -- step 1: data import ----------------------------------------------------

  private renderStep1(): void {
    const step = this.steps[1];
    step.replaceChildren();
    const heading = document.createElement("h2");
    heading.textContent = "Step 1 · Data import";
    step.appendChild(heading);

    const form = document.createElement("form");
    form.className = "import-form";
    form.innerHTML = `
      <label>task
        <select name="mode">
          <option value="match-and-evaluate">match and evaluate</option>
          <option value="evaluate-only">evaluate only (bring scores)</option>
        </select>
      </label>
      <label>table A <input type="file" name="table_a" required></label>
      <label>table B <input type="file" name="table_b" required></label>
      <label>train pairs <input type="file" name="train"></label>
      <label>valid pairs <input type="file" name="valid"></label>
      <label>test pairs <input type="file" name="test" required></label>
      <label>scores (evaluate-only) <input type="file" name="scores"></label>
      <label>sensitive attributes (JSON)
        <input type="text" name="sensitive" value='{"attributes":[{"name":"origin"}]}'>
      </label>
      <button type="submit">Upload dataset</button>
    `;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.uploadDataset(new FormData(form));
    });
    step.appendChild(form);

    const demo = document.createElement("div");
    demo.className = "demo-launch";
    for (const profile of ["scores", "faculty"]) {
      const button = document.createElement("button");
      button.className = "demo-button";
      button.dataset.profile = profile;
      button.textContent = `Load demo dataset (${profile})`;
      button.addEventListener("click", () => void this.loadDemo(profile));
      demo.appendChild(button);
    }
    step.appendChild(demo);
    const summary = document.createElement("pre");
    summary.className = "import-summary";
    step.appendChild(summary);
  }

  async uploadDataset(form: FormData): Promise<void> {
    if (!this.sessionId) {
      this.sessionId = (await this.client.createSession()).session_id;
    }
    const summary = await this.client.uploadDataset(this.sessionId, form);
    this.afterImport(summary);
  }

  async loadDemo(profile: string, seed = 0): Promise<void> {
    const created = await this.client.demoDataset(profile, seed);
    this.sessionId = created.session_id;
    this.afterImport(created.summary);
  }

  private afterImport(summary: SessionSummary): void {
    const node = this.steps[1].querySelector<HTMLElement>(".import-summary");
    if (node) {
      node.textContent = JSON.stringify(summary, null, 2);
    }
    this.observeSummary(summary);
    void this.renderStep2();
    this.showStep(2);
  }

  // -- step 2: matcher selection ------------------------------------------------

  async renderStep2(): Promise<void> {
    if (!this.sessionId) {
      return;
    }
    const step = this.steps[2];
    step.replaceChildren();
    const heading = document.createElement("h2");
    heading.textContent = "Step 2 · Matcher selection";
    step.appendChild(heading);

    const catalog = await this.client.matcherCatalog(this.sessionId);
    const list = document.createElement("ul");
    list.className = "matcher-list";
    for (const matcher of catalog.matchers) {
      const item = document.createElement("li");
      const checkbox = document.createElement("input");
      checkbox.type = "checkbox";
      checkbox.value = matcher.matcher_id;
      checkbox.disabled = matcher.family === "external"; // already scored
      checkbox.checked = matcher.family === "external";
      const label = document.createElement("label");
      label.title = matcher.description; // hover info
      label.append(checkbox, ` ${matcher.matcher_id}`);
      if (matcher.trained) {
        label.append(" ✓");
      }
      item.appendChild(label);
      list.appendChild(item);
    }
    step.appendChild(list);

    const run = document.createElement("button");
    run.className = "train-button";
    run.textContent = "Train selected matchers";
    run.addEventListener("click", () => void this.trainSelected());
    step.appendChild(run);
    const status = document.createElement("p");
    status.className = "job-status";
    step.appendChild(status);
  }

  async trainSelected(): Promise<void> {
    if (!this.sessionId) {
      return;
    }
    const chosen = [
      ...this.steps[2].querySelectorAll<HTMLInputElement>("input[type=checkbox]:checked"),
    ]
      .map((box) => box.value)
      .filter((id) => !id.startsWith("external:"));
    const status = this.steps[2].querySelector<HTMLElement>(".job-status");
    if (chosen.length === 0) {
      this.observeSummary(await this.client.sessionSummary(this.sessionId));
      this.showStep(3);
      this.renderStep3();
      return;
    }
    const job = await this.client.startMatch(this.sessionId, chosen, 0);
    if (status) {
      status.textContent = `training job ${job.job_id} running…`;
    }
    await this.pollJob(job.job_id, status);
    this.observeSummary(await this.client.sessionSummary(this.sessionId));
    this.renderStep3();
    this.showStep(3);
  }

  private async pollJob(jobId: string, status: HTMLElement | null): Promise<void> {
    for (;;) {
      const job = await this.client.jobStatus(jobId);
      if (status) {
        status.textContent = `job ${jobId}: ${job.state} (${Math.round(job.progress * 100)}%)`;
      }
      if (job.state === "done") {
        return;
      }
      if (job.state === "failed") {
        throw new Error(job.error ?? "training failed");
      }
      await new Promise((resolve) => setTimeout(resolve, this.pollInterval));
    }
  }

  // -- step 3: fairness evaluation -------------------------------------------------

  renderStep3(): void {
    const step = this.steps[3];
    step.replaceChildren();
    const heading = document.createElement("h2");
    heading.textContent = "Step 3 · Fairness evaluation";
    step.appendChild(heading);

    const form = document.createElement("form");
    form.className = "audit-form";
    form.innerHTML = `
      <label>paradigm
        <select name="paradigm"><option>single</option><option>pairwise</option></select>
      </label>
      <label>mode
        <select name="mode"><option>subtraction</option><option>division</option></select>
      </label>
      <fieldset class="measure-picker">${MEASURES.map(
        (m) =>
          `<label title="fairness measure ${m}"><input type="checkbox" name="measure" value="${m}" checked> ${m}</label>`,
      ).join("")}</fieldset>
      <label>matching threshold τ <input name="tau" type="number" min="0" max="1" step="0.05" value="0.5"></label>
      <label>fairness threshold θ <input name="theta" type="number" min="0" max="1" step="0.05" value="0.2"></label>
      <label class="unfair-only-label"><input type="checkbox" name="unfair_only"> unfair groups only</label>
      <button type="submit">Run audit</button>
    `;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.runAudit(form);
    });
    step.appendChild(form);

    const chart = document.createElement("div");
    chart.className = "audit-chart-host";
    step.appendChild(chart);
    const tableHost = document.createElement("div");
    tableHost.className = "audit-table-host";
    step.appendChild(tableHost);
    const explanation = document.createElement("aside");
    explanation.className = "explanation-panel";
    step.appendChild(explanation);
    const multiworkload = document.createElement("div");
    multiworkload.className = "multiworkload-host";
    step.appendChild(multiworkload);
  }

  async runAudit(form: HTMLFormElement): Promise<AuditReport> {
    if (!this.sessionId) {
      throw new Error("no session");
    }
    const data = new FormData(form);
    const request: AuditRequest = {
      paradigm: String(data.get("paradigm") ?? "single"),
      measures: [...form.querySelectorAll<HTMLInputElement>("input[name=measure]:checked")].map(
        (box) => box.value,
      ),
      tau_match: Number(data.get("tau") ?? 0.5),
      theta_fair: Number(data.get("theta") ?? 0.2),
      mode: String(data.get("mode") ?? "subtraction"),
    };
    const report = await this.client.runAudit(this.sessionId, request);
    this.lastAudit = report;
    this.state.observe("audited");
    this.presentAudit(report, Number(data.get("theta") ?? 0.2), form);
    return report;
  }

  presentAudit(report: AuditReport, theta: number, form?: HTMLFormElement): void {
    const host = this.steps[3].querySelector<HTMLElement>(".audit-chart-host");
    const tableHost = this.steps[3].querySelector<HTMLElement>(".audit-table-host");
    if (!host || !tableHost) {
      return;
    }
    host.replaceChildren();
    this.charts = [];
    const matchers = [...new Set(report.entries.map((e) => e.matcher))];
    for (const matcher of matchers) {
      const block = document.createElement("div");
      block.className = "matcher-chart";
      block.dataset.matcher = matcher;
      const title = document.createElement("h3");
      title.textContent = matcher;
      block.appendChild(title);
      const mount = document.createElement("div");
      block.appendChild(mount);
      host.appendChild(block);
      this.charts.push(
        new AuditChart(mount, report.entries.filter((e) => e.matcher === matcher), {
          threshold: theta,
          onBarClick: (entry) => void this.explainEntry(entry),
        }),
      );
    }
    const toggle = form?.querySelector<HTMLInputElement>("input[name=unfair_only]");
    if (toggle) {
      toggle.addEventListener("change", () =>
        this.charts.forEach((chart) => chart.setUnfairOnly(toggle.checked)),
      );
      if (toggle.checked) {
        this.charts.forEach((chart) => chart.setUnfairOnly(true));
      }
    }
    renderAuditTable(tableHost, report.entries);
    this.showStep(3);
  }

  async explainEntry(entry: AuditEntry): Promise<void> {
    if (!this.sessionId) {
      return;
    }
    const doc = await this.client.explain(this.sessionId, {
      matcher_id: entry.matcher,
      group: entry.group,
      measure_id: entry.measure,
      paradigm: entry.paradigm,
    });
    const panel = this.steps[3].querySelector<HTMLElement>(".explanation-panel");
    if (panel) {
      renderExplanation(panel, doc);
    }
  }

  async runMultiworkload(k: number, seed: number, alphaSig: number): Promise<void> {
    if (!this.sessionId) {
      return;
    }
    const report = await this.client.runMultiworkload(this.sessionId, k, seed, alphaSig);
    const host = this.steps[3].querySelector<HTMLElement>(".multiworkload-host");
    if (host) {
      renderMultiworkloadTable(host, report.rows);
    }
  }

  // -- step 4: resolution ------------------------------------------------------------

  renderStep4(): void {
    const step = this.steps[4];
    step.replaceChildren();
    const heading = document.createElement("h2");
    heading.textContent = "Step 4 · Ensemble resolution";
    step.appendChild(heading);

    const form = document.createElement("form");
    form.className = "resolve-form";
    const groups = [...new Set((this.lastAudit?.entries ?? []).map((e) => e.group))]
      .filter((g): g is string => typeof g === "string");
    form.innerHTML = `
      <label>focus group
        <select name="target">${groups.map((g) => `<option>${g}</option>`).join("")}</select>
      </label>
      <label>performance measure
        <select name="measure">${MEASURES.map((m) => `<option${m === "tprp" ? " selected" : ""}>${m}</option>`).join("")}</select>
      </label>
      <label>mode
        <select name="mode"><option>subtraction</option><option>division</option></select>
      </label>
      <button type="submit">Explore assignments</button>
    `;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.runResolve(form);
    });
    step.appendChild(form);

    const scatter = document.createElement("div");
    scatter.className = "pareto-host";
    step.appendChild(scatter);
    const strategy = document.createElement("div");
    strategy.className = "strategy-host";
    step.appendChild(strategy);
  }

  async runResolve(form: HTMLFormElement): Promise<Resolution> {
    if (!this.sessionId) {
      throw new Error("no session");
    }
    const data = new FormData(form);
    const resolution = await this.client.resolve(this.sessionId, {
      measure_id: String(data.get("measure") ?? "tprp"),
      mode: String(data.get("mode") ?? "subtraction"),
      target_group: data.get("target") ? String(data.get("target")) : null,
    });
    this.state.observe("resolved");
    this.presentResolution(resolution);
    return resolution;
  }

  presentResolution(resolution: Resolution): void {
    this.lastResolution = resolution;
    const host = this.steps[4].querySelector<HTMLElement>(".pareto-host");
    if (!host) {
      return;
    }
    new ParetoChart(host, resolution, {
      onPointClick: (point) => void this.applyStrategy(point.assignment),
    });
  }

  async applyStrategy(assignment: Record<string, string>): Promise<void> {
    if (!this.sessionId) {
      return;
    }
    const report = await this.client.auditStrategy(this.sessionId, assignment);
    const host = this.steps[4].querySelector<HTMLElement>(".strategy-host");
    if (host) {
      renderStrategyReport(host, report);
    }
  }
}
