// Detail panels: plain data tables built from API payloads, used both in the
// wizard and as snapshot targets in the contract tests.

import {
  AuditEntry,
  ExplanationDoc,
  MultiworkloadRow,
  StrategyReport,
  groupLabel,
} from "./api.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function cellText(value: number | null | undefined): string {
  if (value === null || value === undefined) {
    return "-";
  }
  return Number.isInteger(value) ? String(value) : value.toFixed(4);
}

function table(headers: string[], rows: string[][], className: string): HTMLTableElement {
  const node = el("table", className);
  const head = el("thead");
  const headRow = el("tr");
  for (const header of headers) {
    headRow.appendChild(el("th", undefined, header));
  }
  head.appendChild(headRow);
  const body = el("tbody");
  for (const row of rows) {
    const tr = el("tr");
    for (const value of row) {
      tr.appendChild(el("td", undefined, value));
    }
    body.appendChild(tr);
  }
  node.append(head, body);
  return node;
}

export function renderAuditTable(container: HTMLElement, entries: AuditEntry[]): HTMLTableElement {
  const rows = entries.map((e) => [
    e.matcher,
    e.measure,
    groupLabel(e.group),
    cellText(e.group_value),
    cellText(e.overall_value),
    cellText(e.disparity),
    e.unfair ? "UNFAIR" : e.annotation || "ok",
  ]);
  const node = table(
    ["matcher", "measure", "group", "value", "overall", "disparity", "flag"],
    rows,
    "audit-table",
  );
  for (const [i, entry] of entries.entries()) {
    if (entry.unfair) {
      node.tBodies[0].rows[i].classList.add("unfair");
    }
  }
  container.replaceChildren(node);
  return node;
}

export function renderMultiworkloadTable(
  container: HTMLElement,
  rows: MultiworkloadRow[],
): HTMLTableElement {
  const node = table(
    ["matcher", "measure", "group", "k", "mean", "z", "p", "reject"],
    rows.map((r) => [
      r.matcher,
      r.measure,
      groupLabel(r.group),
      String(r.k),
      cellText(r.mean),
      r.z === null ? "-" : r.z.toFixed(3),
      r.p_value === null ? "-" : r.p_value.toExponential(2),
      r.reject === null ? "-" : String(r.reject),
    ]),
    "multiworkload-table",
  );
  container.replaceChildren(node);
  return node;
}

export function renderExplanation(container: HTMLElement, doc: ExplanationDoc): void {
  container.replaceChildren();
  container.appendChild(el("h3", "panel-title", "Why is this group flagged?"));

  const subgroup = el("section", "explanation-subgroups");
  subgroup.appendChild(el("h4", undefined, "Subgroup drill-down"));
  if (doc.subgroup_breakdown.children.length === 0) {
    subgroup.appendChild(el("p", "empty-reason", doc.subgroup_breakdown.reason));
  } else {
    subgroup.appendChild(
      table(
        ["subgroup", "value", "disparity", "support", "note"],
        doc.subgroup_breakdown.children.map((c) => [
          c.group,
          cellText(c.value),
          cellText(c.disparity),
          String(c.support.tp + c.support.fp + c.support.fn + c.support.tn),
          c.low_support ? "low support" : "",
        ]),
        "subgroup-table",
      ),
    );
  }
  container.appendChild(subgroup);

  const measure = el("section", "explanation-measure");
  measure.appendChild(el("h4", undefined, "Confusion matrix"));
  const cells = doc.measure_breakdown.cells;
  measure.appendChild(
    table(
      ["tp", "fp", "fn", "tn", "tpr", "fpr", "ppv", "accuracy"],
      [
        [
          String(cells.tp),
          String(cells.fp),
          String(cells.fn),
          String(cells.tn),
          cellText(doc.measure_breakdown.rates.tpr),
          cellText(doc.measure_breakdown.rates.fpr),
          cellText(doc.measure_breakdown.rates.ppv),
          cellText(doc.measure_breakdown.rates.accuracy),
        ],
      ],
      "confusion-table",
    ),
  );
  const driver = doc.measure_breakdown.driver;
  measure.appendChild(
    el(
      "p",
      "driver",
      driver
        ? `Dominant driver: zeroing ${driver.toUpperCase()} removes the most disparity.`
        : "No single confusion cell drives a disparity here.",
    ),
  );
  container.appendChild(measure);

  const representation = el("section", "explanation-representation");
  representation.appendChild(el("h4", undefined, `Representation (${doc.representation.split} split)`));
  if (doc.representation.annotation) {
    representation.appendChild(el("p", "empty-reason", doc.representation.annotation));
  } else {
    representation.appendChild(
      table(
        ["entity share", "pair share", "among matches", "among non-matches"],
        [
          [
            cellText(doc.representation.entity_share),
            cellText(doc.representation.pair_share),
            cellText(doc.representation.match_share),
            cellText(doc.representation.non_match_share),
          ],
        ],
        "representation-table",
      ),
    );
  }
  container.appendChild(representation);

  const examples = el("section", "explanation-examples");
  examples.appendChild(el("h4", undefined, "Problematic pairs"));
  if (doc.examples.items.length === 0) {
    examples.appendChild(el("p", "empty-reason", doc.examples.annotation));
  } else {
    const attrs = Object.keys(doc.examples.items[0].left as Record<string, unknown>);
    examples.appendChild(
      table(
        [...attrs.map((a) => `left ${a}`), ...attrs.map((a) => `right ${a}`), "score", "cell"],
        doc.examples.items.map((item) => {
          const left = item.left as Record<string, string>;
          const right = item.right as Record<string, string>;
          return [
            ...attrs.map((a) => String(left[a] ?? "")),
            ...attrs.map((a) => String(right[a] ?? "")),
            cellText(item.score as number),
            String(item.cell),
          ];
        }),
        "examples-table",
      ),
    );
  }
  container.appendChild(examples);
}

export function renderStrategyReport(container: HTMLElement, report: StrategyReport): void {
  container.replaceChildren();
  container.appendChild(el("h3", "panel-title", "Strategy re-audit"));
  const assignment = el("p", "assignment-line");
  assignment.textContent = Object.entries(report.assignment)
    .map(([group, matcher]) => `${group} -> ${matcher}`)
    .join(",  ");
  container.appendChild(assignment);
  const target = el("div");
  container.appendChild(target);
  renderAuditTable(target, report.entries);
  const unfair = report.entries.filter((e) => e.unfair);
  container.appendChild(
    el(
      "p",
      unfair.length === 0 ? "verdict cleared" : "verdict remaining",
      unfair.length === 0
        ? "No group is flagged unfair under this strategy."
        : `${unfair.length} entries still flagged unfair.`,
    ),
  );
}
