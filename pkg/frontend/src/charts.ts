// SVG charts rendered straight from API payloads: a grouped disparity bar
// chart with the fairness-threshold line, and the fairness/performance
// scatter with the Pareto frontier highlighted.

import { AuditEntry, Resolution, ResolutionPoint, groupLabel } from "./api.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function svgElement<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number> = {},
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    el.setAttribute(key, String(value));
  }
  return el;
}

export interface AuditChartOptions {
  threshold: number;
  width?: number;
  height?: number;
  onBarClick?: (entry: AuditEntry) => void;
}

interface Layout {
  width: number;
  height: number;
  left: number;
  bottom: number;
  top: number;
}

export class AuditChart {
  private activeMeasures: Set<string>;
  private unfairOnly = false;
  private readonly measures: string[];

  constructor(
    private readonly container: HTMLElement,
    private readonly entries: AuditEntry[],
    private readonly options: AuditChartOptions,
  ) {
    this.measures = [...new Set(entries.map((e) => e.measure))];
    this.activeMeasures = new Set(this.measures);
    this.render();
  }

  setUnfairOnly(value: boolean): void {
    this.unfairOnly = value;
    this.render();
  }

  toggleMeasure(measure: string): void {
    if (this.activeMeasures.has(measure)) {
      this.activeMeasures.delete(measure);
    } else {
      this.activeMeasures.add(measure);
    }
    this.render();
  }

  visibleEntries(): AuditEntry[] {
    return this.entries.filter(
      (e) =>
        e.disparity !== null &&
        this.activeMeasures.has(e.measure) &&
        (!this.unfairOnly || e.unfair),
    );
  }

  render(): void {
    this.container.replaceChildren();
    const layout: Layout = {
      width: this.options.width ?? 640,
      height: this.options.height ?? 280,
      left: 42,
      bottom: 40,
      top: 12,
    };
    const plotHeight = layout.height - layout.top - layout.bottom;
    const y = (disparity: number) => layout.top + plotHeight * (1 - disparity);

    const svg = svgElement("svg", {
      width: layout.width,
      height: layout.height,
      class: "audit-chart",
      role: "img",
    });

    const visible = this.visibleEntries();
    const groups = [...new Set(visible.map((e) => groupLabel(e.group)))];
    const slot = (layout.width - layout.left - 8) / Math.max(groups.length, 1);
    const measureCount = Math.max(this.activeMeasures.size, 1);
    const barWidth = Math.min(26, (slot - 10) / measureCount);
    const shownMeasures = this.measures.filter((m) => this.activeMeasures.has(m));

    for (const entry of visible) {
      const label = groupLabel(entry.group);
      const gi = groups.indexOf(label);
      const mi = shownMeasures.indexOf(entry.measure);
      const x = layout.left + gi * slot + 5 + mi * barWidth;
      const disparity = entry.disparity ?? 0;
      const bar = svgElement("rect", {
        x,
        y: y(disparity),
        width: Math.max(barWidth - 2, 2),
        height: Math.max(plotHeight * disparity, disparity > 0 ? 1 : 0.5),
        "data-group": label,
        "data-measure": entry.measure,
        "data-matcher": entry.matcher,
        "data-disparity": disparity,
      });
      bar.setAttribute("class", entry.unfair ? "bar unfair" : "bar");
      const hover = svgElement("title");
      hover.textContent =
        `${entry.matcher} · ${entry.measure} · ${label}\n` +
        `group value ${fmt(entry.group_value)}, overall ${fmt(entry.overall_value)}\n` +
        `disparity ${fmt(entry.disparity)} (${entry.mode})` +
        `, support tp=${entry.support.tp} fp=${entry.support.fp}` +
        ` fn=${entry.support.fn} tn=${entry.support.tn}` +
        (entry.annotation ? `\n${entry.annotation}` : "");
      bar.appendChild(hover);
      if (this.options.onBarClick) {
        bar.addEventListener("click", () => this.options.onBarClick?.(entry));
      }
      svg.appendChild(bar);
    }

    for (const [gi, label] of groups.entries()) {
      const text = svgElement("text", {
        x: layout.left + gi * slot + slot / 2,
        y: layout.height - layout.bottom + 16,
        "text-anchor": "middle",
        class: "group-label",
      });
      text.textContent = label;
      svg.appendChild(text);
    }

    // the fairness threshold: everything crossing this line is unfair
    const line = svgElement("line", {
      x1: layout.left,
      x2: layout.width - 4,
      y1: y(this.options.threshold),
      y2: y(this.options.threshold),
      class: "threshold-line",
      "data-threshold": this.options.threshold,
    });
    svg.appendChild(line);
    const caption = svgElement("text", {
      x: layout.width - 6,
      y: y(this.options.threshold) - 4,
      "text-anchor": "end",
      class: "threshold-label",
    });
    caption.textContent = `θ = ${this.options.threshold}`;
    svg.appendChild(caption);

    const axis = svgElement("line", {
      x1: layout.left,
      x2: layout.left,
      y1: layout.top,
      y2: layout.height - layout.bottom,
      class: "axis",
    });
    svg.appendChild(axis);

    const legend = document.createElement("div");
    legend.className = "legend";
    for (const measure of this.measures) {
      const item = document.createElement("span");
      item.className = this.activeMeasures.has(measure) ? "legend-item active" : "legend-item";
      item.dataset.measure = measure;
      item.textContent = measure;
      item.addEventListener("click", () => this.toggleMeasure(measure));
      legend.appendChild(item);
    }
    this.container.append(svg, legend);
  }
}

export interface ParetoChartOptions {
  width?: number;
  height?: number;
  onPointClick?: (point: ResolutionPoint, index: number) => void;
}

export class ParetoChart {
  constructor(
    private readonly container: HTMLElement,
    private readonly resolution: Resolution,
    private readonly options: ParetoChartOptions = {},
  ) {
    this.render();
  }

  render(): void {
    this.container.replaceChildren();
    const width = this.options.width ?? 420;
    const height = this.options.height ?? 300;
    const pad = { left: 48, right: 12, top: 12, bottom: 42 };
    const frontier = new Set(this.resolution.frontier_indices);

    const fs = this.resolution.points.map((p) => p.F);
    const as = this.resolution.points.map((p) => p.A);
    const fMax = Math.max(...fs, 0.01);
    const aMin = Math.min(...as, 0);
    const aMax = Math.max(...as, 1);
    const x = (f: number) => pad.left + ((width - pad.left - pad.right) * f) / fMax;
    const y = (a: number) =>
      pad.top + (height - pad.top - pad.bottom) * (1 - (a - aMin) / Math.max(aMax - aMin, 1e-9));

    const svg = svgElement("svg", { width, height, class: "pareto-chart", role: "img" });

    const xLabel = svgElement("text", {
      x: width / 2,
      y: height - 8,
      "text-anchor": "middle",
      class: "axis-label",
    });
    xLabel.textContent = "unfairness F (smaller is fairer)";
    svg.appendChild(xLabel);

    const orientation = this.resolution.config.orientation;
    const yLabel = svgElement("text", {
      x: 12,
      y: height / 2,
      "text-anchor": "middle",
      class: "axis-label",
      transform: `rotate(-90 12 ${height / 2})`,
    });
    yLabel.textContent = `worst-group ${this.resolution.config.measure} (A, ${orientation})`;
    svg.appendChild(yLabel);

    this.resolution.points.forEach((point, index) => {
      const circle = svgElement("circle", {
        cx: x(point.F),
        cy: y(point.A),
        r: frontier.has(index) ? 6 : 4,
        "data-index": index,
        "data-f": point.F,
        "data-a": point.A,
      });
      circle.setAttribute(
        "class",
        frontier.has(index) ? "point frontier" : "point",
      );
      const hover = svgElement("title");
      hover.textContent =
        `F=${point.F.toFixed(4)} A=${point.A.toFixed(4)}\n` +
        Object.entries(point.assignment)
          .map(([group, matcher]) => `${group} -> ${matcher}`)
          .join("\n");
      circle.appendChild(hover);
      if (this.options.onPointClick) {
        circle.addEventListener("click", () => this.options.onPointClick?.(point, index));
      }
      svg.appendChild(circle);
    });

    this.container.appendChild(svg);
  }
}

function fmt(value: number | null): string {
  return value === null ? "-" : value.toFixed(4);
}
