/** Results chart: one bar with confidence whiskers per comparison.
 *
 * Every displayed number is copied from the results payload; the only
 * arithmetic here is pixel scaling. Each row carries the raw payload
 * values in data attributes so fidelity against /api/results can be
 * audited digit for digit.
 */

import type { Comparison, ResultsPayload } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const BAR_WIDTH = 420;
const BAR_HEIGHT = 26;

export function formatRate(value: number): string {
  return `${(100 * value).toFixed(1)}%`;
}

function svgElement<K extends keyof SVGElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string>,
): SVGElementTagNameMap[K] {
  const el = doc.createElementNS(SVG_NS, tag);
  for (const [name, value] of Object.entries(attrs)) el.setAttribute(name, value);
  return el;
}

function comparisonRow(doc: Document, comparison: Comparison): HTMLElement {
  const row = doc.createElement("div");
  row.className = "comparison-row";
  row.dataset["candidate"] = comparison.candidate;
  row.dataset["alternative"] = comparison.alternative;
  row.dataset["rate"] = String(comparison.rate);
  row.dataset["ciLow"] = String(comparison.ci_low);
  row.dataset["ciHigh"] = String(comparison.ci_high);
  row.dataset["nVotes"] = String(comparison.n_votes);

  const label = doc.createElement("div");
  label.className = "comparison-label";
  label.textContent = `${comparison.candidate} preferred over ${comparison.alternative}`;
  row.appendChild(label);

  const svg = svgElement(doc, "svg", {
    class: "comparison-bar",
    width: String(BAR_WIDTH),
    height: String(BAR_HEIGHT),
    role: "img",
  });
  svg.appendChild(
    svgElement(doc, "rect", {
      class: "bar-track",
      x: "0",
      y: "4",
      width: String(BAR_WIDTH),
      height: String(BAR_HEIGHT - 8),
    }),
  );
  svg.appendChild(
    svgElement(doc, "rect", {
      class: "bar-rate",
      x: "0",
      y: "4",
      width: String(comparison.rate * BAR_WIDTH),
      height: String(BAR_HEIGHT - 8),
    }),
  );
  const mid = String(BAR_HEIGHT / 2);
  svg.appendChild(
    svgElement(doc, "line", {
      class: "bar-ci",
      x1: String(comparison.ci_low * BAR_WIDTH),
      x2: String(comparison.ci_high * BAR_WIDTH),
      y1: mid,
      y2: mid,
    }),
  );
  for (const bound of [comparison.ci_low, comparison.ci_high]) {
    svg.appendChild(
      svgElement(doc, "line", {
        class: "bar-ci-cap",
        x1: String(bound * BAR_WIDTH),
        x2: String(bound * BAR_WIDTH),
        y1: "6",
        y2: String(BAR_HEIGHT - 6),
      }),
    );
  }
  svg.appendChild(
    svgElement(doc, "line", {
      class: "bar-midline",
      x1: String(BAR_WIDTH / 2),
      x2: String(BAR_WIDTH / 2),
      y1: "0",
      y2: String(BAR_HEIGHT),
    }),
  );
  row.appendChild(svg);

  const caption = doc.createElement("div");
  caption.className = "comparison-caption";
  caption.textContent =
    `${formatRate(comparison.rate)} ` +
    `[${formatRate(comparison.ci_low)}, ${formatRate(comparison.ci_high)}] ` +
    `over ${comparison.n_votes} votes`;
  row.appendChild(caption);
  return row;
}

export function renderResults(doc: Document, payload: ResultsPayload): HTMLElement {
  const container = doc.createElement("section");
  container.className = "results";
  if (payload.comparisons.length === 0) {
    const empty = doc.createElement("p");
    empty.className = "empty-state";
    empty.textContent = "No votes recorded yet.";
    container.appendChild(empty);
    return container;
  }
  for (const comparison of payload.comparisons) {
    container.appendChild(comparisonRow(doc, comparison));
  }
  const note = doc.createElement("p");
  note.className = "results-note";
  note.textContent =
    `Whiskers are ${Math.round(payload.metadata.confidence * 100)}% bootstrap intervals ` +
    `over ${payload.metadata.total_votes} votes.`;
  container.appendChild(note);
  return container;
}
