// Results view: risk timeline chart, pollution band chart, and the
// recommendation table in fixed action order with yes-actions highlighted
// and their rule citations attached.  Every rendered number is taken
// verbatim from an API payload.

import { renderLineChart } from "./charts.js";
import type {
  DailyPoint,
  Recommendation,
  RecommendationRow,
  TimelinePoint,
} from "./types.js";

export interface ResultsViewModel {
  generatedAt: string;
  categoryLabel: string;
  categoryNumber: number;
  meanRisk: number;
  maxRisk: number;
  timeline: TimelinePoint[];
  band: Record<string, { low: DailyPoint[]; high: DailyPoint[] }>;
  rows: RecommendationRow[];
  coercions: string[];
}

export function buildViewModel(
  recommendation: Recommendation,
  timeline: TimelinePoint[],
  band: Record<string, { low: DailyPoint[]; high: DailyPoint[] }>,
): ResultsViewModel {
  return {
    generatedAt: recommendation.generated_at,
    categoryLabel: recommendation.risk.iso9223.label,
    categoryNumber: recommendation.risk.iso9223.category,
    meanRisk: recommendation.risk.mean,
    maxRisk: recommendation.risk.max,
    timeline,
    band,
    rows: recommendation.rows,
    coercions: recommendation.coercions,
  };
}

export function renderRecommendationTable(
  doc: Document,
  container: Element,
  rows: RecommendationRow[],
): void {
  container.textContent = "";
  const table = doc.createElement("table");
  table.id = "recommendation-table";
  const head = doc.createElement("tr");
  for (const title of ["Action", "Output"]) {
    const th = doc.createElement("th");
    th.textContent = title;
    head.append(th);
  }
  table.append(head);
  for (const row of rows) {
    const tr = doc.createElement("tr");
    tr.dataset.action = row.action;
    if (row.highlight) {
      tr.className = "highlight";
    }
    const title = doc.createElement("td");
    title.textContent = row.title;
    const output = doc.createElement("td");
    output.textContent = row.output === "no_action" ? "No action" : capitalize(row.output);
    tr.append(title, output);
    table.append(tr);
    if (row.highlight && row.explanations.length > 0) {
      const why = doc.createElement("tr");
      why.className = "explanation";
      why.dataset.explains = row.action;
      const cell = doc.createElement("td");
      cell.colSpan = 2;
      cell.textContent = row.explanations.join(" ");
      why.append(cell);
      table.append(why);
    }
  }
  container.append(table);
}

function capitalize(value: string): string {
  return value.charAt(0).toUpperCase() + value.slice(1);
}

export function renderTimelineChart(
  doc: Document,
  container: Element,
  timeline: TimelinePoint[],
): void {
  const points: [number, number][] = [];
  timeline.forEach(([, score], index) => {
    if (score !== null) {
      points.push([index, score]);
    }
  });
  renderLineChart(doc, container, [
    { label: "risk score", points, cssClass: "series-risk" },
  ]);
}

export function renderBandChart(
  doc: Document,
  container: Element,
  species: string,
  band: { low: DailyPoint[]; high: DailyPoint[] },
): void {
  renderLineChart(doc, container, [
    {
      label: `${species} low exchange`,
      points: band.low.map(([, v], i) => [i, v] as [number, number]),
      cssClass: "series-low",
    },
    {
      label: `${species} high exchange`,
      points: band.high.map(([, v], i) => [i, v] as [number, number]),
      cssClass: "series-high",
    },
  ]);
}

export function renderSummary(doc: Document, container: Element, model: ResultsViewModel): void {
  container.textContent = "";
  const category = doc.createElement("p");
  category.id = "result-category";
  category.textContent = `Corrosivity: C${model.categoryNumber} (${model.categoryLabel})`;
  const risk = doc.createElement("p");
  risk.id = "result-risk";
  risk.textContent = `Mean risk ${model.meanRisk}, max risk ${model.maxRisk}`;
  const stamp = doc.createElement("p");
  stamp.id = "result-generated-at";
  stamp.textContent = `Evaluated data up to ${model.generatedAt}`;
  container.append(category, risk, stamp);
  if (model.coercions.length > 0) {
    const note = doc.createElement("p");
    note.className = "coercions";
    note.textContent = `Adjusted for consistency: ${model.coercions.join("; ")}`;
    container.append(note);
  }
}
